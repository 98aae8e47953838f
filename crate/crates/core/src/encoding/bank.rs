use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::imaging::Kernel;

const ZERO_MEAN_TOLERANCE: f64 = 1e-6;

/// `n` zero-mean square kernels of odd side `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    side: usize,
    kernels: Vec<Kernel>,
}

impl FilterBank {
    /// Validates shape and forces every kernel to zero mean.
    pub fn new(side: usize, kernels: Vec<Vec<f64>>) -> Result<Self> {
        if side % 2 == 0 {
            return Err(Error::EvenKernelSide(side));
        }
        if kernels.is_empty() {
            return Err(Error::MalformedFilterFile("bank has no filters".into()));
        }
        let kernels = kernels
            .into_iter()
            .map(|mut w| {
                if w.len() != side * side {
                    return Err(Error::MalformedFilterFile(format!(
                        "kernel has {} weights, expected {}",
                        w.len(),
                        side * side
                    )));
                }
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::MalformedFilterFile("non-finite weight".into()));
                }
                let mean = w.iter().sum::<f64>() / w.len() as f64;
                w.iter_mut().for_each(|v| *v -= mean);
                let residual = w.iter().sum::<f64>().abs();
                if residual >= ZERO_MEAN_TOLERANCE {
                    return Err(Error::MalformedFilterFile(format!(
                        "kernel not zero-mean after centering (residual {residual:e})"
                    )));
                }
                Kernel::new(side, w)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { side, kernels })
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    /// Pseudo-random bank: Gaussian draws projected onto the zero-mean
    /// subspace and Gram-Schmidt orthonormalized. Deterministic in `seed`.
    pub fn seeded_random(n: usize, side: usize, seed: u64) -> Result<Self> {
        if side % 2 == 0 {
            return Err(Error::EvenKernelSide(side));
        }
        let dim = side * side;
        if n == 0 || n >= dim {
            return Err(Error::MalformedFilterFile(format!(
                "cannot build {n} orthogonal zero-mean filters of side {side}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
        while basis.len() < n {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mean = v.iter().sum::<f64>() / dim as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            // Two passes of modified Gram-Schmidt for numerical orthogonality.
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        Self::new(side, basis)
    }

    /// `BSIF <n> <s>` then one line of `s` weights per kernel row.
    pub fn to_text(&self) -> String {
        let mut out = format!("BSIF {} {}\n", self.len(), self.side);
        for k in &self.kernels {
            for row in k.weights().chunks(self.side) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some("BSIF") {
            return Err(Error::MalformedFilterFile("missing BSIF magic".into()));
        }
        let mut header = |name: &str| -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::MalformedFilterFile(format!("bad {name} in header")))
        };
        let n = header("filter count")?;
        let s = header("kernel side")?;
        if s % 2 == 0 {
            return Err(Error::EvenKernelSide(s));
        }
        if n == 0 {
            return Err(Error::MalformedFilterFile("filter count is zero".into()));
        }
        let values = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::MalformedFilterFile(format!("{t:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n * s * s {
            return Err(Error::MalformedFilterFile(format!(
                "expected {} weights, found {}",
                n * s * s,
                values.len()
            )));
        }
        Self::new(s, values.chunks(s * s).map(<[f64]>::to_vec).collect())
    }
}

pub fn load_filter_bank(path: impl AsRef<Path>) -> Result<FilterBank> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::MalformedFilterFile(format!("{}: {e}", path.display())))?;
    FilterBank::parse(&text)
}

pub fn save_filter_bank(bank: &FilterBank, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bank.to_text()).map_err(|e| Error::io(path, e))
}

/// Banks shipped with the crate, keyed by `(n, s)`; generated once with
/// [`FilterBank::seeded_random`] and checked in under `data/`.
pub mod defaults {
    use super::FilterBank;

    pub const RECOGNITION_SEED: u64 = 0x1815;
    pub const PAD_SEED_BASE: u64 = 0x0D2D;

    pub const RECOGNITION: &str = include_str!("../../data/recognition_8x9.bsif");
    const PAD: [(usize, usize, &str); 4] = [
        (8, 5, include_str!("../../data/pad_8x5.bsif")),
        (8, 9, include_str!("../../data/pad_8x9.bsif")),
        (8, 13, include_str!("../../data/pad_8x13.bsif")),
        (8, 17, include_str!("../../data/pad_8x17.bsif")),
    ];

    pub fn recognition() -> FilterBank {
        FilterBank::parse(RECOGNITION).expect("shipped recognition bank is valid")
    }

    /// Shipped texture-PAD bank for `n` filters of side `s`, if any.
    pub fn pad(n: usize, s: usize) -> Option<FilterBank> {
        PAD.iter()
            .find(|(pn, ps, _)| *pn == n && *ps == s)
            .map(|(_, _, text)| FilterBank::parse(text).expect("shipped PAD bank is valid"))
    }

    pub fn pad_seed(s: usize) -> u64 {
        PAD_SEED_BASE + s as u64
    }

    pub fn pad_scales() -> Vec<(usize, usize)> {
        PAD.iter().map(|(n, s, _)| (*n, *s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_filter() {
        let bank = FilterBank::parse("BSIF 1 3\n1 0 -1\n2 0 -2\n1 0 -1\n").unwrap();
        assert_eq!((bank.len(), bank.side()), (1, 3));
        assert!(bank.kernels()[0].sum().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_files() {
        let seventeen = vec!["0.5"; 17].join(" ");
        let err = FilterBank::parse(&format!("BSIF 2 3 {seventeen}")).unwrap_err();
        assert_eq!(err.name(), "MalformedFilterFile");
        assert_eq!(FilterBank::parse("BSIF 1 4 0 0").unwrap_err().name(), "EvenKernelSide");
        assert_eq!(FilterBank::parse("BSIF x 3").unwrap_err().name(), "MalformedFilterFile");
        assert_eq!(FilterBank::parse("").unwrap_err().name(), "MalformedFilterFile");
        assert_eq!(
            load_filter_bank("/definitely/not/here.bsif").unwrap_err().name(),
            "MalformedFilterFile"
        );
    }

    #[test]
    fn non_zero_mean_input_is_centered() {
        let bank = FilterBank::parse("BSIF 1 3 1 1 1 1 1 1 1 1 10").unwrap();
        assert!(bank.kernels()[0].sum().abs() < 1e-12);
    }

    #[test]
    fn seeded_banks_are_orthonormal_and_zero_mean() {
        let bank = FilterBank::seeded_random(8, 9, 3).unwrap();
        for (i, a) in bank.kernels().iter().enumerate() {
            assert!(a.sum().abs() < 1e-9);
            for (j, b) in bank.kernels().iter().enumerate() {
                let dot: f64 = a.weights().iter().zip(b.weights()).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
        assert_eq!(bank, FilterBank::seeded_random(8, 9, 3).unwrap());
    }

    #[test]
    fn text_roundtrip() {
        let bank = FilterBank::seeded_random(3, 5, 11).unwrap();
        let back = FilterBank::parse(&bank.to_text()).unwrap();
        for (a, b) in bank.kernels().iter().zip(back.kernels()) {
            for (x, y) in a.weights().iter().zip(b.weights()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shipped_banks_match_their_generator() {
        let close = |a: &FilterBank, b: &FilterBank| {
            a.len() == b.len()
                && a.kernels().iter().zip(b.kernels()).all(|(x, y)| {
                    x.weights().iter().zip(y.weights()).all(|(p, q)| (p - q).abs() < 1e-12)
                })
        };
        let rec = FilterBank::seeded_random(8, 9, defaults::RECOGNITION_SEED).unwrap();
        assert!(close(&defaults::recognition(), &rec));
        for (n, s) in defaults::pad_scales() {
            let gen = FilterBank::seeded_random(n, s, defaults::pad_seed(s)).unwrap();
            assert!(close(&defaults::pad(n, s).unwrap(), &gen), "scale {n}x{s}");
        }
        assert!(defaults::pad(8, 7).is_none());
    }
}

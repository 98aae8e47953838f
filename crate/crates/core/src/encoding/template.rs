use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A `rows x cols` bitmap packed column-major: every column occupies
/// `ceil(rows / 64)` words, so a circular column shift is an index offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    rows: usize,
    cols: usize,
    words_per_col: usize,
    words: Vec<u64>,
}

impl BitPlane {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_col = rows.div_ceil(64);
        Self {
            rows,
            cols,
            words_per_col,
            words: vec![0; words_per_col * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut plane = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    plane.set(i, j, true);
                }
            }
        }
        plane
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        let w = self.words[col * self.words_per_col + row / 64];
        (w >> (row % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let w = &mut self.words[col * self.words_per_col + row / 64];
        let bit = 1u64 << (row % 64);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Packed words of one column.
    #[inline]
    pub(crate) fn column(&self, col: usize) -> &[u64] {
        &self.words[col * self.words_per_col..(col + 1) * self.words_per_col]
    }

    /// Every bit flipped, padding bits past `rows` kept at zero.
    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        let tail = self.rows % 64;
        for col in 0..self.cols {
            for k in 0..self.words_per_col {
                let idx = col * self.words_per_col + k;
                let mut v = !self.words[idx];
                if k == self.words_per_col - 1 && tail != 0 {
                    v &= (1u64 << tail) - 1;
                }
                out.words[idx] = v;
            }
        }
        out
    }

    /// Circularly shifted copy: output column `j` holds input column
    /// `j - delta` (positive `delta` moves content rightward).
    pub fn shifted(&self, delta: isize) -> Self {
        let cols = self.cols as isize;
        Self::from_fn(self.rows, self.cols, |i, j| {
            let src = (j as isize - delta).rem_euclid(cols) as usize;
            self.get(i, src)
        })
    }
}

/// BSIF iris code: `n` bit-planes sharing one validity mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrisTemplate {
    planes: Vec<BitPlane>,
    mask: BitPlane,
}

impl IrisTemplate {
    pub fn new(planes: Vec<BitPlane>, mask: BitPlane) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::ShapeMismatch("template needs at least one plane".into()));
        }
        if planes
            .iter()
            .any(|p| p.rows != mask.rows || p.cols != mask.cols)
        {
            return Err(Error::ShapeMismatch("planes and mask differ in shape".into()));
        }
        Ok(Self { planes, mask })
    }

    pub fn n_planes(&self) -> usize {
        self.planes.len()
    }

    pub fn rows(&self) -> usize {
        self.mask.rows
    }

    pub fn cols(&self) -> usize {
        self.mask.cols
    }

    pub fn planes(&self) -> &[BitPlane] {
        &self.planes
    }

    pub fn planes_mut(&mut self) -> &mut [BitPlane] {
        &mut self.planes
    }

    pub fn mask(&self) -> &BitPlane {
        &self.mask
    }

    pub fn mask_mut(&mut self) -> &mut BitPlane {
        &mut self.mask
    }

    /// Code bits complemented; mask unchanged.
    pub fn complement(&self) -> Self {
        Self {
            planes: self.planes.iter().map(BitPlane::complement).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Planes and mask shifted together, see [`BitPlane::shifted`].
    pub fn shifted(&self, delta: isize) -> Self {
        Self {
            planes: self.planes.iter().map(|p| p.shifted(delta)).collect(),
            mask: self.mask.shifted(delta),
        }
    }

    /// `ITPL 1 <n> <rows> <cols>`, then `n` plane blocks and a mask block,
    /// each `rows` lines of `cols` characters from `{0,1}`.
    pub fn to_text(&self) -> String {
        let (rows, cols) = (self.rows(), self.cols());
        let mut out = String::with_capacity((self.planes.len() + 1) * rows * (cols + 1) + 32);
        writeln!(out, "ITPL 1 {} {rows} {cols}", self.planes.len()).unwrap();
        for plane in self.planes.iter().chain(std::iter::once(&self.mask)) {
            for i in 0..rows {
                for j in 0..cols {
                    out.push(if plane.get(i, j) { '1' } else { '0' });
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::MalformedTemplateFile(msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "ITPL" {
            return Err(bad(format!("bad header {header:?}")));
        }
        if fields[1] != "1" {
            return Err(bad(format!("unsupported version {}", fields[1])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number {s:?}")));
        let (n, rows, cols) = (num(fields[2])?, num(fields[3])?, num(fields[4])?);
        if n == 0 || rows == 0 || cols == 0 {
            return Err(bad("zero-sized template".into()));
        }
        let mut blocks = Vec::with_capacity(n + 1);
        for b in 0..=n {
            let mut plane = BitPlane::zeros(rows, cols);
            for i in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| bad(format!("block {b} ends at row {i}")))?;
                if line.len() != cols {
                    return Err(bad(format!("block {b} row {i} has {} columns", line.len())));
                }
                for (j, ch) in line.bytes().enumerate() {
                    match ch {
                        b'0' => {}
                        b'1' => plane.set(i, j, true),
                        other => return Err(bad(format!("unexpected byte {other:#x}"))),
                    }
                }
            }
            blocks.push(plane);
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing data after mask block".into()));
        }
        let mask = blocks.pop().expect("n + 1 blocks");
        Self::new(blocks, mask)
    }
}

pub fn save_template(t: &IrisTemplate, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, t.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_template(path: impl AsRef<Path>) -> Result<IrisTemplate> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    IrisTemplate::parse(&text)
}

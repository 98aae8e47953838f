use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::encoding::{defaults, load_filter_bank, FilterBank};
use crate::error::{Error, Result};
use crate::imaging::{center_crop, convolve_zero_mean, IrisImage};
use crate::pad3d::Decision;

pub const DEFAULT_ROI: usize = 300;

/// Concatenated per-scale codeword histograms, each block summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// One BSIF scale: a bank of `n` filters of side `s`, giving `2^n` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PadScale {
    pub bank: FilterBank,
}

impl PadScale {
    pub fn bins(&self) -> usize {
        1 << self.bank.len()
    }
}

/// Resolves `NxS` names against the shipped banks, anything else is read
/// as a `.bsif` path.
pub fn resolve_scale(name: &str) -> Result<PadScale> {
    if let Some((n, s)) = name.split_once('x') {
        if let (Ok(n), Ok(s)) = (n.parse::<usize>(), s.parse::<usize>()) {
            return defaults::pad(n, s)
                .map(|bank| PadScale { bank })
                .ok_or_else(|| Error::MissingFilterBank(name.to_string()));
        }
    }
    if Path::new(name).exists() {
        return Ok(PadScale {
            bank: load_filter_bank(name)?,
        });
    }
    Err(Error::MissingFilterBank(name.to_string()))
}

pub fn resolve_scales<S: AsRef<str>>(names: &[S]) -> Result<Vec<PadScale>> {
    names.iter().map(|n| resolve_scale(n.as_ref())).collect()
}

pub fn default_scales() -> Vec<PadScale> {
    defaults::pad_scales()
        .into_iter()
        .map(|(n, s)| PadScale {
            bank: defaults::pad(n, s).expect("shipped bank"),
        })
        .collect()
}

/// Multi-scale BSIF histogram of the central `roi x roi` window.
///
/// Filter `k` of a scale sets bit `k` of the pixel codeword when its
/// response is positive.
pub fn extract_features(img: &IrisImage, scales: &[PadScale], roi: usize) -> Result<FeatureVector> {
    if scales.is_empty() {
        return Err(Error::MissingFilterBank("no scales configured".into()));
    }
    let crop = center_crop(img, roi, roi)?;
    let npix = (roi * roi) as f64;
    let mut values = Vec::with_capacity(scales.iter().map(PadScale::bins).sum());
    for scale in scales {
        if scale.bank.len() > 16 {
            return Err(Error::MissingFilterBank(format!(
                "{} filters exceed the 16-bit codeword limit",
                scale.bank.len()
            )));
        }
        let responses = scale
            .bank
            .kernels()
            .par_iter()
            .map(|kernel| convolve_zero_mean(&crop, kernel))
            .collect::<Result<Vec<_>>>()?;
        let mut codes = vec![0usize; roi * roi];
        for (k, resp) in responses.iter().enumerate() {
            for (c, &r) in codes.iter_mut().zip(&resp.data) {
                if r > 0.0 {
                    *c |= 1 << k;
                }
            }
        }
        let mut hist = vec![0usize; scale.bins()];
        for c in codes {
            hist[c] += 1;
        }
        values.extend(hist.into_iter().map(|h| h as f64 / npix));
    }
    Ok(FeatureVector { values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub label: Decision,
    pub features: FeatureVector,
}

/// `label,v1,...,vD` with label `live` or `attack`.
pub fn format_feature_csv(rows: &[LabeledFeatures]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(row.label.as_str());
        for v in &row.features.values {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_feature_csv(text: &str) -> Result<Vec<LabeledFeatures>> {
    let mut rows = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_text = fields.next().unwrap_or_default().trim();
        let label = match label_text {
            "0" => Some(Decision::Live),
            "1" => Some(Decision::Attack),
            other => Decision::parse(other),
        };
        let Some(label) = label else {
            if lineno == 0 && label_text == "label" {
                continue;
            }
            return Err(Error::MalformedFeatureFile(format!(
                "line {}: unknown label {label_text:?}",
                lineno + 1
            )));
        };
        let values = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::MalformedFeatureFile(format!("line {}: {f:?} is not a number", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::MalformedFeatureFile(format!("line {}: no values", lineno + 1)));
        }
        if *dim.get_or_insert(values.len()) != values.len() {
            return Err(Error::MalformedFeatureFile(format!(
                "line {}: {} values, expected {}",
                lineno + 1,
                values.len(),
                dim.unwrap()
            )));
        }
        rows.push(LabeledFeatures {
            label,
            features: FeatureVector { values },
        });
    }
    Ok(rows)
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledFeatures>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_csv(&text)
}

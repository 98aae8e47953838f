use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::encoding::{defaults, load_filter_bank, FilterBank, DEFAULT_MAX_SHIFT};
use crate::error::{Error, Result};
use crate::normalization::{DEFAULT_COLS, DEFAULT_ROWS};
use crate::pad2d::{default_scales, load_ensemble, resolve_scales, Ensemble, PadScale, DEFAULT_ROI};
use crate::pad3d::{IlluminationGeometry, DEFAULT_HALF_ANGLE_DEG, DEFAULT_TAU3};

use super::{Stage, StageError, Staged};

/// Distance at or below which two templates are declared the same eye.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.32;

/// Pipeline settings.
///
/// The file format is one `key = value` per line; blank lines and lines
/// starting with `#` are ignored. Keys:
///
/// | key | meaning | default |
/// |---|---|---|
/// | `rows`, `cols` | normalized raster size | 64, 512 |
/// | `filter_bank` | recognition `.bsif` file, empty for the shipped bank | empty |
/// | `max_shift` | matcher column shift range | 16 |
/// | `match_threshold` | accept when score <= threshold | 0.32 |
/// | `pad_scales` | comma separated `NxS` names or `.bsif` paths | `8x5,8x9,8x13,8x17` |
/// | `roi` | texture PAD crop side | 300 |
/// | `tau3` | photometric PAD threshold | 0.007 |
/// | `theta` | light half-angle in degrees | 20 |
/// | `model` | texture PAD ensemble file | empty |
/// | `workers` | batch worker threads | 1 |
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub rows: usize,
    pub cols: usize,
    pub filter_bank: Option<PathBuf>,
    pub max_shift: usize,
    pub match_threshold: f64,
    pub pad_scales: Vec<String>,
    pub roi: usize,
    pub tau3: f64,
    pub theta_deg: f64,
    pub model: Option<PathBuf>,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rows: DEFAULT_ROWS,
            cols: DEFAULT_COLS,
            filter_bank: None,
            max_shift: DEFAULT_MAX_SHIFT,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            pad_scales: defaults::pad_scales().iter().map(|(n, s)| format!("{n}x{s}")).collect(),
            roi: DEFAULT_ROI,
            tau3: DEFAULT_TAU3,
            theta_deg: DEFAULT_HALF_ANGLE_DEG,
            model: None,
            workers: 1,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: {value:?} is not a valid number")))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl PipelineConfig {
    /// Sets one key. Used for both file lines and `--set key=value`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "rows" => self.rows = number(key, value)?,
            "cols" => self.cols = number(key, value)?,
            "filter_bank" => self.filter_bank = optional_path(value),
            "max_shift" => self.max_shift = number(key, value)?,
            "match_threshold" => self.match_threshold = number(key, value)?,
            "pad_scales" => {
                self.pad_scales = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "roi" => self.roi = number(key, value)?,
            "tau3" => self.tau3 = number(key, value)?,
            "theta" => self.theta_deg = number(key, value)?,
            "model" => self.model = optional_path(value),
            "workers" => self.workers = number(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {pair:?}")))?;
        self.set(k, v)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            cfg.set_pair(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Value checks plus existence of every referenced file. A missing bank
    /// or model is reported by the stage that would have read it.
    pub fn validate(&self) -> std::result::Result<(), StageError> {
        let config = |m: String| Err(Error::Config(m)).stage(Stage::Config);
        if self.workers == 0 {
            return config("workers must be at least 1".into());
        }
        if self.rows == 0 || self.cols == 0 {
            return config(format!("raster {}x{} is empty", self.rows, self.cols));
        }
        if !(self.match_threshold.is_finite() && self.tau3.is_finite()) {
            return config("thresholds must be finite".into());
        }
        if let Some(p) = &self.filter_bank {
            if !p.is_file() {
                return Err(Error::MalformedFilterFile(format!("{}: no such file", p.display()))).stage(Stage::Encoding);
            }
        }
        if let Some(p) = &self.model {
            if !p.is_file() {
                return Err(Error::MalformedModelFile(format!("{}: no such file", p.display()))).stage(Stage::Pad2d);
            }
        }
        Ok(())
    }

    pub fn recognition_bank(&self) -> Result<FilterBank> {
        match &self.filter_bank {
            Some(p) => load_filter_bank(p),
            None => Ok(defaults::recognition()),
        }
    }

    pub fn scales(&self) -> Result<Vec<PadScale>> {
        if self.pad_scales.is_empty() {
            return Ok(default_scales());
        }
        resolve_scales(&self.pad_scales)
    }

    pub fn geometry(&self) -> Result<IlluminationGeometry> {
        IlluminationGeometry::symmetric(self.theta_deg)
    }

    pub fn ensemble(&self) -> Result<Ensemble> {
        match &self.model {
            Some(p) => load_ensemble(p),
            None => Err(Error::MalformedModelFile("no model configured (set model=<file>)".into())),
        }
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        writeln!(f, "rows = {}", self.rows)?;
        writeln!(f, "cols = {}", self.cols)?;
        writeln!(f, "filter_bank = {}", path(&self.filter_bank))?;
        writeln!(f, "max_shift = {}", self.max_shift)?;
        writeln!(f, "match_threshold = {}", self.match_threshold)?;
        writeln!(f, "pad_scales = {}", self.pad_scales.join(","))?;
        writeln!(f, "roi = {}", self.roi)?;
        writeln!(f, "tau3 = {}", self.tau3)?;
        writeln!(f, "theta = {}", self.theta_deg)?;
        writeln!(f, "model = {}", path(&self.model))?;
        writeln!(f, "workers = {}", self.workers)
    }
}

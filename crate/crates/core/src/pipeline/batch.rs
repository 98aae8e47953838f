use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use rayon::ThreadPoolBuilder;

use crate::encoding::match_templates;
use crate::error::{Error, Result};
use crate::metrics::ScoreSet;
use crate::pad2d::{extract_features, LabeledFeatures};
use crate::pad3d::Decision;
use crate::synthgen::{read_manifest, Lens, ManifestEntry};

use super::{enroll, read_image, PipelineConfig, SegSource, Stage, StageResult, Staged};

pub const BATCH_HEADER: &str = "probe,gallery,label,score,shift";

/// Comparison class of a template pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    /// Same identity, neither wearing a lens.
    Genuine,
    /// Different identities.
    Imposter,
    /// Same identity, at least one side wearing a lens.
    Contact,
}

impl PairLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::Genuine => "genuine",
            PairLabel::Imposter => "imposter",
            PairLabel::Contact => "contact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "genuine" => Some(PairLabel::Genuine),
            "imposter" => Some(PairLabel::Imposter),
            "contact" => Some(PairLabel::Contact),
            _ => None,
        }
    }
}

pub fn pair_label(a: &ManifestEntry, b: &ManifestEntry) -> PairLabel {
    if a.identity != b.identity {
        PairLabel::Imposter
    } else if a.lens != Lens::None || b.lens != Lens::None {
        PairLabel::Contact
    } else {
        PairLabel::Genuine
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub probe: String,
    pub gallery: String,
    pub label: PairLabel,
    pub score: f64,
    pub shift: isize,
}

/// Enrolls every manifest entry and matches all unordered pairs `i < j`.
/// Rows come out in manifest order whatever the worker count.
///
/// With `truth_seg` the `.circ` and `_mask.pgm` sidecars replace automatic
/// segmentation.
pub fn batch_scores(manifest: &Path, cfg: &PipelineConfig, truth_seg: bool) -> StageResult<Vec<BatchRow>> {
    cfg.validate()?;
    let entries = read_manifest(manifest).stage(Stage::Input)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let bank = cfg.recognition_bank().stage(Stage::Encoding)?;
    let pool = ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
        .stage(Stage::Config)?;
    pool.install(|| {
        let templates = entries
            .par_iter()
            .map(|e| {
                let img = read_image(dir.join(&e.path))?;
                let seg = if truth_seg {
                    SegSource::for_stem(&dir.join(e.stem()))
                } else {
                    SegSource::Auto
                };
                enroll(&img, &seg, cfg, &bank)
            })
            .collect::<StageResult<Vec<_>>>()?;
        let pairs: Vec<(usize, usize)> = (0..entries.len())
            .flat_map(|i| (i + 1..entries.len()).map(move |j| (i, j)))
            .collect();
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let m = match_templates(&templates[i], &templates[j], cfg.max_shift).stage(Stage::Matching)?;
                Ok(BatchRow {
                    probe: entries[i].path.clone(),
                    gallery: entries[j].path.clone(),
                    label: pair_label(&entries[i], &entries[j]),
                    score: m.score,
                    shift: m.best_shift,
                })
            })
            .collect()
    })
}

/// Texture features of every manifest entry, labeled `attack` when a lens
/// is worn. `left` reads `<stem>_L.pgm` instead of the eye image.
pub fn manifest_features(manifest: &Path, cfg: &PipelineConfig, left: bool) -> StageResult<Vec<LabeledFeatures>> {
    cfg.validate()?;
    let entries = read_manifest(manifest).stage(Stage::Input)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let scales = cfg.scales().stage(Stage::Pad2d)?;
    let pool = ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
        .stage(Stage::Config)?;
    pool.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let path = if left {
                    dir.join(format!("{}_L.pgm", e.stem()))
                } else {
                    dir.join(&e.path)
                };
                let img = read_image(path)?;
                let features = extract_features(&img, &scales, cfg.roi).stage(Stage::Pad2d)?;
                let label = if e.lens == Lens::None {
                    Decision::Live
                } else {
                    Decision::Attack
                };
                Ok(LabeledFeatures { label, features })
            })
            .collect()
    })
}

pub fn format_batch_csv(rows: &[BatchRow]) -> String {
    let mut out = format!("{BATCH_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.probe, r.gallery, r.label.as_str(), r.score, r.shift).unwrap();
    }
    out
}

/// Score sets `(genuine vs imposter, genuine vs contact)` from a batch CSV.
pub fn parse_batch_csv(text: &str) -> Result<(ScoreSet, ScoreSet)> {
    let mut imp = ScoreSet::default();
    let mut contact = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (no == 0 && line == BATCH_HEADER) {
            continue;
        }
        let bad = |m: &str| Error::MalformedScoreFile(format!("line {}: {m}", no + 1));
        let fields: Vec<&str> = line.split(',').collect();
        let [_, _, label, score, _] = fields.as_slice() else {
            return Err(bad("expected 5 fields"));
        };
        let label = PairLabel::parse(label).ok_or_else(|| bad("unknown label"))?;
        let score: f64 = score.parse().map_err(|_| bad("score is not a number"))?;
        match label {
            PairLabel::Genuine => imp.genuine.push(score),
            PairLabel::Imposter => imp.imposter.push(score),
            PairLabel::Contact => contact.push(score),
        }
    }
    let lensed = ScoreSet::new(imp.genuine.clone(), contact);
    Ok((imp, lensed))
}

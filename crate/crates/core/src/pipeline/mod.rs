//! End-to-end orchestration used by the `irispad` binary: configuration,
//! verification, the PAD-gated full pipeline, batch evaluation and timing.

mod batch;
mod bench;
mod config;

pub use batch::{batch_scores, format_batch_csv, manifest_features, pair_label, parse_batch_csv, BatchRow, PairLabel, BATCH_HEADER};
pub use bench::{format_timing_report, run_bench, BenchOptions, StageTiming, TimingReport, BENCH_STAGES};
pub use config::{PipelineConfig, DEFAULT_MATCH_THRESHOLD};

use std::fmt;
use std::path::{Path, PathBuf};

use crate::encoding::{encode, load_template, match_templates, FilterBank, IrisTemplate, MatchScore};
use crate::error::{Error, Result};
use crate::fusion::{ospad_fusion_decide, ospad_fusion_decide_eager, FusionReport};
use crate::imaging::{read_mask, read_pgm, IrisImage};
use crate::normalization::normalize;
use crate::segmentation::{
    annulus_mask, ingest_mask_image, read_circles, segment_circular, SegmentConfig, SegmentationResult,
};

/// Pipeline stage names used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Input,
    Segmentation,
    Normalization,
    Encoding,
    Matching,
    Pad3d,
    Pad2d,
    Fusion,
    Training,
    Eval,
    Synth,
    Bench,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Segmentation => "segmentation",
            Stage::Normalization => "normalization",
            Stage::Encoding => "encoding",
            Stage::Matching => "matching",
            Stage::Pad3d => "pad3d",
            Stage::Pad2d => "pad2d",
            Stage::Fusion => "fusion",
            Stage::Training => "training",
            Stage::Eval => "eval",
            Stage::Synth => "synth",
            Stage::Bench => "bench",
        }
    }
}

/// An [`Error`] tagged with the stage that raised it. Displays as
/// `<stage>: <ErrorName>`.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage.as_str(), self.error.name())
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

pub trait Staged<T> {
    fn stage(self, stage: Stage) -> StageResult<T>;
}

impl<T> Staged<T> for Result<T> {
    fn stage(self, stage: Stage) -> StageResult<T> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Where the iris boundaries come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SegSource {
    /// Run the circular segmenter.
    Auto,
    /// Circles from a sidecar, with an optional mask PGM. Without a mask
    /// the full annulus is used.
    Sidecar { circles: PathBuf, mask: Option<PathBuf> },
}

impl SegSource {
    /// Ground-truth sidecars written by `synth` next to `<stem>.pgm`.
    pub fn for_stem(stem: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = stem.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        SegSource::Sidecar {
            circles: with(".circ"),
            mask: Some(with("_mask.pgm")),
        }
    }

    pub fn segment(&self, img: &IrisImage) -> StageResult<SegmentationResult> {
        match self {
            SegSource::Auto => segment_circular(img, &SegmentConfig::default()).stage(Stage::Segmentation),
            SegSource::Sidecar { circles, mask } => {
                let (pupil, iris) = read_circles(circles).stage(Stage::Segmentation)?;
                let mask = match mask {
                    Some(p) => read_mask(p).stage(Stage::Segmentation)?,
                    None => annulus_mask(img.width(), img.height(), &pupil, &iris),
                };
                ingest_mask_image(img, &mask, pupil, iris).stage(Stage::Segmentation)
            }
        }
    }
}

pub fn read_image(path: impl AsRef<Path>) -> StageResult<IrisImage> {
    read_pgm(path).stage(Stage::Input)
}

/// Normalizes and encodes an already segmented image.
pub fn template_from(
    img: &IrisImage,
    seg: &SegmentationResult,
    cfg: &PipelineConfig,
    bank: &FilterBank,
) -> StageResult<IrisTemplate> {
    let norm = normalize(img, seg, cfg.rows, cfg.cols).stage(Stage::Normalization)?;
    encode(&norm, bank).stage(Stage::Encoding)
}

/// Segment, normalize, encode.
pub fn enroll(img: &IrisImage, seg: &SegSource, cfg: &PipelineConfig, bank: &FilterBank) -> StageResult<IrisTemplate> {
    let s = seg.segment(img)?;
    template_from(img, &s, cfg, bank)
}

/// A verification probe.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Image { path: PathBuf, seg: SegSource },
    Template(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOutcome {
    pub score: MatchScore,
    pub matched: bool,
}

impl VerifyOutcome {
    /// `score shift match|nomatch`
    pub fn line(&self) -> String {
        format!(
            "{} {} {}",
            self.score.score,
            self.score.best_shift,
            if self.matched { "match" } else { "nomatch" }
        )
    }
}

fn compare(probe: &IrisTemplate, gallery: &IrisTemplate, cfg: &PipelineConfig) -> StageResult<VerifyOutcome> {
    let score = match_templates(probe, gallery, cfg.max_shift).stage(Stage::Matching)?;
    Ok(VerifyOutcome {
        score,
        matched: score.score <= cfg.match_threshold,
    })
}

fn probe_template(probe: &Probe, cfg: &PipelineConfig) -> StageResult<IrisTemplate> {
    match probe {
        Probe::Template(p) => load_template(p).stage(Stage::Input),
        Probe::Image { path, seg } => {
            let img = read_image(path)?;
            let bank = cfg.recognition_bank().stage(Stage::Encoding)?;
            enroll(&img, seg, cfg, &bank)
        }
    }
}

pub fn run_verify(probe: &Probe, gallery: &Path, cfg: &PipelineConfig) -> StageResult<VerifyOutcome> {
    cfg.validate()?;
    let gallery = load_template(gallery).stage(Stage::Input)?;
    let probe = probe_template(probe, cfg)?;
    compare(&probe, &gallery, cfg)
}

/// Result of the PAD-gated pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FullOutcome {
    pub pad: FusionReport,
    /// `None` when PAD rejected the presentation and matching was not forced.
    pub recognition: Option<VerifyOutcome>,
}

impl FullOutcome {
    /// Live and matched.
    pub fn accepted(&self) -> bool {
        !self.pad.fused.decision.is_attack() && self.recognition.is_some_and(|r| r.matched)
    }

    /// Two lines: `pad <fusion line>` and `match <verify line>|skipped`.
    pub fn lines(&self) -> String {
        let m = self.recognition.map_or("skipped".to_string(), |r| r.line());
        format!("pad {}\nmatch {}\n", self.pad.line(), m)
    }
}

/// Inputs of [`run_full`].
#[derive(Debug, Clone, PartialEq)]
pub struct FullRequest {
    pub left: PathBuf,
    pub right: PathBuf,
    /// Boundaries of the left image; its mask also restricts the 3D stage.
    pub seg: SegSource,
    pub gallery: PathBuf,
    pub force_match: bool,
    pub eager: bool,
}

/// PAD cascade on the pair, then recognition on the left image when the
/// presentation is live (or always with `force_match`).
pub fn run_full(req: &FullRequest, cfg: &PipelineConfig) -> StageResult<FullOutcome> {
    cfg.validate()?;
    let left = read_image(&req.left)?;
    let right = read_image(&req.right)?;
    let gallery = load_template(&req.gallery).stage(Stage::Input)?;
    let bank = cfg.recognition_bank().stage(Stage::Encoding)?;
    let ensemble = cfg.ensemble().stage(Stage::Pad2d)?;
    let scales = cfg.scales().stage(Stage::Pad2d)?;
    let geom = cfg.geometry().stage(Stage::Pad3d)?;
    let seg = req.seg.segment(&left)?;
    let decide = if req.eager {
        ospad_fusion_decide_eager
    } else {
        ospad_fusion_decide
    };
    let pad = decide(&left, &right, &seg.mask, &geom, cfg.tau3, &ensemble, &scales, cfg.roi).stage(Stage::Fusion)?;
    let recognition = if req.force_match || !pad.fused.decision.is_attack() {
        let probe = template_from(&left, &seg, cfg, &bank)?;
        Some(compare(&probe, &gallery, cfg)?)
    } else {
        None
    };
    Ok(FullOutcome { pad, recognition })
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the pipeline can report.
///
/// Variant names are part of the CLI contract: `irispad` prints
/// `<stage>: <VariantName>` on stderr, see [`Error::name`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PGM payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("crop {w}x{h} larger than image {width}x{height}")]
    CropTooLarge {
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("kernel side {0} is even")]
    EvenKernel(usize),
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("no boundary found: {0}")]
    NoBoundaryFound(String),
    #[error("invalid search range: {0}")]
    SearchRangeInvalid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid circles: {0}")]
    InvalidCircles(String),
    #[error("malformed circle sidecar: {0}")]
    MalformedSidecar(String),

    #[error("mask coverage {coverage:.4} below minimum {minimum}")]
    EmptyMask { coverage: f64, minimum: f64 },

    #[error("malformed filter file: {0}")]
    MalformedFilterFile(String),
    #[error("filter kernel side {0} is even")]
    EvenKernelSide(usize),
    #[error("template shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("insufficient mask overlap: best shift has {best} jointly valid bits, need {required}")]
    InsufficientOverlap { best: usize, required: usize },
    #[error("malformed template file: {0}")]
    MalformedTemplateFile(String),

    #[error("too few valid pixels: {found} < {required}")]
    TooFewValidPixels { found: usize, required: usize },
    #[error("invalid illumination geometry: {0}")]
    InvalidGeometry(String),

    #[error("no filter bank available for scale {0}")]
    MissingFilterBank(String),
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("malformed model file: {0}")]
    MalformedModelFile(String),
    #[error("malformed feature file: {0}")]
    MalformedFeatureFile(String),

    #[error("degenerate distributions: {0}")]
    DegenerateDistributions(String),
    #[error("no threshold reaches FMR <= {0}")]
    UnreachableOperatingPoint(f64),
    #[error("empty class: {0}")]
    EmptyClass(String),
    #[error("malformed score file: {0}")]
    MalformedScoreFile(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
}

impl Error {
    /// Stable variant name, used in CLI diagnostics and the C error table.
    pub fn name(&self) -> &'static str {
        match self {
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::Io { .. } => "IoFailure",
            Error::CropTooLarge { .. } => "CropTooLarge",
            Error::EvenKernel(_) => "EvenKernel",
            Error::InvalidImage(_) => "InvalidImage",
            Error::NoBoundaryFound(_) => "NoBoundaryFound",
            Error::SearchRangeInvalid(_) => "SearchRangeInvalid",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidCircles(_) => "InvalidCircles",
            Error::MalformedSidecar(_) => "MalformedSidecar",
            Error::EmptyMask { .. } => "EmptyMask",
            Error::MalformedFilterFile(_) => "MalformedFilterFile",
            Error::EvenKernelSide(_) => "EvenKernelSide",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::InsufficientOverlap { .. } => "InsufficientOverlap",
            Error::MalformedTemplateFile(_) => "MalformedTemplateFile",
            Error::TooFewValidPixels { .. } => "TooFewValidPixels",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::MissingFilterBank(_) => "MissingFilterBank",
            Error::SingleClassTrainingSet => "SingleClassTrainingSet",
            Error::InvalidEnsemble(_) => "InvalidEnsemble",
            Error::MalformedModelFile(_) => "MalformedModelFile",
            Error::MalformedFeatureFile(_) => "MalformedFeatureFile",
            Error::DegenerateDistributions(_) => "DegenerateDistributions",
            Error::UnreachableOperatingPoint(_) => "UnreachableOperatingPoint",
            Error::EmptyClass(_) => "EmptyClass",
            Error::MalformedScoreFile(_) => "MalformedScoreFile",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Config(_) => "Config",
            Error::EmptyManifest => "EmptyManifest",
            Error::MalformedManifest(_) => "MalformedManifest",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

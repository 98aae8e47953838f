//! C ABI over `irispad`.
//!
//! Objects are opaque handles created by `irispad_*_read`/`_new` functions
//! and released with the matching `_free`. Every fallible call returns an
//! [`IrispadStatus`]; on failure [`irispad_last_error`] describes the most
//! recent error on the calling thread. Output pointers are written only on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use irispad::encoding::{defaults, encode, load_template, match_templates, save_template, IrisTemplate};
use irispad::fusion::ospad_fusion_decide;
use irispad::imaging::{read_pgm, BinaryMask, IrisImage};
use irispad::normalization::{normalize, DEFAULT_COLS, DEFAULT_ROWS};
use irispad::pad2d::{default_scales, load_ensemble, ospad2d_report, Ensemble, DEFAULT_ROI};
use irispad::pad3d::{ospad3d_decide, IlluminationGeometry};
use irispad::segmentation::{segment_circular, SegmentConfig};
use irispad::Error;

/// Result codes. Values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrispadStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Panic = 3,
    MalformedHeader = 10,
    TruncatedPayload = 11,
    IoFailure = 12,
    CropTooLarge = 13,
    EvenKernel = 14,
    InvalidImage = 15,
    NoBoundaryFound = 20,
    SearchRangeInvalid = 21,
    DimensionMismatch = 22,
    InvalidCircles = 23,
    MalformedSidecar = 24,
    EmptyMask = 30,
    MalformedFilterFile = 40,
    EvenKernelSide = 41,
    ShapeMismatch = 42,
    InsufficientOverlap = 43,
    MalformedTemplateFile = 44,
    TooFewValidPixels = 50,
    InvalidGeometry = 51,
    MissingFilterBank = 60,
    SingleClassTrainingSet = 61,
    InvalidEnsemble = 62,
    MalformedModelFile = 63,
    MalformedFeatureFile = 64,
    DegenerateDistributions = 70,
    UnreachableOperatingPoint = 71,
    EmptyClass = 72,
    MalformedScoreFile = 73,
    InvalidSpec = 80,
    Config = 90,
    EmptyManifest = 91,
    MalformedManifest = 92,
}

fn status_of(e: &Error) -> IrispadStatus {
    use IrispadStatus as S;
    match e {
        Error::MalformedHeader(_) => S::MalformedHeader,
        Error::TruncatedPayload { .. } => S::TruncatedPayload,
        Error::Io { .. } => S::IoFailure,
        Error::CropTooLarge { .. } => S::CropTooLarge,
        Error::EvenKernel(_) => S::EvenKernel,
        Error::InvalidImage(_) => S::InvalidImage,
        Error::NoBoundaryFound(_) => S::NoBoundaryFound,
        Error::SearchRangeInvalid(_) => S::SearchRangeInvalid,
        Error::DimensionMismatch(_) => S::DimensionMismatch,
        Error::InvalidCircles(_) => S::InvalidCircles,
        Error::MalformedSidecar(_) => S::MalformedSidecar,
        Error::EmptyMask { .. } => S::EmptyMask,
        Error::MalformedFilterFile(_) => S::MalformedFilterFile,
        Error::EvenKernelSide(_) => S::EvenKernelSide,
        Error::ShapeMismatch(_) => S::ShapeMismatch,
        Error::InsufficientOverlap { .. } => S::InsufficientOverlap,
        Error::MalformedTemplateFile(_) => S::MalformedTemplateFile,
        Error::TooFewValidPixels { .. } => S::TooFewValidPixels,
        Error::InvalidGeometry(_) => S::InvalidGeometry,
        Error::MissingFilterBank(_) => S::MissingFilterBank,
        Error::SingleClassTrainingSet => S::SingleClassTrainingSet,
        Error::InvalidEnsemble(_) => S::InvalidEnsemble,
        Error::MalformedModelFile(_) => S::MalformedModelFile,
        Error::MalformedFeatureFile(_) => S::MalformedFeatureFile,
        Error::DegenerateDistributions(_) => S::DegenerateDistributions,
        Error::UnreachableOperatingPoint(_) => S::UnreachableOperatingPoint,
        Error::EmptyClass(_) => S::EmptyClass,
        Error::MalformedScoreFile(_) => S::MalformedScoreFile,
        Error::InvalidSpec(_) => S::InvalidSpec,
        Error::Config(_) => S::Config,
        Error::EmptyManifest => S::EmptyManifest,
        Error::MalformedManifest(_) => S::MalformedManifest,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null,
    Utf8,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IrispadStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IrispadStatus::Ok,
        Ok(Err(Failure::Null)) => {
            set_last_error("null argument".into());
            IrispadStatus::NullArgument
        }
        Ok(Err(Failure::Utf8)) => {
            set_last_error("path is not valid UTF-8".into());
            IrispadStatus::InvalidUtf8
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(format!("{}: {e}", e.name()));
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            IrispadStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure::Utf8)
}

unsafe fn obj<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null)
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null);
    }
    out.write(value);
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    put(out, Box::into_raw(Box::new(value)))
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// 8-bit grayscale image.
pub struct IrispadImage(IrisImage);

/// Iris template (bit-planes plus validity mask).
pub struct IrispadTemplate(IrisTemplate);

/// Texture PAD classifier ensemble.
pub struct IrispadEnsemble(Ensemble);

/// A PAD verdict: `score >= threshold` exactly when `is_attack` is set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrispadPadResult {
    pub score: f64,
    pub threshold: f64,
    pub is_attack: bool,
}

/// Description of the last error on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn irispad_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code, e.g. `"MalformedFilterFile"`.
#[no_mangle]
pub extern "C" fn irispad_status_name(status: IrispadStatus) -> *const c_char {
    let name: &'static CStr = match status {
        IrispadStatus::Ok => c"Ok",
        IrispadStatus::NullArgument => c"NullArgument",
        IrispadStatus::InvalidUtf8 => c"InvalidUtf8",
        IrispadStatus::Panic => c"Panic",
        IrispadStatus::MalformedHeader => c"MalformedHeader",
        IrispadStatus::TruncatedPayload => c"TruncatedPayload",
        IrispadStatus::IoFailure => c"IoFailure",
        IrispadStatus::CropTooLarge => c"CropTooLarge",
        IrispadStatus::EvenKernel => c"EvenKernel",
        IrispadStatus::InvalidImage => c"InvalidImage",
        IrispadStatus::NoBoundaryFound => c"NoBoundaryFound",
        IrispadStatus::SearchRangeInvalid => c"SearchRangeInvalid",
        IrispadStatus::DimensionMismatch => c"DimensionMismatch",
        IrispadStatus::InvalidCircles => c"InvalidCircles",
        IrispadStatus::MalformedSidecar => c"MalformedSidecar",
        IrispadStatus::EmptyMask => c"EmptyMask",
        IrispadStatus::MalformedFilterFile => c"MalformedFilterFile",
        IrispadStatus::EvenKernelSide => c"EvenKernelSide",
        IrispadStatus::ShapeMismatch => c"ShapeMismatch",
        IrispadStatus::InsufficientOverlap => c"InsufficientOverlap",
        IrispadStatus::MalformedTemplateFile => c"MalformedTemplateFile",
        IrispadStatus::TooFewValidPixels => c"TooFewValidPixels",
        IrispadStatus::InvalidGeometry => c"InvalidGeometry",
        IrispadStatus::MissingFilterBank => c"MissingFilterBank",
        IrispadStatus::SingleClassTrainingSet => c"SingleClassTrainingSet",
        IrispadStatus::InvalidEnsemble => c"InvalidEnsemble",
        IrispadStatus::MalformedModelFile => c"MalformedModelFile",
        IrispadStatus::MalformedFeatureFile => c"MalformedFeatureFile",
        IrispadStatus::DegenerateDistributions => c"DegenerateDistributions",
        IrispadStatus::UnreachableOperatingPoint => c"UnreachableOperatingPoint",
        IrispadStatus::EmptyClass => c"EmptyClass",
        IrispadStatus::MalformedScoreFile => c"MalformedScoreFile",
        IrispadStatus::InvalidSpec => c"InvalidSpec",
        IrispadStatus::Config => c"Config",
        IrispadStatus::EmptyManifest => c"EmptyManifest",
        IrispadStatus::MalformedManifest => c"MalformedManifest",
    };
    name.as_ptr()
}

/// Reads a binary PGM (P5, maxval 255).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irispad_image_read(path: *const c_char, out: *mut *mut IrispadImage) -> IrispadStatus {
    guard(|| {
        let img = read_pgm(path_arg(path)?)?;
        put_handle(out, IrispadImage(img))
    })
}

/// Copies `width * height` row-major bytes into a new image.
///
/// # Safety
/// `pixels` must point to `width * height` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn irispad_image_new(
    width: usize,
    height: usize,
    pixels: *const u8,
    out: *mut *mut IrispadImage,
) -> IrispadStatus {
    guard(|| {
        if pixels.is_null() {
            return Err(Failure::Null);
        }
        let n = width.checked_mul(height).ok_or_else(|| Error::InvalidImage("size overflow".into()))?;
        let data = std::slice::from_raw_parts(pixels, n).to_vec();
        put_handle(out, IrispadImage(IrisImage::new(width, height, data)?))
    })
}

/// # Safety
/// `img` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn irispad_image_width(img: *const IrispadImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// # Safety
/// `img` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn irispad_image_height(img: *const IrispadImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// # Safety
/// `img` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn irispad_image_free(img: *mut IrispadImage) {
    free_handle(img)
}

/// Segments, normalizes (64 x 512) and encodes with the shipped 8-filter
/// recognition bank.
///
/// # Safety
/// `img` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irispad_template_enroll(
    img: *const IrispadImage,
    out: *mut *mut IrispadTemplate,
) -> IrispadStatus {
    guard(|| {
        let img = &obj(img)?.0;
        let seg = segment_circular(img, &SegmentConfig::default())?;
        let norm = normalize(img, &seg, DEFAULT_ROWS, DEFAULT_COLS)?;
        let t = encode(&norm, &defaults::recognition())?;
        put_handle(out, IrispadTemplate(t))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irispad_template_read(path: *const c_char, out: *mut *mut IrispadTemplate) -> IrispadStatus {
    guard(|| {
        let t = load_template(path_arg(path)?)?;
        put_handle(out, IrispadTemplate(t))
    })
}

/// # Safety
/// `t` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn irispad_template_write(t: *const IrispadTemplate, path: *const c_char) -> IrispadStatus {
    guard(|| {
        save_template(&obj(t)?.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Fractional Hamming distance minimized over `max_shift` column shifts.
///
/// # Safety
/// Handles must be live; `score` and `shift` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn irispad_template_match(
    a: *const IrispadTemplate,
    b: *const IrispadTemplate,
    max_shift: usize,
    score: *mut f64,
    shift: *mut isize,
) -> IrispadStatus {
    guard(|| {
        let m = match_templates(&obj(a)?.0, &obj(b)?.0, max_shift)?;
        put(score, m.score)?;
        put(shift, m.best_shift)
    })
}

/// # Safety
/// `t` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn irispad_template_free(t: *mut IrispadTemplate) {
    free_handle(t)
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irispad_ensemble_read(path: *const c_char, out: *mut *mut IrispadEnsemble) -> IrispadStatus {
    guard(|| {
        let e = load_ensemble(path_arg(path)?)?;
        put_handle(out, IrispadEnsemble(e))
    })
}

/// # Safety
/// `e` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn irispad_ensemble_free(e: *mut IrispadEnsemble) {
    free_handle(e)
}

fn iris_mask(left: &IrisImage) -> Result<BinaryMask, Failure> {
    Ok(segment_circular(left, &SegmentConfig::default())?.mask)
}

/// Photometric-stereo PAD. The iris region is found by segmenting `left`;
/// lights sit at `theta_deg` either side of the optical axis.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irispad_pad3d(
    left: *const IrispadImage,
    right: *const IrispadImage,
    theta_deg: f64,
    tau3: f64,
    out: *mut IrispadPadResult,
) -> IrispadStatus {
    guard(|| {
        let (l, r) = (&obj(left)?.0, &obj(right)?.0);
        let geom = IlluminationGeometry::symmetric(theta_deg)?;
        let o = ospad3d_decide(l, r, &iris_mask(l)?, &geom, tau3)?;
        put(
            out,
            IrispadPadResult {
                score: o.score,
                threshold: o.threshold,
                is_attack: o.decision.is_attack(),
            },
        )
    })
}

/// Texture PAD over the shipped scales and a 300 x 300 central crop.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irispad_pad2d(
    img: *const IrispadImage,
    ensemble: *const IrispadEnsemble,
    out: *mut IrispadPadResult,
) -> IrispadStatus {
    guard(|| {
        let r = ospad2d_report(&obj(img)?.0, &obj(ensemble)?.0, &default_scales(), DEFAULT_ROI)?;
        put(
            out,
            IrispadPadResult {
                score: r.outcome.score,
                threshold: r.outcome.threshold,
                is_attack: r.outcome.decision.is_attack(),
            },
        )
    })
}

/// Cascaded PAD: 3D first, 2D only when 3D says live.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irispad_pad_fused(
    left: *const IrispadImage,
    right: *const IrispadImage,
    ensemble: *const IrispadEnsemble,
    theta_deg: f64,
    tau3: f64,
    out: *mut IrispadPadResult,
) -> IrispadStatus {
    guard(|| {
        let (l, r) = (&obj(left)?.0, &obj(right)?.0);
        let geom = IlluminationGeometry::symmetric(theta_deg)?;
        let rep = ospad_fusion_decide(
            l,
            r,
            &iris_mask(l)?,
            &geom,
            tau3,
            &obj(ensemble)?.0,
            &default_scales(),
            DEFAULT_ROI,
        )?;
        put(
            out,
            IrispadPadResult {
                score: rep.fused.score,
                threshold: rep.fused.threshold,
                is_attack: rep.fused.decision.is_attack(),
            },
        )
    })
}

/// Library version, e.g. `"0.1.0"`.
#[no_mangle]
pub extern "C" fn irispad_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

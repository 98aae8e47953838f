//! Photometric-stereo presentation attack detection.
//!
//! Two images of the eye, each lit by one of two LEDs, give two Lambertian
//! equations per pixel for the albedo-scaled normal `m`:
//! `l_left . m = I_L` and `l_right . m = I_R`. The system is
//! underdetermined; we take the minimum-norm solution
//! `m = L^T (L L^T)^-1 I`, which zeroes the component of `m` along
//! `l_left x l_right`. Authentic irises reconstruct as nearly flat
//! surfaces, textured lenses as irregular ones; the attack score is the
//! population variance of the normals' distances to their mean.

use std::fmt;

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, IrisImage};

pub const DEFAULT_HALF_ANGLE_DEG: f64 = 20.0;
pub const MIN_MASK_COVERAGE: f64 = 0.05;
pub const MIN_VALID_PIXELS: usize = 100;
/// Score threshold separating smooth (live) from irregular surfaces on the
/// bundled synthetic renderings: a dome scores about 0.0026, a bumpy shell
/// about 0.02.
pub const DEFAULT_TAU3: f64 = 0.007;
const MIN_NORM: f64 = 1e-9;

pub type Vec3 = [f64; 3];

#[inline]
fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Light directions pointing from the surface toward each LED. The camera
/// looks along -z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminationGeometry {
    pub left: Vec3,
    pub right: Vec3,
}

impl IlluminationGeometry {
    pub fn new(left: Vec3, right: Vec3) -> Result<Self> {
        for (name, l) in [("left", &left), ("right", &right)] {
            if (norm(l) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidGeometry(format!("{name} light is not unit length")));
            }
            if l[2] <= 0.0 {
                return Err(Error::InvalidGeometry(format!("{name} light does not face the eye")));
            }
        }
        if left == right {
            return Err(Error::InvalidGeometry("lights coincide".into()));
        }
        Ok(Self { left, right })
    }

    /// LEDs on both sides of the lens, tilted `degrees` from the optical axis.
    pub fn symmetric(degrees: f64) -> Result<Self> {
        if !(degrees > 0.0 && degrees < 90.0) {
            return Err(Error::InvalidGeometry(format!("half-angle {degrees} outside (0, 90)")));
        }
        let t = degrees.to_radians();
        Self::new([-t.sin(), 0.0, t.cos()], [t.sin(), 0.0, t.cos()])
    }

    /// Geometry seen in horizontally mirrored images.
    pub fn mirrored(&self) -> Self {
        Self {
            left: [-self.left[0], self.left[1], self.left[2]],
            right: [-self.right[0], self.right[1], self.right[2]],
        }
    }

    /// Minimum-norm solution of the two-light system.
    #[inline]
    pub fn solve(&self, i_left: f64, i_right: f64) -> Vec3 {
        let (a, b) = (&self.left, &self.right);
        // Gram matrix G = L L^T and y = G^-1 I.
        let g11 = dot(a, a);
        let g12 = dot(a, b);
        let g22 = dot(b, b);
        let det = g11 * g22 - g12 * g12;
        let y1 = (g22 * i_left - g12 * i_right) / det;
        let y2 = (g11 * i_right - g12 * i_left) / det;
        [
            y1 * a[0] + y2 * b[0],
            y1 * a[1] + y2 * b[1],
            y1 * a[2] + y2 * b[2],
        ]
    }
}

impl Default for IlluminationGeometry {
    fn default() -> Self {
        Self::symmetric(DEFAULT_HALF_ANGLE_DEG).expect("default geometry is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub width: usize,
    pub height: usize,
    pub normals: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl NormalField {
    pub fn valid_normals(&self) -> impl Iterator<Item = &Vec3> {
        self.normals.iter().zip(&self.valid).filter(|(_, v)| **v).map(|(n, _)| n)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

pub fn estimate_normals(left: &IrisImage, right: &IrisImage, mask: &BinaryMask, geom: &IlluminationGeometry) -> Result<NormalField> {
    let (w, h) = (left.width(), left.height());
    if right.width() != w || right.height() != h || mask.width() != w || mask.height() != h {
        return Err(Error::DimensionMismatch(format!(
            "left {w}x{h}, right {}x{}, mask {}x{}",
            right.width(),
            right.height(),
            mask.width(),
            mask.height()
        )));
    }
    let coverage = mask.coverage();
    if coverage < MIN_MASK_COVERAGE {
        return Err(Error::EmptyMask {
            coverage,
            minimum: MIN_MASK_COVERAGE,
        });
    }
    let mut normals = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for ((&il, &ir), &m) in left.pixels().iter().zip(right.pixels()).zip(mask.bits()) {
        if !m {
            normals.push([0.0; 3]);
            valid.push(false);
            continue;
        }
        let v = geom.solve(il as f64, ir as f64);
        let len = norm(&v);
        if len < MIN_NORM {
            normals.push([0.0; 3]);
            valid.push(false);
        } else {
            normals.push([v[0] / len, v[1] / len, v[2] / len]);
            valid.push(true);
        }
    }
    Ok(NormalField {
        width: w,
        height: h,
        normals,
        valid,
    })
}

/// Population variance of `|n_p - mean|` over valid normals, with the mean
/// normal left unnormalized.
pub fn ospad3d_score(field: &NormalField) -> Result<f64> {
    let count = field.valid_count();
    if count < MIN_VALID_PIXELS {
        return Err(Error::TooFewValidPixels {
            found: count,
            required: MIN_VALID_PIXELS,
        });
    }
    // shifted by the first normal so identical normals average exactly
    let origin = *field.valid_normals().next().expect("count > 0");
    let mut acc = [0.0; 3];
    for n in field.valid_normals() {
        for k in 0..3 {
            acc[k] += n[k] - origin[k];
        }
    }
    let mean: Vec3 = std::array::from_fn(|k| origin[k] + acc[k] / count as f64);
    let distances: Vec<f64> = field
        .valid_normals()
        .map(|n| norm(&[n[0] - mean[0], n[1] - mean[1], n[2] - mean[2]]))
        .collect();
    let mu = distances.iter().sum::<f64>() / count as f64;
    let var = distances.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / count as f64;
    Ok(var.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Live,
    Attack,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Live => "live",
            Decision::Attack => "attack",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "live" | "bonafide" | "bona-fide" => Some(Decision::Live),
            "attack" | "spoof" | "fake" => Some(Decision::Attack),
            _ => None,
        }
    }

    pub fn is_attack(self) -> bool {
        self == Decision::Attack
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadSource {
    Pad3d,
    Pad2d,
    Fusion,
}

impl PadSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PadSource::Pad3d => "pad3d",
            PadSource::Pad2d => "pad2d",
            PadSource::Fusion => "fusion",
        }
    }
}

/// A PAD verdict. `decision` is `Attack` exactly when `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadOutcome {
    pub score: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub source: PadSource,
}

impl PadOutcome {
    pub fn from_score(score: f64, threshold: f64, source: PadSource) -> Self {
        let decision = if score >= threshold {
            Decision::Attack
        } else {
            Decision::Live
        };
        Self {
            score,
            threshold,
            decision,
            source,
        }
    }
}

pub fn ospad3d_decide(
    left: &IrisImage,
    right: &IrisImage,
    mask: &BinaryMask,
    geom: &IlluminationGeometry,
    tau3: f64,
) -> Result<PadOutcome> {
    let field = estimate_normals(left, right, mask, geom)?;
    let score = ospad3d_score(&field)?;
    Ok(PadOutcome::from_score(score, tau3, PadSource::Pad3d))
}

/// Threshold at the equal-error point of labeled calibration scores
/// (attack = higher). Returns the midpoint between the two scores that
/// bracket the crossing.
pub fn calibrate_threshold(bona_fide: &[f64], attack: &[f64]) -> Result<f64> {
    if bona_fide.is_empty() || attack.is_empty() {
        return Err(Error::EmptyClass("calibration needs both classes".into()));
    }
    let mut candidates: Vec<f64> = bona_fide.iter().chain(attack).copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // Threshold t: attack iff score >= t.
    let mut best = (f64::INFINITY, candidates[0]);
    let mut midpoints = vec![candidates[0]];
    midpoints.extend(candidates.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    midpoints.push(candidates[candidates.len() - 1] + 1e-9);
    for t in midpoints {
        let apcer = attack.iter().filter(|&&s| s < t).count() as f64 / attack.len() as f64;
        let bpcer = bona_fide.iter().filter(|&&s| s >= t).count() as f64 / bona_fide.len() as f64;
        let gap = (apcer - bpcer).abs() + 1e-12 * (apcer + bpcer);
        if gap < best.0 {
            best = (gap, t);
        }
    }
    Ok(best.1)
}

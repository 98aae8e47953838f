//! Pupil and iris boundary localization.
//!
//! The built-in segmenter is a classical integro-differential circle search:
//! for every candidate center the mean intensity along circles of growing
//! radius is sampled, its radial derivative is Gaussian-smoothed and the
//! strongest dark-to-bright transition wins. The pupil is searched over full
//! circles; the iris boundary only over the left and right 90-degree sectors
//! because eyelids corrupt the top and bottom of the limbus.
//!
//! Masks produced by other segmenters enter through [`ingest_mask`].

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{read_mask, BinaryMask, IrisImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, r }
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy <= self.r * self.r
    }

    pub fn center_distance(&self, other: &Circle) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub pupil: Circle,
    pub iris: Circle,
    pub mask: BinaryMask,
}

impl SegmentationResult {
    /// Builds a result, enforcing that the mask never leaves the annulus.
    pub fn new(pupil: Circle, iris: Circle, mask: &BinaryMask) -> Result<Self> {
        validate_circles(&pupil, &iris, mask.width(), mask.height())?;
        let annulus = annulus_mask(mask.width(), mask.height(), &pupil, &iris);
        let bits = mask
            .bits()
            .iter()
            .zip(annulus.bits())
            .map(|(&m, &a)| m && a)
            .collect();
        Ok(Self {
            pupil,
            iris,
            mask: BinaryMask::new(mask.width(), mask.height(), bits)?,
        })
    }
}

/// Checks radius positivity, centers in bounds and strict pupil-in-iris
/// containment.
pub fn validate_circles(pupil: &Circle, iris: &Circle, width: usize, height: usize) -> Result<()> {
    for (name, c) in [("pupil", pupil), ("iris", iris)] {
        if !(c.r > 0.0) || !c.r.is_finite() {
            return Err(Error::InvalidCircles(format!("{name} radius {} not positive", c.r)));
        }
        if !(c.cx >= 0.0 && c.cy >= 0.0 && c.cx <= (width - 1) as f64 && c.cy <= (height - 1) as f64) {
            return Err(Error::InvalidCircles(format!(
                "{name} center ({}, {}) outside {width}x{height}",
                c.cx, c.cy
            )));
        }
    }
    if pupil.center_distance(iris) + pupil.r >= iris.r {
        return Err(Error::InvalidCircles(format!(
            "pupil ({}, {}, {}) not strictly inside iris ({}, {}, {})",
            pupil.cx, pupil.cy, pupil.r, iris.cx, iris.cy, iris.r
        )));
    }
    Ok(())
}

/// Pixels whose centers lie inside the iris circle and outside the pupil
/// circle.
pub fn annulus_mask(width: usize, height: usize, pupil: &Circle, iris: &Circle) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        iris.contains(fx, fy) && !pupil.contains(fx, fy)
    })
}

/// Search ranges and tuning for [`segment_circular`].
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    pub pupil_radius: (usize, usize),
    pub iris_radius: (usize, usize),
    /// Center of the pupil search window; image center when `None`.
    pub search_center: Option<(usize, usize)>,
    /// Half-size of the square pupil-center search window.
    pub center_window: usize,
    /// Maximum iris-center offset from the pupil center, per axis.
    pub iris_center_offset: usize,
    pub coarse_stride: usize,
    pub refine_radius: usize,
    pub blur_sigma: f64,
    /// Minimum smoothed derivative accepted as a boundary.
    pub contrast_floor: f64,
    /// Pixels brighter than this are treated as specular highlights.
    pub specular_threshold: u8,
    pub samples_per_circle: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            pupil_radius: (20, 75),
            iris_radius: (80, 170),
            search_center: None,
            center_window: 48,
            iris_center_offset: 10,
            coarse_stride: 4,
            refine_radius: 4,
            blur_sigma: 2.0,
            contrast_floor: 2.0,
            specular_threshold: 250,
            samples_per_circle: 128,
        }
    }
}

impl SegmentConfig {
    fn validate(&self, img: &IrisImage) -> Result<()> {
        let (pl, ph) = self.pupil_radius;
        let (il, ih) = self.iris_radius;
        if pl == 0 || pl > ph || il == 0 || il > ih {
            return Err(Error::SearchRangeInvalid(format!(
                "radius ranges pupil {pl}..={ph}, iris {il}..={ih}"
            )));
        }
        if ph >= ih {
            return Err(Error::SearchRangeInvalid(format!(
                "pupil max radius {ph} must be below iris max radius {ih}"
            )));
        }
        if 2 * ih > img.width().min(img.height()) {
            return Err(Error::SearchRangeInvalid(format!(
                "image {}x{} smaller than twice the max iris radius {ih}",
                img.width(),
                img.height()
            )));
        }
        if self.coarse_stride == 0 || self.samples_per_circle < 8 || !(self.blur_sigma > 0.0) {
            return Err(Error::SearchRangeInvalid("degenerate search tuning".into()));
        }
        if let Some((x, y)) = self.search_center {
            if x >= img.width() || y >= img.height() {
                return Err(Error::SearchRangeInvalid(format!(
                    "search center ({x}, {y}) outside the image"
                )));
            }
        }
        Ok(())
    }
}

/// Best boundary at one center. Ordered so that `max` picks the strongest
/// contrast, ties going to the smallest `(r, cy, cx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    strength: f64,
    r: usize,
    cx: usize,
    cy: usize,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        match self.strength.partial_cmp(&other.strength).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => (self.r, self.cy, self.cx) < (other.r, other.cy, other.cx),
        }
    }

    fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.better_than(&a) { b } else { a }),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

struct CircleSearch<'a> {
    img: &'a IrisImage,
    /// Unit direction vectors of the sampled arc.
    directions: Vec<(f64, f64)>,
    gauss: Vec<f64>,
    r_min: usize,
    r_max: usize,
}

impl<'a> CircleSearch<'a> {
    fn new(img: &'a IrisImage, cfg: &SegmentConfig, sectors: &[(f64, f64)], r_min: usize, r_max: usize) -> Self {
        let total_span: f64 = sectors.iter().map(|(a, b)| b - a).sum();
        let mut directions = Vec::with_capacity(cfg.samples_per_circle);
        for &(start, end) in sectors {
            let n = ((cfg.samples_per_circle as f64) * (end - start) / total_span).round() as usize;
            for k in 0..n {
                let theta = start + (end - start) * (k as f64 + 0.5) / n as f64;
                directions.push((theta.cos(), theta.sin()));
            }
        }
        let half = (3.0 * cfg.blur_sigma).ceil() as isize;
        let mut gauss: Vec<f64> = (-half..=half)
            .map(|k| (-(k * k) as f64 / (2.0 * cfg.blur_sigma * cfg.blur_sigma)).exp())
            .collect();
        let total: f64 = gauss.iter().sum();
        gauss.iter_mut().for_each(|g| *g /= total);
        Self {
            img,
            directions,
            gauss,
            r_min,
            r_max,
        }
    }

    fn blur_half(&self) -> usize {
        self.gauss.len() / 2
    }

    fn mean_on_circle(&self, cx: f64, cy: f64, r: f64) -> f64 {
        let sum: f64 = self
            .directions
            .iter()
            .map(|&(c, s)| self.img.sample_bilinear(cx + r * c, cy + r * s))
            .sum();
        sum / self.directions.len() as f64
    }

    /// Strongest smoothed outward brightening over the radius range at
    /// integer center `(cx, cy)`.
    fn evaluate(&self, cx: usize, cy: usize) -> Option<Candidate> {
        let half = self.blur_half();
        // Profile indices cover [lo, hi]; derivative needs one more on each side.
        let lo = self.r_min.saturating_sub(half + 1).max(1);
        let hi = self.r_max + half + 1;
        let profile: Vec<f64> = (lo..=hi)
            .map(|r| self.mean_on_circle(cx as f64, cy as f64, r as f64))
            .collect();
        let deriv = |r: usize| -> f64 {
            if r <= lo || r >= hi {
                return 0.0;
            }
            (profile[r + 1 - lo] - profile[r - 1 - lo]) * 0.5
        };
        let mut best: Option<Candidate> = None;
        for r in self.r_min..=self.r_max {
            let mut v = 0.0;
            for (k, g) in self.gauss.iter().enumerate() {
                let rr = r as isize + k as isize - half as isize;
                if rr > 0 {
                    v += g * deriv(rr as usize);
                }
            }
            let cand = Candidate {
                strength: v,
                r,
                cx,
                cy,
            };
            best = Candidate::pick(best, Some(cand));
        }
        best
    }

    /// Coarse grid over the window, then a stride-1 refinement around the
    /// coarse winner. Centers are clipped to `bounds` (inclusive).
    fn search(&self, center: (usize, usize), window: usize, cfg: &SegmentConfig, bounds: (usize, usize, usize, usize)) -> Option<Candidate> {
        let (xmin, ymin, xmax, ymax) = bounds;
        let stride = cfg.coarse_stride;
        let mut coarse = Vec::new();
        let steps = window / stride;
        for j in -(steps as isize)..=steps as isize {
            for i in -(steps as isize)..=steps as isize {
                let x = center.0 as isize + i * stride as isize;
                let y = center.1 as isize + j * stride as isize;
                if x >= xmin as isize && x <= xmax as isize && y >= ymin as isize && y <= ymax as isize {
                    coarse.push((x as usize, y as usize));
                }
            }
        }
        let best = self.best_of(&coarse)?;
        let rr = cfg.refine_radius as isize;
        let mut fine = Vec::new();
        for dy in -rr..=rr {
            for dx in -rr..=rr {
                let x = best.cx as isize + dx;
                let y = best.cy as isize + dy;
                if x >= xmin as isize && x <= xmax as isize && y >= ymin as isize && y <= ymax as isize {
                    fine.push((x as usize, y as usize));
                }
            }
        }
        Candidate::pick(Some(best), self.best_of(&fine))
    }

    fn best_of(&self, centers: &[(usize, usize)]) -> Option<Candidate> {
        centers
            .par_iter()
            .map(|&(x, y)| self.evaluate(x, y))
            .reduce(|| None, Candidate::pick)
    }
}

/// Integro-differential segmentation of pupil and iris circles.
pub fn segment_circular(img: &IrisImage, cfg: &SegmentConfig) -> Result<SegmentationResult> {
    cfg.validate(img)?;
    let (w, h) = (img.width(), img.height());
    let center = cfg.search_center.unwrap_or((w / 2, h / 2));
    let all_bounds = (0, 0, w - 1, h - 1);

    let full_circle = [(0.0, 2.0 * PI)];
    let pupil_search = CircleSearch::new(img, cfg, &full_circle, cfg.pupil_radius.0, cfg.pupil_radius.1);
    let pupil = pupil_search
        .search(center, cfg.center_window, cfg, all_bounds)
        .ok_or_else(|| Error::NoBoundaryFound("empty pupil search grid".into()))?;
    if pupil.strength < cfg.contrast_floor {
        return Err(Error::NoBoundaryFound(format!(
            "pupil contrast {:.3} below floor {}",
            pupil.strength, cfg.contrast_floor
        )));
    }

    let sectors = [(-PI / 4.0, PI / 4.0), (3.0 * PI / 4.0, 5.0 * PI / 4.0)];
    let off = cfg.iris_center_offset;
    let iris_min = cfg.iris_radius.0.max(pupil.r + off + 2);
    if iris_min > cfg.iris_radius.1 {
        return Err(Error::NoBoundaryFound(format!(
            "pupil radius {} leaves no room for the iris range",
            pupil.r
        )));
    }
    let iris_search = CircleSearch::new(img, cfg, &sectors, iris_min, cfg.iris_radius.1);
    let bounds = (
        pupil.cx.saturating_sub(off),
        pupil.cy.saturating_sub(off),
        (pupil.cx + off).min(w - 1),
        (pupil.cy + off).min(h - 1),
    );
    let iris = iris_search
        .search((pupil.cx, pupil.cy), off, cfg, bounds)
        .ok_or_else(|| Error::NoBoundaryFound("empty iris search grid".into()))?;
    if iris.strength < cfg.contrast_floor {
        return Err(Error::NoBoundaryFound(format!(
            "iris contrast {:.3} below floor {}",
            iris.strength, cfg.contrast_floor
        )));
    }

    let pupil_c = Circle::new(pupil.cx as f64, pupil.cy as f64, pupil.r as f64);
    let iris_c = Circle::new(iris.cx as f64, iris.cy as f64, iris.r as f64);
    validate_circles(&pupil_c, &iris_c, w, h).map_err(|e| Error::NoBoundaryFound(e.to_string()))?;
    let mut mask = annulus_mask(w, h, &pupil_c, &iris_c);
    remove_specular(&mut mask, img, cfg.specular_threshold);
    SegmentationResult::new(pupil_c, iris_c, &mask)
}

fn remove_specular(mask: &mut BinaryMask, img: &IrisImage, threshold: u8) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) > threshold {
                mask.set(x, y, false);
            }
        }
    }
}

/// Adopts a mask from an external segmenter. The mask is intersected with
/// the annulus so the result always satisfies the segmentation invariants.
pub fn ingest_mask_image(img: &IrisImage, mask: &BinaryMask, pupil: Circle, iris: Circle) -> Result<SegmentationResult> {
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs image {}x{}",
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    SegmentationResult::new(pupil, iris, mask)
}

/// [`ingest_mask_image`] reading the mask PGM (binarized at 128) from disk.
pub fn ingest_mask(img: &IrisImage, mask_path: impl AsRef<Path>, pupil: Circle, iris: Circle) -> Result<SegmentationResult> {
    let mask = read_mask(mask_path)?;
    ingest_mask_image(img, &mask, pupil, iris)
}

/// Sidecar text: `px py pr ix iy ir`, whitespace separated.
pub fn format_circles(pupil: &Circle, iris: &Circle) -> String {
    format!(
        "{} {} {} {} {} {}\n",
        pupil.cx, pupil.cy, pupil.r, iris.cx, iris.cy, iris.r
    )
}

pub fn parse_circles(text: &str) -> Result<(Circle, Circle)> {
    let values = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::MalformedSidecar(format!("{t:?} is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != 6 {
        return Err(Error::MalformedSidecar(format!(
            "expected 6 numbers, found {}",
            values.len()
        )));
    }
    Ok((
        Circle::new(values[0], values[1], values[2]),
        Circle::new(values[3], values[4], values[5]),
    ))
}

pub fn read_circles(path: impl AsRef<Path>) -> Result<(Circle, Circle)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_circles(&text)
}

pub fn write_circles(pupil: &Circle, iris: &Circle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_circles(pupil, iris)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tone(w: usize, h: usize, cx: f64, cy: f64, r1: f64, r2: f64) -> IrisImage {
        IrisImage::from_fn(w, h, |x, y| {
            let d = (x as f64 - cx).hypot(y as f64 - cy);
            if d <= r1 {
                20
            } else if d <= r2 {
                120
            } else {
                220
            }
        })
        .unwrap()
    }

    fn two_tone_cfg() -> SegmentConfig {
        SegmentConfig {
            pupil_radius: (15, 60),
            iris_radius: (62, 110),
            ..SegmentConfig::default()
        }
    }

    /// Independent oracle: mean intensity of pixels in thin rings, the step
    /// is where consecutive ring means change the most.
    fn ring_step_oracle(img: &IrisImage, cx: f64, cy: f64, rmin: usize, rmax: usize) -> usize {
        let mut sums = vec![(0.0, 0usize); rmax + 3];
        for y in 0..img.height() {
            for x in 0..img.width() {
                let d = (x as f64 - cx).hypot(y as f64 - cy);
                let k = d.round() as usize;
                if k < sums.len() {
                    sums[k].0 += img.get(x, y) as f64;
                    sums[k].1 += 1;
                }
            }
        }
        let mean = |k: usize| sums[k].0 / sums[k].1 as f64;
        (rmin..=rmax)
            .max_by(|&a, &b| {
                (mean(a + 1) - mean(a))
                    .partial_cmp(&(mean(b + 1) - mean(b)))
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap()
    }

    #[test]
    fn two_tone_disks_recovered() {
        let img = two_tone(240, 240, 120.0, 120.0, 30.0, 80.0);
        let seg = segment_circular(&img, &two_tone_cfg()).unwrap();
        let pupil_oracle = ring_step_oracle(&img, 120.0, 120.0, 15, 60);
        let iris_oracle = ring_step_oracle(&img, 120.0, 120.0, 62, 110);
        assert!((pupil_oracle as f64 - 30.0).abs() <= 1.0);
        assert!((iris_oracle as f64 - 80.0).abs() <= 1.0);
        assert!((seg.pupil.r - 30.0).abs() <= 1.0, "{:?}", seg.pupil);
        assert!((seg.iris.r - 80.0).abs() <= 1.0, "{:?}", seg.iris);
        assert!((seg.pupil.cx - 120.0).abs() <= 1.0 && (seg.pupil.cy - 120.0).abs() <= 1.0);
    }

    #[test]
    fn uniform_image_has_no_boundary() {
        let img = IrisImage::filled(240, 240, 128).unwrap();
        let err = segment_circular(&img, &two_tone_cfg()).unwrap_err();
        assert_eq!(err.name(), "NoBoundaryFound");
    }

    #[test]
    fn invalid_ranges_rejected() {
        let img = IrisImage::filled(100, 100, 128).unwrap();
        let cfg = SegmentConfig {
            pupil_radius: (30, 20),
            ..two_tone_cfg()
        };
        assert_eq!(segment_circular(&img, &cfg).unwrap_err().name(), "SearchRangeInvalid");
        // image too small for the iris range
        assert_eq!(segment_circular(&img, &two_tone_cfg()).unwrap_err().name(), "SearchRangeInvalid");
    }

    #[test]
    fn mask_stays_in_annulus_and_skips_glints() {
        let mut img = two_tone(240, 240, 120.0, 120.0, 30.0, 80.0);
        for y in 60..64 {
            for x in 118..122 {
                img.set(x, y, 255);
            }
        }
        let seg = segment_circular(&img, &two_tone_cfg()).unwrap();
        let annulus = annulus_mask(240, 240, &seg.pupil, &seg.iris);
        for (m, a) in seg.mask.bits().iter().zip(annulus.bits()) {
            assert!(!m || *a);
        }
        assert!(!seg.mask.get(120, 61));
    }

    #[test]
    fn ingest_rules() {
        let img = IrisImage::filled(100, 80, 90).unwrap();
        let pupil = Circle::new(50.0, 40.0, 10.0);
        let iris = Circle::new(50.0, 40.0, 30.0);
        let full = BinaryMask::full(100, 80);
        let seg = ingest_mask_image(&img, &full, pupil, iris).unwrap();
        assert_eq!(seg.mask, annulus_mask(100, 80, &pupil, &iris));

        let none = BinaryMask::empty(100, 80);
        assert_eq!(ingest_mask_image(&img, &none, pupil, iris).unwrap().mask.count(), 0);

        let wrong = BinaryMask::full(50, 40);
        assert_eq!(
            ingest_mask_image(&img, &wrong, pupil, iris).unwrap_err().name(),
            "DimensionMismatch"
        );
        let outside = Circle::new(70.0, 40.0, 15.0);
        assert_eq!(
            ingest_mask_image(&img, &full, outside, iris).unwrap_err().name(),
            "InvalidCircles"
        );
    }

    #[test]
    fn ingest_from_pgm_binarizes_at_128() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let raw = IrisImage::from_fn(100, 80, |x, _| if x < 50 { 127 } else { 128 }).unwrap();
        crate::imaging::write_pgm(&raw, &path).unwrap();
        let img = IrisImage::filled(100, 80, 90).unwrap();
        let seg = ingest_mask(&img, &path, Circle::new(50.0, 40.0, 10.0), Circle::new(50.0, 40.0, 30.0)).unwrap();
        assert!(!seg.mask.get(25, 40));
        assert!(seg.mask.get(75, 40));
    }

    #[test]
    fn sidecar_roundtrip_and_errors() {
        let p = Circle::new(160.5, 120.0, 40.25);
        let i = Circle::new(161.0, 119.5, 100.0);
        assert_eq!(parse_circles(&format_circles(&p, &i)).unwrap(), (p, i));
        assert_eq!(parse_circles("1 2 3").unwrap_err().name(), "MalformedSidecar");
        assert_eq!(parse_circles("1 2 3 4 5 x").unwrap_err().name(), "MalformedSidecar");
    }
}

//! Rubber-sheet unwrapping of the iris annulus into a fixed polar raster.
//!
//! Row 0 lies on the pupil boundary and the last row on the iris boundary;
//! column `j` samples angle `2*pi*j/cols` from the +x axis (image y grows
//! downward, so positive angles turn clockwise on screen). A rotation of the
//! eye therefore becomes a circular column shift.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{read_pgm, write_pgm, BinaryMask, IrisImage};
use crate::segmentation::{annulus_mask, SegmentationResult};

pub const DEFAULT_ROWS: usize = 64;
pub const DEFAULT_COLS: usize = 512;
/// Minimum fraction of the annulus that must be unmasked.
pub const MIN_MASK_COVERAGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedIris {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
    mask: Vec<bool>,
}

impl NormalizedIris {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>, mask: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || pixels.len() != rows * cols || mask.len() != rows * cols {
            return Err(Error::InvalidImage(format!(
                "normalized raster {rows}x{cols} with {} pixels / {} mask bits",
                pixels.len(),
                mask.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            mask,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    #[inline]
    pub fn valid(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.cols + col]
    }

    pub fn mask_coverage(&self) -> f64 {
        self.mask.iter().filter(|&&b| b).count() as f64 / self.mask.len() as f64
    }

    /// Texture as an image: width = cols, height = rows.
    pub fn texture_image(&self) -> IrisImage {
        IrisImage::new(self.cols, self.rows, self.pixels.clone()).expect("shape checked at construction")
    }

    pub fn mask_image(&self) -> BinaryMask {
        BinaryMask::new(self.cols, self.rows, self.mask.clone()).expect("shape checked at construction")
    }

    /// Writes `<base>_norm.pgm` and `<base>_normmask.pgm`.
    pub fn save(&self, base: impl AsRef<Path>) -> Result<()> {
        let (tex, mask) = norm_paths(base.as_ref());
        write_pgm(&self.texture_image(), tex)?;
        write_pgm(&self.mask_image().to_image(), mask)
    }

    pub fn load(base: impl AsRef<Path>) -> Result<Self> {
        let (tex, mask) = norm_paths(base.as_ref());
        let tex = read_pgm(tex)?;
        let mask = BinaryMask::from_image(&read_pgm(mask)?, 128);
        if mask.width() != tex.width() || mask.height() != tex.height() {
            return Err(Error::DimensionMismatch("normalized texture and mask differ".into()));
        }
        let (rows, cols) = (tex.height(), tex.width());
        Self::new(rows, cols, tex.into_pixels(), mask.bits().to_vec())
    }
}

fn norm_paths(base: &Path) -> (PathBuf, PathBuf) {
    let s = base.as_os_str().to_string_lossy();
    (
        PathBuf::from(format!("{s}_norm.pgm")),
        PathBuf::from(format!("{s}_normmask.pgm")),
    )
}

/// Source coordinate of the rubber-sheet sample at radial fraction `t` and
/// angle `theta`: the blend of the two boundary points at that angle.
pub fn sample_point(seg: &SegmentationResult, t: f64, theta: f64) -> (f64, f64) {
    let (c, s) = (theta.cos(), theta.sin());
    let px = seg.pupil.cx + seg.pupil.r * c;
    let py = seg.pupil.cy + seg.pupil.r * s;
    let ix = seg.iris.cx + seg.iris.r * c;
    let iy = seg.iris.cy + seg.iris.r * s;
    ((1.0 - t) * px + t * ix, (1.0 - t) * py + t * iy)
}

pub fn normalize(img: &IrisImage, seg: &SegmentationResult, rows: usize, cols: usize) -> Result<NormalizedIris> {
    if rows < 2 || cols == 0 {
        return Err(Error::InvalidImage(format!(
            "normalized raster {rows}x{cols} needs at least 2 rows"
        )));
    }
    if seg.mask.width() != img.width() || seg.mask.height() != img.height() {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs image {}x{}",
            seg.mask.width(),
            seg.mask.height(),
            img.width(),
            img.height()
        )));
    }
    let annulus = annulus_mask(img.width(), img.height(), &seg.pupil, &seg.iris).count();
    let coverage = if annulus == 0 {
        0.0
    } else {
        seg.mask.count() as f64 / annulus as f64
    };
    if coverage < MIN_MASK_COVERAGE {
        return Err(Error::EmptyMask {
            coverage,
            minimum: MIN_MASK_COVERAGE,
        });
    }

    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut pixels = Vec::with_capacity(rows * cols);
    let mut mask = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let t = i as f64 / (rows - 1) as f64;
        for j in 0..cols {
            let theta = 2.0 * PI * j as f64 / cols as f64;
            let (x, y) = sample_point(seg, t, theta);
            let value = img.sample_bilinear(x, y);
            pixels.push(value.round().clamp(0.0, 255.0) as u8);
            let (x0, y0) = (x.floor() as isize, y.floor() as isize);
            let valid = [(0, 0), (1, 0), (0, 1), (1, 1)].iter().all(|&(dx, dy)| {
                let (sx, sy) = (x0 + dx, y0 + dy);
                sx >= 0 && sy >= 0 && sx < w && sy < h && seg.mask.get(sx as usize, sy as usize)
            });
            mask.push(valid);
        }
    }
    NormalizedIris::new(rows, cols, pixels, mask)
}

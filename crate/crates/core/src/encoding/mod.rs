//! BSIF iris codes: filter banks, template generation and matching.

mod bank;
mod matcher;
mod template;

pub use bank::{defaults, load_filter_bank, save_filter_bank, FilterBank};
pub use matcher::{match_templates, MatchScore, DEFAULT_MAX_SHIFT, MIN_OVERLAP_BITS};
pub use template::{load_template, save_template, BitPlane, IrisTemplate};

use crate::error::{Error, Result};
use crate::imaging::{convolve_zero_mean, IrisImage, Kernel, RealImage};
use crate::normalization::{NormalizedIris, MIN_MASK_COVERAGE};

/// Filter response over the normalized raster. Columns wrap around (the
/// angular axis is periodic); rows replicate at the boundaries.
pub fn angular_response(texture: &IrisImage, kernel: &Kernel) -> Result<RealImage> {
    let r = kernel.radius();
    let (w, h) = (texture.width(), texture.height());
    let ext_w = w + 2 * r;
    let ext = IrisImage::from_fn(ext_w, h, |x, y| {
        let src = (x as isize - r as isize).rem_euclid(w as isize) as usize;
        texture.get(src, y)
    })?;
    let full = convolve_zero_mean(&ext, kernel)?;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        data.extend_from_slice(&full.data[y * ext_w + r..y * ext_w + r + w]);
    }
    Ok(RealImage {
        width: w,
        height: h,
        data,
    })
}

/// Binarized filter responses (bit = response > 0) plus the normalized
/// mask eroded radially by `ceil(s/2)` rows, so that no valid bit depends
/// on texture from outside the annulus.
pub fn encode(norm: &NormalizedIris, bank: &FilterBank) -> Result<IrisTemplate> {
    let coverage = norm.mask_coverage();
    if coverage < MIN_MASK_COVERAGE {
        return Err(Error::EmptyMask {
            coverage,
            minimum: MIN_MASK_COVERAGE,
        });
    }
    let (rows, cols) = (norm.rows(), norm.cols());
    let texture = norm.texture_image();
    let planes = bank
        .kernels()
        .iter()
        .map(|k| {
            let resp = angular_response(&texture, k)?;
            Ok(BitPlane::from_fn(rows, cols, |i, j| resp.get(j, i) > 0.0))
        })
        .collect::<Result<Vec<_>>>()?;

    let erosion = bank.side().div_ceil(2) as isize;
    let mask = BitPlane::from_fn(rows, cols, |i, j| {
        (-erosion..=erosion).all(|d| {
            let ii = i as isize + d;
            ii >= 0 && (ii as usize) < rows && norm.valid(ii as usize, j)
        })
    });
    IrisTemplate::new(planes, mask)
}

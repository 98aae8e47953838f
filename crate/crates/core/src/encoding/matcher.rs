use crate::error::{Error, Result};

use super::template::IrisTemplate;

/// Comparisons with fewer jointly valid bits than this are noise.
pub const MIN_OVERLAP_BITS: usize = 1024;
pub const DEFAULT_MAX_SHIFT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchScore {
    /// Mean fractional Hamming distance at the best shift; lower is better.
    pub score: f64,
    /// Column shift applied to the second template (positive = rightward).
    pub best_shift: isize,
}

/// Shift evaluation order: 0, -1, +1, -2, +2, ... so that keeping the first
/// strict minimum yields ties resolved by smallest |shift|, negative first.
fn shift_order(max_shift: usize) -> impl Iterator<Item = isize> {
    std::iter::once(0).chain((1..=max_shift as isize).flat_map(|d| [-d, d]))
}

/// Mean fractional Hamming distance minimized over circular column shifts.
///
/// For each shift the joint mask is `mask_a & shift(mask_b)`; every plane
/// contributes its fraction of disagreeing jointly valid bits, and the
/// planes are averaged. One shift is chosen for all planes together.
pub fn match_templates(a: &IrisTemplate, b: &IrisTemplate, max_shift: usize) -> Result<MatchScore> {
    if a.n_planes() != b.n_planes() || a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.n_planes(),
            a.rows(),
            a.cols(),
            b.n_planes(),
            b.rows(),
            b.cols()
        )));
    }
    let cols = a.cols();
    let n = a.n_planes();
    let mut best: Option<MatchScore> = None;
    let mut best_overlap = 0usize;
    let mut diffs = vec![0usize; n];
    for delta in shift_order(max_shift) {
        diffs.iter_mut().for_each(|d| *d = 0);
        let mut overlap = 0usize;
        for j in 0..cols {
            let jb = (j as isize - delta).rem_euclid(cols as isize) as usize;
            let ma = a.mask().column(j);
            let mb = b.mask().column(jb);
            for (w, (&x, &y)) in ma.iter().zip(mb).enumerate() {
                let joint = x & y;
                if joint == 0 {
                    continue;
                }
                overlap += joint.count_ones() as usize;
                for (k, d) in diffs.iter_mut().enumerate() {
                    let pa = a.planes()[k].column(j)[w];
                    let pb = b.planes()[k].column(jb)[w];
                    *d += ((pa ^ pb) & joint).count_ones() as usize;
                }
            }
        }
        best_overlap = best_overlap.max(overlap);
        if overlap < MIN_OVERLAP_BITS {
            continue;
        }
        let score = diffs.iter().map(|&d| d as f64 / overlap as f64).sum::<f64>() / n as f64;
        if best.is_none_or(|b| score < b.score) {
            best = Some(MatchScore {
                score,
                best_shift: delta,
            });
        }
    }
    best.ok_or(Error::InsufficientOverlap {
        best: best_overlap,
        required: MIN_OVERLAP_BITS,
    })
}

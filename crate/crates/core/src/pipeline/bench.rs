use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::encoding::{encode, match_templates};
use crate::imaging::IrisImage;
use crate::normalization::normalize;
use crate::pad2d::ospad2d_report;
use crate::pad3d::ospad3d_decide;
use crate::segmentation::{segment_circular, SegmentConfig};
use crate::synthgen::read_manifest;

use super::{read_image, template_from, PipelineConfig, Stage, StageResult, Staged};

/// Report rows, in order.
pub const BENCH_STAGES: [&str; 4] = ["Segmentation", "OSPAD-3D", "OSPAD-2D", "Iris Recognition"];

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub name: &'static str,
    /// Seconds.
    pub mean: f64,
    /// Population standard deviation, seconds.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub stages: Vec<StageTiming>,
    pub samples: usize,
}

impl TimingReport {
    /// Builds a report from per-stage samples in [`BENCH_STAGES`] order.
    pub fn from_samples(samples: &[Vec<f64>; 4]) -> Self {
        let stages = BENCH_STAGES
            .iter()
            .zip(samples)
            .map(|(&name, xs)| {
                let n = xs.len().max(1) as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                StageTiming {
                    name,
                    mean,
                    std: var.sqrt(),
                }
            })
            .collect();
        Self {
            stages,
            samples: samples[0].len(),
        }
    }
}

/// ```text
/// Stage             Time (s)
/// Segmentation      1.458 (±0.054)
/// ...
/// samples: 2
/// ```
pub fn format_timing_report(r: &TimingReport) -> String {
    let mut out = format!("{:<18}{}\n", "Stage", "Time (s)");
    for s in &r.stages {
        writeln!(out, "{:<18}{:.3} (±{:.3})", s.name, s.mean, s.std).unwrap();
    }
    writeln!(out, "samples: {}", r.samples).unwrap();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    pub repetitions: usize,
    /// Charge image decoding to the stages that read the image.
    pub include_io: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repetitions: 1,
            include_io: false,
        }
    }
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Times the four stages on every `<stem>_L.pgm` / `<stem>_R.pgm` pair of
/// a manifest, `repetitions` times each.
///
/// Segmentation runs on the left image and its mask feeds both the 3D
/// stage and recognition. Recognition covers normalization, encoding and
/// one match against a template enrolled beforehand from the same image.
pub fn run_bench(manifest: &Path, cfg: &PipelineConfig, opts: &BenchOptions) -> StageResult<TimingReport> {
    cfg.validate()?;
    let entries = read_manifest(manifest).stage(Stage::Bench)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let bank = cfg.recognition_bank().stage(Stage::Encoding)?;
    let ensemble = cfg.ensemble().stage(Stage::Pad2d)?;
    let scales = cfg.scales().stage(Stage::Pad2d)?;
    let geom = cfg.geometry().stage(Stage::Pad3d)?;
    let seg_cfg = SegmentConfig::default();

    let mut samples: [Vec<f64>; 4] = Default::default();
    for e in &entries {
        let base = dir.join(e.stem());
        let (lp, rp) = (with_suffix(&base, "_L.pgm"), with_suffix(&base, "_R.pgm"));
        let left = read_image(&lp)?;
        let right = read_image(&rp)?;
        let gallery = {
            let seg = segment_circular(&left, &seg_cfg).stage(Stage::Segmentation)?;
            template_from(&left, &seg, cfg, &bank)?
        };
        for _ in 0..opts.repetitions.max(1) {
            let load = |p: &Path, cached: &IrisImage| -> StageResult<(IrisImage, Duration)> {
                if opts.include_io {
                    let t = Instant::now();
                    let img = read_image(p)?;
                    Ok((img, t.elapsed()))
                } else {
                    Ok((cached.clone(), Duration::ZERO))
                }
            };

            let (l, io) = load(&lp, &left)?;
            let t = Instant::now();
            let seg = segment_circular(&l, &seg_cfg).stage(Stage::Segmentation)?;
            samples[0].push((t.elapsed() + io).as_secs_f64());

            let (l, io_l) = load(&lp, &left)?;
            let (r, io_r) = load(&rp, &right)?;
            let t = Instant::now();
            ospad3d_decide(&l, &r, &seg.mask, &geom, cfg.tau3).stage(Stage::Pad3d)?;
            samples[1].push((t.elapsed() + io_l + io_r).as_secs_f64());

            let (l, io) = load(&lp, &left)?;
            let t = Instant::now();
            ospad2d_report(&l, &ensemble, &scales, cfg.roi).stage(Stage::Pad2d)?;
            samples[2].push((t.elapsed() + io).as_secs_f64());

            let (l, io) = load(&lp, &left)?;
            let t = Instant::now();
            let norm = normalize(&l, &seg, cfg.rows, cfg.cols).stage(Stage::Normalization)?;
            let probe = encode(&norm, &bank).stage(Stage::Encoding)?;
            match_templates(&probe, &gallery, cfg.max_shift).stage(Stage::Matching)?;
            samples[3].push((t.elapsed() + io).as_secs_f64());
        }
    }
    Ok(TimingReport::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_samples_population_std() {
        let s = [vec![1.0, 3.0], vec![0.5, 0.5], vec![0.0, 2.0], vec![1.0, 1.5]];
        let r = TimingReport::from_samples(&s);
        assert_eq!(r.samples, 2);
        assert_eq!((r.stages[0].mean, r.stages[0].std), (2.0, 1.0));
        assert_eq!(r.stages[1].std, 0.0);
        assert_eq!((r.stages[3].mean, r.stages[3].std), (1.25, 0.25));
    }

    #[test]
    fn layout_is_fixed() {
        let r = TimingReport {
            stages: [(1.458, 0.054), (0.186, 0.01), (4.327, 0.1), (1.735, 0.02)]
                .iter()
                .zip(BENCH_STAGES)
                .map(|(&(mean, std), name)| StageTiming { name, mean, std })
                .collect(),
            samples: 2,
        };
        let want = "Stage             Time (s)\n\
                    Segmentation      1.458 (±0.054)\n\
                    OSPAD-3D          0.186 (±0.010)\n\
                    OSPAD-2D          4.327 (±0.100)\n\
                    Iris Recognition  1.735 (±0.020)\n\
                    samples: 2\n";
        assert_eq!(format_timing_report(&r), want);
        assert_eq!(format_timing_report(&r), format_timing_report(&r.clone()));
    }
}

//! `irispad` command-line front end.
//!
//! Exit status: 0 and 1 report a decision (match/no match, live/attack,
//! accepted/rejected); 2 is an error, with `<stage>: <ErrorName>` as the
//! first line on stderr. Commands without a decision exit 0 on success.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use irispad::encoding::{load_template, match_templates, save_filter_bank, save_template, FilterBank};
use irispad::error::Error;
use irispad::metrics::{
    format_pad_table, format_recognition_table, format_roc_csv, pad_rates, read_labeled_csv, roc, summarize,
    LabeledCsv, ScoreSet,
};
use irispad::normalization::normalize;
use irispad::pad2d::{format_feature_csv, ospad2d_report, read_feature_csv, save_ensemble, train_ensemble, EnsembleRecipe};
use irispad::pad3d::ospad3d_decide;
use irispad::pipeline::{
    batch_scores, enroll, format_batch_csv, format_timing_report, manifest_features, parse_batch_csv, read_image,
    run_bench, run_full, run_verify, BenchOptions, FullRequest, PipelineConfig, Probe, SegSource, Stage, StageError,
    StageResult, Staged, BATCH_HEADER,
};
use irispad::fusion::{ospad_fusion_decide, ospad_fusion_decide_eager};
use irispad::segmentation::{format_circles, write_circles};
use irispad::imaging::write_mask;
use irispad::synthgen::{generate_dataset, DatasetOptions, Lens};

#[derive(Parser)]
#[command(name = "irispad", version, about = "Iris recognition with 3D and 2D presentation attack detection")]
struct Cli {
    /// Pipeline configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set tau3=0.01`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for batch commands.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Where iris boundaries come from. Default: automatic segmentation.
#[derive(Args, Clone)]
struct SegArgs {
    /// Circle sidecar (`px py pr ix iy ir`) to use instead of segmenting.
    #[arg(long)]
    circles: Option<PathBuf>,
    /// Mask PGM to pair with `--circles`.
    #[arg(long, requires = "circles")]
    mask: Option<PathBuf>,
    /// Use `<stem>.circ` and `<stem>_mask.pgm` next to the image.
    #[arg(long, conflicts_with = "circles")]
    truth: bool,
}

impl SegArgs {
    fn source(&self, image: &Path) -> SegSource {
        if self.truth {
            SegSource::for_stem(&stem_of(image))
        } else if let Some(c) = &self.circles {
            SegSource::Sidecar {
                circles: c.clone(),
                mask: self.mask.clone(),
            }
        } else {
            SegSource::Auto
        }
    }
}

/// `dir/id0001_c00_L.pgm` -> `dir/id0001_c00`.
fn stem_of(image: &Path) -> PathBuf {
    let s = image.to_string_lossy();
    let s = s.strip_suffix(".pgm").unwrap_or(&s);
    let s = s.strip_suffix("_L").or_else(|| s.strip_suffix("_R")).unwrap_or(s);
    PathBuf::from(s)
}

#[derive(Clone, Copy, ValueEnum)]
enum LensArg {
    Textured,
    Opaque,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Orientation {
    /// Lower is genuine (recognition distances).
    Distance,
    /// Higher is attack (PAD scores).
    Attack,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground truth and a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        identities: u64,
        #[arg(long)]
        captures: u64,
        /// Also emit every capture wearing this lens.
        #[arg(long)]
        lens: Option<LensArg>,
        /// Render two-light pairs (`_L`, `_R`) next to each eye image.
        #[arg(long)]
        pairs: bool,
    },
    /// Locate pupil and iris; prints `px py pr ix iy ir`.
    Segment {
        image: PathBuf,
        #[arg(long)]
        out_circles: Option<PathBuf>,
        #[arg(long)]
        out_mask: Option<PathBuf>,
    },
    /// Unwrap the iris to `<out>_norm.pgm` and `<out>_normmask.pgm`.
    Normalize {
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Build an iris template from an eye image.
    Encode {
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Compare two templates; prints `score shift`.
    Match { a: PathBuf, b: PathBuf },
    /// Verify a probe (`.pgm` image or template) against a gallery template.
    Verify {
        probe: PathBuf,
        gallery: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Photometric-stereo PAD on a two-light pair; prints `score decision`.
    Pad3d {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Texture PAD; prints `score decision members_evaluated`.
    Pad2d { image: PathBuf },
    /// Cascaded 3D then 2D PAD.
    Pad {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
        /// Run the texture stage concurrently, cancelling it on a 3D attack.
        #[arg(long)]
        eager: bool,
    },
    /// PAD, then recognition against a gallery template when live.
    Full {
        left: PathBuf,
        right: PathBuf,
        gallery: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
        /// Match even when PAD calls attack.
        #[arg(long)]
        force_match: bool,
        #[arg(long)]
        eager: bool,
    },
    /// Texture features of every manifest entry as a training CSV.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the left image of each pair instead of the eye image.
        #[arg(long)]
        left: bool,
    },
    /// Train the texture PAD ensemble from a feature CSV.
    TrainPad2d {
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Metrics from a labeled score or decision CSV, or a manifest batch.
    Eval {
        /// Labeled CSV (`label,score` or `label,decision`) or batch CSV.
        #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
        scores: Option<PathBuf>,
        /// Score orientation, required for score files.
        #[arg(long)]
        orientation: Option<Orientation>,
        /// Enroll and match every pair of this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Write the batch CSV here.
        #[arg(long, requires = "manifest")]
        out: Option<PathBuf>,
        /// Use ground-truth sidecars instead of segmenting.
        #[arg(long, requires = "manifest")]
        truth: bool,
        /// Write the ROC curve CSV here.
        #[arg(long)]
        roc: Option<PathBuf>,
        /// Row label in the table.
        #[arg(long)]
        name: Option<String>,
    },
    /// Per-stage timing over the pairs of a manifest.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[arg(long)]
        include_io: bool,
    },
    /// Write a seeded random zero-mean filter bank.
    GenBank {
        #[arg(long)]
        filters: usize,
        #[arg(long)]
        side: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> StageResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).stage(Stage::Config)?,
        None => PipelineConfig::default(),
    };
    for pair in &cli.overrides {
        cfg.set_pair(pair).stage(Stage::Config)?;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_text(path: &Path, text: &str, stage: Stage) -> StageResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e)).stage(stage)
}

fn decision_code(attack_or_reject: bool) -> u8 {
    u8::from(attack_or_reject)
}

fn run(cli: &Cli) -> StageResult<u8> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth {
            out,
            identities,
            captures,
            lens,
            pairs,
        } => {
            let opts = DatasetOptions {
                identities: *identities,
                captures: *captures,
                lens: lens.map(|l| match l {
                    LensArg::Textured => Lens::Textured,
                    LensArg::Opaque => Lens::Opaque,
                }),
                pairs: *pairs,
            };
            let entries = generate_dataset(out, &opts).stage(Stage::Synth)?;
            println!("{} images, manifest {}", entries.len(), out.join("manifest.csv").display());
            Ok(0)
        }
        Command::Segment {
            image,
            out_circles,
            out_mask,
        } => {
            let img = read_image(image)?;
            let seg = SegSource::Auto.segment(&img)?;
            if let Some(p) = out_circles {
                write_circles(&seg.pupil, &seg.iris, p).stage(Stage::Segmentation)?;
            }
            if let Some(p) = out_mask {
                write_mask(&seg.mask, p).stage(Stage::Segmentation)?;
            }
            print!("{}", format_circles(&seg.pupil, &seg.iris));
            Ok(0)
        }
        Command::Normalize { image, out, seg } => {
            let img = read_image(image)?;
            let s = seg.source(image).segment(&img)?;
            let norm = normalize(&img, &s, cfg.rows, cfg.cols).stage(Stage::Normalization)?;
            norm.save(out).stage(Stage::Normalization)?;
            println!("{}x{} coverage {}", norm.rows(), norm.cols(), norm.mask_coverage());
            Ok(0)
        }
        Command::Encode { image, out, seg } => {
            let img = read_image(image)?;
            let bank = cfg.recognition_bank().stage(Stage::Encoding)?;
            let t = enroll(&img, &seg.source(image), &cfg, &bank)?;
            save_template(&t, out).stage(Stage::Encoding)?;
            println!("{}x{}x{}", t.n_planes(), t.rows(), t.cols());
            Ok(0)
        }
        Command::Match { a, b } => {
            let ta = load_template(a).stage(Stage::Input)?;
            let tb = load_template(b).stage(Stage::Input)?;
            let m = match_templates(&ta, &tb, cfg.max_shift).stage(Stage::Matching)?;
            println!("{} {}", m.score, m.best_shift);
            Ok(0)
        }
        Command::Verify { probe, gallery, seg } => {
            let p = if probe.extension().is_some_and(|e| e == "pgm") {
                Probe::Image {
                    path: probe.clone(),
                    seg: seg.source(probe),
                }
            } else {
                Probe::Template(probe.clone())
            };
            let v = run_verify(&p, gallery, &cfg)?;
            println!("{}", v.line());
            Ok(decision_code(!v.matched))
        }
        Command::Pad3d { left, right, seg } => {
            let l = read_image(left)?;
            let r = read_image(right)?;
            let s = seg.source(left).segment(&l)?;
            let geom = cfg.geometry().stage(Stage::Pad3d)?;
            let o = ospad3d_decide(&l, &r, &s.mask, &geom, cfg.tau3).stage(Stage::Pad3d)?;
            println!("{} {}", o.score, o.decision);
            Ok(decision_code(o.decision.is_attack()))
        }
        Command::Pad2d { image } => {
            let img = read_image(image)?;
            let ensemble = cfg.ensemble().stage(Stage::Pad2d)?;
            let scales = cfg.scales().stage(Stage::Pad2d)?;
            let r = ospad2d_report(&img, &ensemble, &scales, cfg.roi).stage(Stage::Pad2d)?;
            println!("{} {} {}", r.outcome.score, r.outcome.decision, r.tally.evaluated());
            Ok(decision_code(r.outcome.decision.is_attack()))
        }
        Command::Pad { left, right, seg, eager } => {
            let l = read_image(left)?;
            let r = read_image(right)?;
            let ensemble = cfg.ensemble().stage(Stage::Pad2d)?;
            let scales = cfg.scales().stage(Stage::Pad2d)?;
            let geom = cfg.geometry().stage(Stage::Pad3d)?;
            let s = seg.source(left).segment(&l)?;
            let decide = if *eager {
                ospad_fusion_decide_eager
            } else {
                ospad_fusion_decide
            };
            let rep = decide(&l, &r, &s.mask, &geom, cfg.tau3, &ensemble, &scales, cfg.roi).stage(Stage::Fusion)?;
            println!("{}", rep.line());
            Ok(decision_code(rep.fused.decision.is_attack()))
        }
        Command::Full {
            left,
            right,
            gallery,
            seg,
            force_match,
            eager,
        } => {
            let req = FullRequest {
                left: left.clone(),
                right: right.clone(),
                seg: seg.source(left),
                gallery: gallery.clone(),
                force_match: *force_match,
                eager: *eager,
            };
            let out = run_full(&req, &cfg)?;
            print!("{}", out.lines());
            Ok(decision_code(!out.accepted()))
        }
        Command::Features { manifest, out, left } => {
            let rows = manifest_features(manifest, &cfg, *left)?;
            write_text(out, &format_feature_csv(&rows), Stage::Pad2d)?;
            println!("{} rows, {} features", rows.len(), rows[0].features.dim());
            Ok(0)
        }
        Command::TrainPad2d { features, out, seed } => {
            let data = read_feature_csv(features).stage(Stage::Training)?;
            let e = train_ensemble(&data, &EnsembleRecipe::default(), *seed).stage(Stage::Training)?;
            save_ensemble(&e, out).stage(Stage::Training)?;
            let correct = data
                .iter()
                .map(|row| e.vote(&row.features).map(|t| t.decision == row.label))
                .collect::<Result<Vec<_>, _>>()
                .stage(Stage::Training)?
                .into_iter()
                .filter(|&ok| ok)
                .count();
            println!("{} members, dim {}, training accuracy {}/{}", e.len(), e.dim(), correct, data.len());
            Ok(0)
        }
        Command::Eval {
            scores,
            orientation,
            manifest,
            out,
            truth,
            roc: roc_out,
            name,
        } => {
            if let Some(m) = manifest {
                let rows = batch_scores(m, &cfg, *truth)?;
                let text = format_batch_csv(&rows);
                if let Some(o) = out {
                    write_text(o, &text, Stage::Eval)?;
                }
                let (imp, lensed) = parse_batch_csv(&text).stage(Stage::Eval)?;
                print!("{}", recognition_tables(&imp, &lensed, roc_out.as_deref())?);
                return Ok(0);
            }
            let path = scores.as_ref().expect("clap requires scores without --manifest");
            eval_file(path, *orientation, roc_out.as_deref(), name.as_deref())?;
            Ok(0)
        }
        Command::Bench {
            manifest,
            repetitions,
            include_io,
        } => {
            let opts = BenchOptions {
                repetitions: *repetitions,
                include_io: *include_io,
            };
            let r = run_bench(manifest, &cfg, &opts)?;
            print!("{}", format_timing_report(&r));
            Ok(0)
        }
        Command::GenBank {
            filters,
            side,
            seed,
            out,
        } => {
            let bank = FilterBank::seeded_random(*filters, *side, *seed).stage(Stage::Encoding)?;
            save_filter_bank(&bank, out).stage(Stage::Encoding)?;
            Ok(0)
        }
    }
}

fn recognition_tables(imp: &ScoreSet, lensed: &ScoreSet, roc_out: Option<&Path>) -> StageResult<String> {
    let mut rows = vec![("Genuine vs Imposter".to_string(), summarize(imp).stage(Stage::Eval)?)];
    if !lensed.imposter.is_empty() {
        rows.push(("Genuine vs Contact".to_string(), summarize(lensed).stage(Stage::Eval)?));
    }
    if let Some(p) = roc_out {
        write_text(p, &format_roc_csv(&roc(imp).stage(Stage::Eval)?), Stage::Eval)?;
    }
    Ok(format_recognition_table(&rows))
}

fn orientation_error(msg: &str) -> StageError {
    StageError {
        stage: Stage::Eval,
        error: Error::Config(msg.to_string()),
    }
}

fn eval_file(path: &Path, orientation: Option<Orientation>, roc_out: Option<&Path>, name: Option<&str>) -> StageResult<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e)).stage(Stage::Input)?;
    if text.lines().next().is_some_and(|l| l.trim() == BATCH_HEADER) {
        if orientation != Some(Orientation::Distance) {
            return Err(orientation_error("batch score files need --orientation distance"));
        }
        let (imp, lensed) = parse_batch_csv(&text).stage(Stage::Eval)?;
        print!("{}", recognition_tables(&imp, &lensed, roc_out)?);
        return Ok(());
    }
    let (set, label, want) = match read_labeled_csv(path).stage(Stage::Eval)? {
        LabeledCsv::PadDecisions(labels) => {
            let rates = pad_rates(&labels).stage(Stage::Eval)?;
            print!("{}", format_pad_table(&[(name.unwrap_or("PAD").to_string(), rates)]));
            return Ok(());
        }
        LabeledCsv::Recognition(s) => (s, "Genuine vs Imposter", Orientation::Distance),
        LabeledCsv::PadScores(s) => (s, "Bona fide vs Attack", Orientation::Attack),
    };
    match orientation {
        None => return Err(orientation_error("score files need --orientation distance|attack")),
        Some(o) if o != want => {
            return Err(orientation_error(
                "orientation does not match the labels (genuine/imposter are distances, bonafide/attack are attack scores)",
            ))
        }
        Some(_) => {}
    }
    let summary = summarize(&set).stage(Stage::Eval)?;
    if let Some(p) = roc_out {
        write_text(p, &format_roc_csv(&roc(&set).stage(Stage::Eval)?), Stage::Eval)?;
    }
    print!("{}", format_recognition_table(&[(name.unwrap_or(label).to_string(), summary)]));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            eprintln!("  {}", e.error);
            ExitCode::from(2)
        }
    }
}

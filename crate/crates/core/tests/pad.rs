mod common;

use std::path::Path;

use irispad::encoding::save_template;
use irispad::fusion::{ospad_fusion_decide, ospad_fusion_decide_eager, Stage3d};
use irispad::imaging::write_pgm;
use irispad::pad2d::{ospad2d_decide, save_ensemble, DEFAULT_ROI};
use irispad::pad3d::{estimate_normals, ospad3d_decide, ospad3d_score, Decision, IlluminationGeometry, DEFAULT_TAU3};
use irispad::pipeline::{enroll, run_full, FullRequest, PipelineConfig, SegSource};
use irispad::synthgen::{render_pair, surface_normal, Lens, Surface, SynthSpec};

fn score3d(spec: &SynthSpec) -> f64 {
    let pair = render_pair(spec).unwrap();
    let field = estimate_normals(&pair.left, &pair.right, pair.mask(), &spec.geometry).unwrap();
    ospad3d_score(&field).unwrap()
}

#[test]
fn bumpy_surfaces_score_above_flat_domes() {
    for id in 0..5 {
        let flat = SynthSpec::capture(id, 0, Lens::None);
        let mut bumpy = flat.clone();
        bumpy.surface = Surface::BUMPY;
        let (f, b) = (score3d(&flat), score3d(&bumpy));
        assert!(b > f, "identity {id}: bumpy {b} flat {f}");
        assert!(f < DEFAULT_TAU3 && b >= DEFAULT_TAU3, "identity {id}: bumpy {b} flat {f}");
    }
}

#[test]
fn flat_plane_under_symmetric_lights_scores_zero() {
    let mut spec = SynthSpec::capture(3, 0, Lens::None);
    spec.surface = Surface::Plane;
    assert_eq!(score3d(&spec), 0.0);
}

/// Angle between the estimate and the true normal projected onto the plane
/// spanned by the two lights, which is all two images can recover.
fn projected_errors_deg(spec: &SynthSpec) -> Vec<f64> {
    let pair = render_pair(spec).unwrap();
    let field = estimate_normals(&pair.left, &pair.right, pair.mask(), &spec.geometry).unwrap();
    let w = field.width;
    (0..field.normals.len())
        .filter(|&k| field.valid[k])
        .map(|k| {
            let n = surface_normal(spec, (k % w) as f64, (k / w) as f64);
            let len = n[0].hypot(n[2]);
            let e = field.normals[k];
            let cos = (e[0] * n[0] + e[2] * n[2]) / len;
            cos.clamp(-1.0, 1.0).acos().to_degrees()
        })
        .collect()
}

#[test]
fn estimated_normals_match_analytic_surface() {
    for seed in 0..3u64 {
        let mut spec = SynthSpec::base(seed);
        spec.seed = seed;
        spec.surface = Surface::BUMPY;
        let errs = projected_errors_deg(&spec);
        let within = errs.iter().filter(|&&e| e <= 2.0).count();
        assert!(within as f64 >= 0.99 * errs.len() as f64, "seed {seed}: {within}/{}", errs.len());
    }
}

#[test]
fn mirrored_geometry_flips_left_and_right() {
    let spec = SynthSpec::capture(2, 0, Lens::None);
    let pair = render_pair(&spec).unwrap();
    let g = IlluminationGeometry::default();
    let a = ospad3d_decide(&pair.left, &pair.right, pair.mask(), &g, DEFAULT_TAU3).unwrap();
    let b = ospad3d_decide(
        &pair.left.flip_horizontal(),
        &pair.right.flip_horizontal(),
        &pair.mask().flip_horizontal(),
        &g.mirrored(),
        DEFAULT_TAU3,
    )
    .unwrap();
    assert!((a.score - b.score).abs() < 1e-12);
}

#[test]
fn opaque_lens_passes_3d_but_fusion_rejects_it() {
    let ensemble = common::train_small(0..6, 7);
    let scales = common::small_scales();
    let g = IlluminationGeometry::default();
    for id in 40..43 {
        let opaque = render_pair(&SynthSpec::capture(id, 2, Lens::Opaque)).unwrap();
        let three = ospad3d_decide(&opaque.left, &opaque.right, opaque.mask(), &g, DEFAULT_TAU3).unwrap();
        assert_eq!(three.decision, Decision::Live, "identity {id}: the lens is smooth");
        let two = ospad2d_decide(&opaque.left, &ensemble, &scales, DEFAULT_ROI).unwrap();
        assert_eq!(two.decision, Decision::Attack, "identity {id}");
        for decide in [ospad_fusion_decide, ospad_fusion_decide_eager] {
            let r = decide(&opaque.left, &opaque.right, opaque.mask(), &g, DEFAULT_TAU3, &ensemble, &scales, DEFAULT_ROI).unwrap();
            assert_eq!(r.stage3d, Stage3d::Decided(three));
            assert_eq!(r.fused.decision, Decision::Attack);
        }

        let live = render_pair(&SynthSpec::capture(id, 2, Lens::None)).unwrap();
        let r = ospad_fusion_decide(&live.left, &live.right, live.mask(), &g, DEFAULT_TAU3, &ensemble, &scales, DEFAULT_ROI).unwrap();
        assert_eq!(r.fused.decision, Decision::Live, "identity {id}: {}", r.line());

        let textured = render_pair(&SynthSpec::capture(id, 2, Lens::Textured)).unwrap();
        let r = ospad_fusion_decide_eager(
            &textured.left,
            &textured.right,
            textured.mask(),
            &g,
            DEFAULT_TAU3,
            &ensemble,
            &scales,
            DEFAULT_ROI,
        )
        .unwrap();
        assert!(r.stage2d.is_none(), "identity {id}: 3D already rejects the bumpy lens");
        assert_eq!(r.fused.decision, Decision::Attack);
    }
}

fn write_pair(dir: &Path, stem: &str, spec: &SynthSpec) -> (std::path::PathBuf, std::path::PathBuf) {
    let pair = render_pair(spec).unwrap();
    let (l, r) = (dir.join(format!("{stem}_L.pgm")), dir.join(format!("{stem}_R.pgm")));
    write_pgm(&pair.left, &l).unwrap();
    write_pgm(&pair.right, &r).unwrap();
    (l, r)
}

#[test]
fn full_pipeline_gates_recognition_on_pad() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    save_ensemble(&common::train_small(0..6, 3), &model).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.set("model", model.to_str().unwrap()).unwrap();
    cfg.set("pad_scales", &common::SMALL_SCALES.join(",")).unwrap();

    let id = 30;
    let gallery_spec = SynthSpec::capture(id, 0, Lens::None);
    let (gl, _) = write_pair(dir.path(), "gallery", &gallery_spec);
    let gallery = dir.path().join("gallery.itpl");
    let img = irispad::imaging::read_pgm(&gl).unwrap();
    let t = enroll(&img, &SegSource::Auto, &cfg, &cfg.recognition_bank().unwrap()).unwrap();
    save_template(&t, &gallery).unwrap();

    let (l, r) = write_pair(dir.path(), "live", &SynthSpec::capture(id, 1, Lens::None));
    let req = FullRequest {
        left: l,
        right: r,
        seg: SegSource::Auto,
        gallery: gallery.clone(),
        force_match: false,
        eager: false,
    };
    let out = run_full(&req, &cfg).unwrap();
    assert_eq!(out.pad.fused.decision, Decision::Live);
    assert!(out.recognition.unwrap().matched, "{}", out.lines());
    assert!(out.accepted());

    let (l, r) = write_pair(dir.path(), "lens", &SynthSpec::capture(id, 1, Lens::Textured));
    let mut req = FullRequest { left: l, right: r, ..req };
    let out = run_full(&req, &cfg).unwrap();
    assert_eq!(out.pad.fused.decision, Decision::Attack);
    assert!(out.recognition.is_none());
    assert!(out.lines().ends_with("match skipped\n"));

    req.force_match = true;
    let out = run_full(&req, &cfg).unwrap();
    assert_eq!(out.pad.fused.decision, Decision::Attack);
    let rec = out.recognition.unwrap();
    assert!(rec.score.score > 0.2 && rec.score.score < 0.45, "{}", out.lines());
    assert!(!out.accepted());
}

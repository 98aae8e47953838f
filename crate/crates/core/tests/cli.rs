use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn irispad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irispad"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run irispad")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = irispad(dir, args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

#[test]
fn verify_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "ds", "--identities", "2", "--captures", "2"]);
    ok(d, &["encode", "ds/id0000_c00.pgm", "--out", "g0.itpl"]);
    ok(d, &["encode", "ds/id0001_c00.pgm", "--out", "g1.itpl", "--truth"]);

    let own = irispad(d, &["verify", "ds/id0000_c00.pgm", "g0.itpl"]);
    assert_eq!(own.status.code(), Some(0));
    assert_eq!(stdout(&own), "0 0 match\n");

    let genuine = irispad(d, &["verify", "ds/id0000_c01.pgm", "g0.itpl"]);
    assert_eq!(genuine.status.code(), Some(0), "{}", stdout(&genuine));

    let imposter = irispad(d, &["verify", "ds/id0001_c01.pgm", "g0.itpl"]);
    assert_eq!(imposter.status.code(), Some(1));
    let fields: Vec<String> = stdout(&imposter).split_whitespace().map(String::from).collect();
    let score: f64 = fields[0].parse().unwrap();
    assert!((0.4..0.6).contains(&score), "{score}");
    assert_eq!(fields[2], "nomatch");

    let m = ok(d, &["match", "g0.itpl", "g1.itpl"]);
    assert_eq!(m.split_whitespace().count(), 2);

    let missing = irispad(d, &["--set", "filter_bank=nope.bsif", "verify", "ds/id0000_c00.pgm", "g0.itpl"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr(&missing).lines().next(), Some("encoding: MalformedFilterFile"));

    fs::write(d.join("bad.itpl"), "IRISCODE 9\n").unwrap();
    let bad = irispad(d, &["verify", "ds/id0000_c00.pgm", "bad.itpl"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(stderr(&bad).lines().next(), Some("input: MalformedTemplateFile"));

    let unreadable = irispad(d, &["segment", "nothing.pgm"]);
    assert_eq!(unreadable.status.code(), Some(2));
    assert_eq!(stderr(&unreadable).lines().next(), Some("input: IoFailure"));

    assert_eq!(irispad(d, &["verify"]).status.code(), Some(2));
}

#[test]
fn segment_and_normalize_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "ds", "--identities", "1", "--captures", "1"]);
    let line = ok(d, &["segment", "ds/id0000_c00.pgm", "--out-circles", "c.circ", "--out-mask", "m.pgm"]);
    assert_eq!(line.split_whitespace().count(), 6);
    assert_eq!(fs::read_to_string(d.join("c.circ")).unwrap(), line);
    ok(d, &["normalize", "ds/id0000_c00.pgm", "--out", "n", "--circles", "c.circ", "--mask", "m.pgm"]);
    assert!(d.join("n_norm.pgm").is_file() && d.join("n_normmask.pgm").is_file());
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("pipeline.conf"), "# test\nmax_shift = 0\nworkers = 0\n").unwrap();
    let o = irispad(d, &["--config", "pipeline.conf", "match", "a", "b"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().next(), Some("config: Config"));
    let o = irispad(d, &["--set", "colour=blue", "match", "a", "b"]);
    assert_eq!(stderr(&o).lines().next(), Some("config: Config"));
}

#[test]
fn eval_scores_and_decisions() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("rec.csv"),
        "label,score\ngenuine,0.10\ngenuine,0.15\ngenuine,0.12\nimposter,0.45\nimposter,0.50\nimposter,0.48\n",
    )
    .unwrap();
    let o = irispad(d, &["eval", "rec.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().next(), Some("eval: Config"));
    assert_eq!(irispad(d, &["eval", "rec.csv", "--orientation", "attack"]).status.code(), Some(2));
    let table = ok(d, &["eval", "rec.csv", "--orientation", "distance", "--roc", "roc.csv"]);
    assert!(table.starts_with("Comparison"));
    assert!(table.lines().nth(1).unwrap().contains("0.00"), "{table}");
    assert!(fs::read_to_string(d.join("roc.csv")).unwrap().starts_with("threshold,fmr,fnmr"));

    let mut csv = String::from("label,decision\n");
    for k in 0..535 {
        csv.push_str(if k < 34 { "attack,live\n" } else { "attack,attack\n" });
    }
    for k in 0..534 {
        csv.push_str(if k < 22 { "bonafide,attack\n" } else { "bonafide,live\n" });
    }
    fs::write(d.join("dec.csv"), csv).unwrap();
    let table = ok(d, &["eval", "dec.csv", "--name", "OSPAD-fusion"]);
    let row = table.lines().nth(1).unwrap();
    assert!(row.starts_with("OSPAD-fusion"), "{table}");
    assert!(row.ends_with("94.76      6.36      4.12"), "{table}");
}

#[test]
fn batch_eval_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "ds", "--identities", "2", "--captures", "2", "--lens", "textured"]);
    ok(d, &["--workers", "1", "eval", "--manifest", "ds/manifest.csv", "--out", "w1.csv"]);
    let table = ok(d, &["--workers", "4", "eval", "--manifest", "ds/manifest.csv", "--out", "w4.csv"]);
    assert!(table.contains("Genuine vs Contact"), "{table}");
    let (a, b) = (fs::read(d.join("w1.csv")).unwrap(), fs::read(d.join("w4.csv")).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 8 * 7 / 2);
    ok(d, &["eval", "w1.csv", "--orientation", "distance"]);
}

#[test]
fn pad_commands_and_bench() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let small = ["--set", "pad_scales=8x5"];
    ok(d, &["synth", "--out", "ds", "--identities", "2", "--captures", "1", "--lens", "textured", "--pairs"]);
    ok(d, &[&small[..], &["features", "--manifest", "ds/manifest.csv", "--out", "f.csv", "--left"]].concat());
    let summary = ok(d, &["train-pad2d", "f.csv", "--out", "model.txt", "--seed", "4"]);
    assert!(summary.starts_with("5 members, dim 256"), "{summary}");

    let with_model: Vec<&str> = [&small[..], &["--set", "model=model.txt"]].concat();
    let run = |extra: &[&str]| irispad(d, &[&with_model[..], extra].concat());

    let o = run(&["pad3d", "ds/id0000_c00_L.pgm", "ds/id0000_c00_R.pgm", "--truth"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with(" live\n"));
    let o = run(&["pad3d", "ds/id0000_c00_textured_L.pgm", "ds/id0000_c00_textured_R.pgm"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["pad", "ds/id0001_c00_textured_L.pgm", "ds/id0001_c00_textured_R.pgm", "--eager"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).ends_with(" attack skipped attack\n"), "{}", stdout(&o));
    let o = run(&["pad2d", "ds/id0001_c00_L.pgm"]);
    assert!(o.status.code().unwrap() < 2, "{}", stderr(&o));

    let o = run(&["bench", "--manifest", "ds/manifest.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = stdout(&o);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 6, "{report}");
    assert_eq!(lines[0], "Stage             Time (s)");
    for (line, name) in lines[1..5].iter().zip(["Segmentation", "OSPAD-3D", "OSPAD-2D", "Iris Recognition"]) {
        assert!(line.starts_with(name) && line.contains(" (±") && line.ends_with(')'), "{line}");
    }
    assert_eq!(lines[5], "samples: 4");

    fs::write(d.join("ds/empty.csv"), "path,identity,lens,surface\n").unwrap();
    let o = run(&["bench", "--manifest", "ds/empty.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().next(), Some("bench: EmptyManifest"));
}

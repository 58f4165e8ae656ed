use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn klrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klrf")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = klrf(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    ok(&["synth", "--out", p(dir), "--views", "0,45", "--sequences-per-class", "6", "--frames", "16"]);
}

#[test]
fn synth_train_eval_inspect_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let train = d.join("train/manifest.json");
    let model = d.join("model.klrf");
    let out = ok(&["--threads", "1", "train", "--data", p(&train), "--out", p(&model), "--trees", "8", "--seed", "3"]);
    assert!(out.contains("stage forest"));
    assert!(out.contains("usefulness per class"));

    let report = d.join("report.json");
    ok(&[
        "eval", "--model", p(&model),
        "--data", p(&d.join("test_0/manifest.json")),
        "--data", p(&d.join("test_45/manifest.json")),
        "--out", p(&report),
    ]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let acc = json["mean_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(json["per_view_accuracy"].as_object().unwrap().len(), 2);
    assert!(json.get("wall_clock_secs").is_none());

    let text = ok(&["inspect", "--model", p(&model), "--json"]);
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(summary["trees"], 8);
    assert_eq!(summary["has_reference_forests"], false);
    let binned: u64 = summary["leaves_per_tree"].as_array().unwrap().iter().map(|b| b["trees"].as_u64().unwrap()).sum();
    assert_eq!(binned, 8);
}

#[test]
fn training_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let train = d.join("train/manifest.json");
    let (a, b) = (d.join("a.klrf"), d.join("b.klrf"));
    ok(&["--threads", "1", "train", "--data", p(&train), "--out", p(&a), "--trees", "6"]);
    ok(&["--threads", "3", "train", "--data", p(&train), "--out", p(&b), "--trees", "6"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn predict_with_filter_emits_one_line_per_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let model = d.join("m.klrf");
    ok(&["train", "--data", p(&d.join("train/manifest.json")), "--out", p(&model), "--trees", "5", "--baseline"]);
    let text = ok(&[
        "predict", "--model", p(&model),
        "--data", p(&d.join("test_45/manifest.json")),
        "--kcf", "--kcf-offsets", "1",
    ]);
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 36);
    for l in &lines {
        let s: f64 = l["probs"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn view_filter_drops_other_views() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let model = d.join("m.klrf");
    ok(&["train", "--data", p(&d.join("train/manifest.json")), "--out", p(&model), "--trees", "4"]);
    let paths = [d.join("test_0/manifest.json"), d.join("test_45/manifest.json")];
    let both = [p(&paths[0]), p(&paths[1])];
    let text = ok(&["predict", "--model", p(&model), "--data", both[0], "--data", both[1], "--views", "45"]);
    assert_eq!(text.lines().count(), 36);
    assert!(text.lines().all(|l| l.contains("\"view\":\"45\"")));

    let out = klrf(&["predict", "--model", p(&model), "--data", both[0], "--views", "90"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn exit_codes_separate_config_data_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let train = d.join("train/manifest.json");
    let bad = d.join("bad.toml");
    fs::write(&bad, "eta_fraction = 1.5\n").unwrap();
    let out = klrf(&["train", "--data", p(&train), "--out", p(&d.join("x")), "--config", p(&bad)]);
    assert_eq!(out.status.code(), Some(3));

    let out = klrf(&["train", "--data", p(&d.join("missing.json")), "--out", p(&d.join("x"))]);
    assert_eq!(out.status.code(), Some(4));

    let junk = d.join("junk.klrf");
    fs::write(&junk, b"not a model").unwrap();
    let out = klrf(&["inspect", "--model", p(&junk)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    assert_eq!(klrf(&["train"]).status.code(), Some(2));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let cfg = d.join("c.toml");
    fs::write(&cfg, "num_trees = 9\nseed = 11\n[augmentation]\ntranslations = 1\n").unwrap();
    let model = d.join("m.klrf");
    ok(&["train", "--data", p(&d.join("train/manifest.json")), "--out", p(&model), "--config", p(&cfg), "--trees", "3"]);
    let s: serde_json::Value = serde_json::from_str(&ok(&["inspect", "--model", p(&model), "--json"])).unwrap();
    assert_eq!(s["trees"], 3);
    assert_eq!(s["config"]["seed"], 11);
    assert_eq!(s["config"]["augmentation"]["translations"], 1);
}

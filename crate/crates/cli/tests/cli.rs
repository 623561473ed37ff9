use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cosrec::Checkpoint;
use tempfile::TempDir;

fn cosrec(args: &[&str], data_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cosrec"));
    cmd.args(args).env_remove("COSREC_DATA_DIR").env("RUST_LOG", "warn");
    if let Some(d) = data_dir {
        cmd.env("COSREC_DATA_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "exit {:?}\nstderr: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// 40 users walking rotations of two 20-item patterns, 20 distinct ratings each.
fn write_movielens(path: &Path) {
    let mut text = String::new();
    for u in 0..40 {
        let (pattern, rot) = (u % 2, u / 2);
        for t in 0..20 {
            let item = pattern * 20 + (rot + t) % 20 + 100;
            text.push_str(&format!("{}::{item}::4::{}\n", u + 1, 978_300_000 + t * 10 + u));
        }
    }
    fs::write(path, text).unwrap();
}

struct Fixture {
    dir: TempDir,
    data: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("ratings.dat");
        write_movielens(&raw);
        let data = dir.path().join("toy.cosrec");
        ok(&cosrec(&["preprocess", "--input", s(&raw), "--output", s(&data)], None));
        Self { dir, data }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, out: &Path, extra: &[&str]) -> Output {
        let mut args = vec![
            "train",
            "--data",
            s(&self.data),
            "--out",
            s(out),
            "--dim",
            "8",
            "--d1",
            "4",
            "--d2",
            "8",
            "--batch-size",
            "64",
        ];
        if !extra.contains(&"--lr") {
            args.extend(["--lr", "0.01"]);
        }
        args.extend_from_slice(extra);
        cosrec(&args, None)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_log(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn preprocess_reports_stats_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("ratings.dat");
    write_movielens(&raw);
    let a = dir.path().join("a.cosrec");
    let b = dir.path().join("b.cosrec");
    let stdout = ok(&cosrec(&["preprocess", "--input", s(&raw), "--output", s(&a), "--seed", "7"], None));
    ok(&cosrec(&["preprocess", "--input", s(&raw), "--output", s(&b), "--seed", "7"], None));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let stats: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(stats["users"], 40);
    assert_eq!(stats["items"], 40);
    assert_eq!(stats["actions"], 800);
    let on_disk = fs::read_to_string(dir.path().join("a.cosrec.stats.json")).unwrap();
    assert_eq!(on_disk.trim(), stdout.trim());
}

#[test]
fn preprocess_missing_input_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.dat");
    let o = cosrec(&["preprocess", "--input", s(&missing), "--output", s(&dir.path().join("x"))], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.dat"), "{}", stderr(&o));
}

#[test]
fn preprocess_parse_error_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("bad.dat");
    fs::write(&raw, "1::2::3\n").unwrap();
    let o = cosrec(&["preprocess", "--input", s(&raw), "--output", s(&dir.path().join("x"))], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn gowalla_thresholds_are_flags() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("checkins.txt");
    let mut text = String::new();
    for u in 0..6 {
        for t in 0..4 {
            text.push_str(&format!("{u}\t2010-10-19T23:55:{:02}Z\t30.2\t-97.7\t{}\n", t * 10 + u, 500 + (u + t) % 4));
        }
    }
    fs::write(&raw, text).unwrap();
    let out = dir.path().join("g.cosrec");
    let base = ["preprocess", "--dataset", "gowalla", "--input", s(&raw), "--output", s(&out)];
    // the default 15/15 thresholds leave nothing
    assert_eq!(cosrec(&base, None).status.code(), Some(1));
    let mut args = base.to_vec();
    args.extend(["--min-user", "2", "--min-item", "2"]);
    let stats: serde_json::Value = serde_json::from_str(ok(&cosrec(&args, None)).trim()).unwrap();
    assert_eq!(stats["actions"], 24);
}

#[test]
fn data_dir_env_supplies_default_paths() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("ml-1m")).unwrap();
    write_movielens(&dir.path().join("ml-1m/ratings.dat"));
    ok(&cosrec(&["preprocess"], Some(dir.path())));
    assert!(dir.path().join("ml1m.cosrec").is_file());
    let line = ok(&cosrec(&["evaluate", "--model", "poprec"], Some(dir.path())));
    assert!(line.contains("\"map\":"));
    // the flag overrides the environment
    let other = tempfile::tempdir().unwrap();
    let o = cosrec(&["evaluate", "--model", "poprec", "--data-dir", s(other.path())], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_paths_without_data_dir_are_usage_errors() {
    let o = cosrec(&["evaluate", "--model", "poprec"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--data"));
    assert_eq!(cosrec(&["train"], None).status.code(), Some(2));
    assert_eq!(cosrec(&["frobnicate"], None).status.code(), Some(2));
    let o = cosrec(&["train", "--out", "x", "--first-kernel", "4"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn training_logs_decreasing_loss_and_runs_are_identical() {
    let fx = Fixture::new();
    let (a, b) = (fx.path("a.ckpt"), fx.path("b.ckpt"));
    let extra = ["--epochs", "50", "--validation-fraction", "0", "--seed", "3"];
    let metrics_a = ok(&fx.train(&a, &extra));
    let metrics_b = ok(&fx.train(&b, &extra));
    assert_eq!(metrics_a, metrics_b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let log = read_log(&fx.path("a.ckpt.log.jsonl"));
    assert_eq!(log.len(), 50);
    assert_eq!(fs::read(fx.path("a.ckpt.log.jsonl")).unwrap(), fs::read(fx.path("b.ckpt.log.jsonl")).unwrap());
    let first = log[0]["loss"].as_f64().unwrap();
    let last = log[49]["loss"].as_f64().unwrap();
    assert!(first > last, "{first} -> {last}");
    assert_eq!(log[0]["epoch"], 1);
    assert!(log[0]["val_map"].is_null());
}

#[test]
fn validation_metrics_are_logged() {
    let fx = Fixture::new();
    let out = fx.path("v.ckpt");
    let log = fx.path("v.jsonl");
    ok(&fx.train(&out, &["--epochs", "3", "--log", s(&log), "--patience", "0"]));
    let log = read_log(&log);
    assert_eq!(log.len(), 3);
    for r in &log {
        assert!(r["val_map"].as_f64().is_some());
        assert!(r["val_prec1"].as_f64().is_some());
    }
}

#[test]
fn evaluate_prints_four_decimals_deterministically() {
    let fx = Fixture::new();
    let ckpt = fx.path("m.ckpt");
    ok(&fx.train(&ckpt, &["--epochs", "2"]));
    let args = ["evaluate", "--data", s(&fx.data), "--checkpoint", s(&ckpt)];
    let first = ok(&cosrec(&args, None));
    assert_eq!(first, ok(&cosrec(&args, None)));
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    assert_eq!(first, ok(&cosrec(&threaded, None)));

    let v: serde_json::Value = serde_json::from_str(first.trim()).unwrap();
    for key in ["map", "prec@1", "prec@5", "prec@10", "recall@1", "recall@5", "recall@10"] {
        let raw = first.split(&format!("\"{key}\":")).nth(1).unwrap();
        let num = raw.split([',', '}']).next().unwrap();
        assert_eq!(num.split('.').nth(1).map(str::len), Some(4), "{key}: {num}");
        assert!(v[key].as_f64().is_some());
    }
    assert_eq!(v["users"], 40);
    assert!(v["map"].as_f64().unwrap() > 0.0);

    let pop = ok(&cosrec(&["evaluate", "--data", s(&fx.data), "--model", "poprec"], None));
    assert!(pop.starts_with("{\"users\":40,\"map\":"));
}

#[test]
fn evaluate_rejects_vocabulary_mismatch() {
    let fx = Fixture::new();
    let ckpt = fx.path("m.ckpt");
    ok(&fx.train(&ckpt, &["--epochs", "1"]));
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("r.dat");
    let text: String = (0..6).flat_map(|u| (0..5).map(move |i| format!("{u}::{i}::1::{}\n", i * 7 + u))).collect();
    fs::write(&raw, text).unwrap();
    let other = dir.path().join("o.cosrec");
    ok(&cosrec(&["preprocess", "--input", s(&raw), "--output", s(&other), "--min-user", "1", "--min-item", "1"], None));
    let o = cosrec(&["evaluate", "--data", s(&other), "--checkpoint", s(&ckpt)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("vocabulary"), "{}", stderr(&o));
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let fx = Fixture::new();
    let bad = fx.path("bad.ckpt");
    fs::write(&bad, b"COSRECCK\x01\x00").unwrap();
    let o = cosrec(&["evaluate", "--data", s(&fx.data), "--checkpoint", s(&bad)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("truncated"), "{}", stderr(&o));
}

#[test]
fn non_finite_training_aborts_with_status_1() {
    let fx = Fixture::new();
    let o = fx.train(&fx.path("x.ckpt"), &["--epochs", "5", "--lr", "1e38", "--validation-fraction", "0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("non-finite") || err.contains("NaN") || err.contains("inf"), "{err}");
    assert!(!fx.path("x.ckpt").exists());
}

#[test]
fn exported_filters_match_checkpoint() {
    let fx = Fixture::new();
    let ckpt = fx.path("k5.ckpt");
    ok(&fx.train(&ckpt, &["--epochs", "1", "--first-kernel", "5"]));
    let out = fx.path("filters");
    let args = ["export-filters", "--checkpoint", s(&ckpt), "--layer", "conv1_1", "--out", s(&out)];
    ok(&cosrec(&args, None));

    let model = Checkpoint::load_file(&ckpt).unwrap().model;
    let conv = model.conv_layer("conv1_1").unwrap();
    assert_eq!(conv.kernel(), 5);
    let index = fs::read_to_string(out.join("index.csv")).unwrap();
    let rows: Vec<&str> = index.lines().skip(1).collect();
    assert_eq!(rows.len(), conv.out_channels() * conv.in_channels());
    let inp = conv.in_channels();
    let mut first_pass = Vec::new();
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let (o, i): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        assert_eq!(f[2], "5");
        let text = fs::read_to_string(out.join(f[3])).unwrap();
        let grid: Vec<Vec<f32>> = text.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(grid.len(), 5);
        assert!(grid.iter().all(|r| r.len() == 5));
        let want = &conv.weight.data()[(o * inp + i) * 25..][..25];
        let got: Vec<f32> = grid.into_iter().flatten().collect();
        assert!(got.iter().zip(want).all(|(a, b)| a.to_bits() == b.to_bits()));
        first_pass.push(text);
    }
    ok(&cosrec(&args, None));
    let index_again = fs::read_to_string(out.join("index.csv")).unwrap();
    assert_eq!(index, index_again);

    let o = cosrec(&["export-filters", "--checkpoint", s(&ckpt), "--layer", "fc", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("conv1_1, conv1_2, conv2_1, conv2_2"), "{}", stderr(&o));
}

#[test]
fn one_by_one_layers_export_single_values() {
    let fx = Fixture::new();
    let ckpt = fx.path("k1.ckpt");
    ok(&fx.train(&ckpt, &["--epochs", "1"]));
    let out = fx.path("f11");
    ok(&cosrec(&["export-filters", "--checkpoint", s(&ckpt), "--layer", "conv2_1", "--out", s(&out)], None));
    let text = fs::read_to_string(out.join("filter_0_0.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(!text.contains(','));
}

//! End-to-end runs of the `slat` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slat"))
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].is_string());
    err
}

fn generate(dir: &Path, seed: &str) -> Output {
    slat(&[
        "generate",
        "--preset",
        "mini",
        "--subsets",
        "FD3",
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ])
}

fn data_paths(dir: &Path) -> (String, String) {
    let p = |f: &str| dir.join(f).to_str().unwrap().to_string();
    (p("FD3_train.csv"), p("FD3_test.csv"))
}

const QUICK: [&str; 8] = [
    "--model-preset",
    "tiny",
    "--epochs",
    "3",
    "--warmup-steps",
    "50",
    "--batch-size",
    "32",
];

#[test]
fn generate_is_reproducible_and_reports_a_summary() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let summary = ok_json(&generate(a.path(), "9"));
    ok_json(&generate(b.path(), "9"));
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["subsets"].as_array().unwrap().len(), 1);
    assert_eq!(summary["subsets"][0]["name"], "FD3");
    for f in [
        "FD3_train.csv",
        "FD3_test.csv",
        "FD3_meta.json",
        "spec.toml",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    // The written spec regenerates the same data.
    let c = tempfile::tempdir().unwrap();
    let spec = a.path().join("spec.toml");
    ok_json(&slat(&[
        "generate",
        "--spec",
        spec.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        c.path().to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(a.path().join("FD3_train.csv")).unwrap(),
        std::fs::read(c.path().join("FD3_train.csv")).unwrap()
    );
}

#[test]
fn train_evaluate_predict_and_export() {
    let data = tempfile::tempdir().unwrap();
    ok_json(&generate(data.path(), "2"));
    let (train, test) = data_paths(data.path());
    let ckpt = tempfile::tempdir().unwrap();
    let ckpt_path = ckpt.path().join("model");
    let ckpt_dir = ckpt_path.to_str().unwrap();

    let mut args = vec![
        "train", "--train", &train, "--test", &test, "--out", ckpt_dir, "--seed", "5",
    ];
    args.extend(QUICK);
    let trained = ok_json(&slat(&args));
    assert_eq!(trained["epochs"], 3);
    let rmse = trained["test_rmse"].as_f64().unwrap();

    let report_path = ckpt.path().join("eval.json");
    let report = ok_json(&slat(&[
        "evaluate",
        "--checkpoint",
        ckpt_dir,
        "--test",
        &test,
        "--out",
        report_path.to_str().unwrap(),
    ]));
    assert_eq!(report["rmse_mean"].as_f64().unwrap(), rmse);
    assert_eq!(report["runs"][0]["seed"], 5);
    assert_eq!(report["ci"]["values"].as_array().unwrap().len(), 31);
    let saved: Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(saved, report);

    // Predicting from a window file without the rul column.
    let window_csv = ckpt.path().join("window.csv");
    let text = std::fs::read_to_string(&test).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let first_unit = lines
        .clone()
        .next()
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .to_string();
    let keep = header.split(',').count() - 1;
    let strip = |l: &str| l.split(',').take(keep).collect::<Vec<_>>().join(",");
    let mut body = vec![strip(header)];
    body.extend(
        lines
            .filter(|l| l.starts_with(&format!("{first_unit},")))
            .map(strip),
    );
    std::fs::write(&window_csv, body.join("\n") + "\n").unwrap();
    let out = slat(&[
        "predict",
        "--checkpoint",
        ckpt_dir,
        "--window",
        window_csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let predicted: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(predicted.is_finite());
    let per_unit = |unit: &str| {
        let out = slat(&[
            "predict",
            "--checkpoint",
            ckpt_dir,
            "--window",
            &test,
            "--unit",
            unit,
        ]);
        String::from_utf8(out.stdout)
            .unwrap()
            .trim()
            .parse::<f64>()
            .unwrap()
    };
    assert_eq!(per_unit(&first_unit), predicted);
    let err = error_json(&slat(&[
        "predict",
        "--checkpoint",
        ckpt_dir,
        "--window",
        &test,
    ]));
    assert_eq!(err["error"], "contract");

    let rtf = ckpt.path().join("rtf.csv");
    let train_text = std::fs::read_to_string(&train).unwrap();
    let unit = train_text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .to_string();
    let rows = train_text
        .lines()
        .skip(1)
        .filter(|l| l.starts_with(&format!("{unit},")))
        .count();
    let out = ok_json(&slat(&[
        "export-rtf",
        "--checkpoint",
        ckpt_dir,
        "--data",
        &train,
        "--unit",
        &unit,
        "--out",
        rtf.to_str().unwrap(),
    ]));
    assert_eq!(out["rows"].as_u64().unwrap() as usize, rows - 8 + 1);
    let csv = std::fs::read_to_string(&rtf).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "interval,true_rul,predicted_rul,lower,upper,band_half_width"
    );
    assert_eq!(csv.lines().count(), rows - 8 + 2);
}

#[test]
fn multiple_runs_write_one_checkpoint_each() {
    let data = tempfile::tempdir().unwrap();
    ok_json(&generate(data.path(), "4"));
    let (train, test) = data_paths(data.path());
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    let mut args = vec![
        "train",
        "--train",
        &train,
        "--test",
        &test,
        "--out",
        dir,
        "--seed",
        "10",
        "--runs",
        "2",
        "--threads",
        "2",
    ];
    args.extend(QUICK);
    let report = ok_json(&slat(&args));
    let seeds: Vec<u64> = report["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![10, 11]);
    for run in ["run_00", "run_01"] {
        assert!(out.path().join(run).join("model.ckpt").is_file());
    }
    let again = ok_json(&slat(&[
        "evaluate",
        "--checkpoint",
        out.path().join("run_01").to_str().unwrap(),
        "--test",
        &test,
    ]));
    assert_eq!(again["rmse_mean"], report["runs"][1]["rmse"]);

    let mut single = vec![
        "train", "--train", &train, "--out", dir, "--seed", "1", "--runs", "2",
    ];
    single.extend(QUICK);
    assert_eq!(error_json(&slat(&single))["error"], "config");
}

#[test]
fn config_file_and_flags_combine() {
    let data = tempfile::tempdir().unwrap();
    ok_json(&generate(data.path(), "6"));
    let (train, _) = data_paths(data.path());
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("config.toml");
    std::fs::write(&cfg, "[model]\nd_model = 8\nheads = 2\nencoder_blocks = 1\ndecoder_blocks = 1\nffn_hidden = 8\nhead_hidden = 8\nwindow = 8\n\n[train]\nepochs = 2\nwarmup_steps = 10\n").unwrap();
    let dir = out.path().join("m");
    let summary = ok_json(&slat(&[
        "train",
        "--train",
        &train,
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "3",
        "--config",
        cfg.to_str().unwrap(),
        "--epochs",
        "1",
    ]));
    assert_eq!(summary["epochs"], 1);
    let recorded: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run_config.json")).unwrap())
            .unwrap();
    assert_eq!(recorded["model"]["d_model"], 8);
    assert_eq!(recorded["train"]["warmup_steps"], 10);
    assert_eq!(recorded["train"]["seed"], 3);

    std::fs::write(&cfg, "[model]\nd_modle = 8\n").unwrap();
    let err = error_json(&slat(&[
        "train",
        "--train",
        &train,
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "3",
        "--config",
        cfg.to_str().unwrap(),
    ]));
    assert_eq!(err["error"], "toml");
}

#[test]
fn failures_are_reported_as_json_on_stderr() {
    let out = slat(&["generate", "--preset", "mini", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "usage");

    let err = error_json(&slat(&[
        "evaluate",
        "--checkpoint",
        "/nonexistent/ckpt",
        "--test",
        "/nonexistent/t.csv",
    ]));
    assert_eq!(err["error"], "io");

    let dir = tempfile::tempdir().unwrap();
    let err = error_json(&slat(&[
        "generate",
        "--preset",
        "mini",
        "--subsets",
        "FD9",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(err["error"], "config");

    let err = error_json(&slat(&[
        "generate",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(err["error"], "config");

    let help = slat(&["--help"]);
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("export-rtf"));
}

//! The `ssvep` binary driven through its subcommands.

use std::path::Path;
use std::process::{Command, Output};

use ssvep_ensemble::protocol::{ExperimentReport, OnlineReport};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssvep"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "ssvep {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn clean_subject_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let eval = dir.path().join("eval.json");
    let model = dir.path().join("model.json");
    let online = dir.path().join("online.json");
    assert!(ok(&[
        "synth",
        "--profile",
        "clean",
        "--seed",
        "7",
        "--out",
        p(&data)
    ])
    .contains("125 trials"));

    let table = ok(&["evaluate", "--data", p(&data), "--out", p(&eval)]);
    let rows = table
        .lines()
        .filter(|l| l.starts_with("svm-") || l.starts_with("rf/"))
        .count();
    assert_eq!(rows, 8, "{table}");
    assert!(table.lines().any(|l| l.starts_with("ensemble")), "{table}");
    let report: ExperimentReport = serde_json::from_slice(&std::fs::read(&eval).unwrap()).unwrap();
    assert!(report
        .variants
        .iter()
        .all(|v| report.ensemble.accuracy >= v.accuracy));
    assert!(report.ensemble.accuracy >= 0.95);

    ok(&["train", "--data", p(&data), "--out", p(&model)]);
    let frames = ok(&[
        "online",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--no-timing",
        "--report",
        p(&online),
    ]);
    assert_eq!(frames.lines().filter(|l| l.starts_with("CMD ")).count(), 25);
    assert_eq!(frames.lines().last(), Some("END"));
    let replay: OnlineReport = serde_json::from_slice(&std::fs::read(&online).unwrap()).unwrap();
    let batch: Vec<_> = report.trials.iter().map(|t| t.predicted).collect();
    assert_eq!(replay.predictions(), batch);
}

#[test]
fn evaluate_and_online_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("m.json");
    ok(&[
        "synth",
        "--profile",
        "moderate",
        "--seed",
        "3",
        "--out",
        p(&data),
    ]);
    let eval = |name: &str| {
        let out = dir.path().join(name);
        ok(&["evaluate", "--data", p(&data), "--out", p(&out)]);
        std::fs::read(out).unwrap()
    };
    assert_eq!(eval("a.json"), eval("b.json"));
    ok(&["train", "--data", p(&data), "--out", p(&model)]);
    let replay = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "online",
            "--model",
            p(&model),
            "--data",
            p(&data),
            "--no-timing",
            "--report",
            p(&out),
        ]);
        std::fs::read(out).unwrap()
    };
    assert_eq!(replay("x.json"), replay("y.json"));
}

#[test]
fn report_renders_cohorts_and_itr() {
    let dir = tempfile::tempdir().unwrap();
    let mut inputs = Vec::new();
    for seed in ["1", "2"] {
        let data = dir.path().join(format!("d{seed}"));
        let out = dir.path().join(format!("r{seed}.json"));
        ok(&[
            "synth",
            "--profile",
            "moderate",
            "--seed",
            seed,
            "--out",
            p(&data),
        ]);
        ok(&["evaluate", "--data", p(&data), "--out", p(&out)]);
        inputs.push(out);
    }
    let text = ok(&[
        "report",
        "--input",
        p(&inputs[0]),
        "--input",
        p(&inputs[1]),
        "--format",
        "markdown",
    ]);
    assert!(text.contains("| ensemble"), "{text}");
    assert!(text.to_lowercase().contains("best"), "{text}");
    let csv = ok(&[
        "report",
        "--input",
        p(&inputs[0]),
        "--format",
        "csv",
        "--time-base",
        "compute:0.386",
    ]);
    assert!(csv.contains("compute time"), "{csv}");

    let stim = ok(&["report", "--accuracy", "0.8"]);
    assert!(
        stim.contains("7.956") && stim.contains("stimulation time"),
        "{stim}"
    );
}

#[test]
fn bad_input_fails_with_a_useful_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[preprocess]\nharmonics = [1, 99]\n").unwrap();
    let out = run(&["--config", p(&cfg), "report", "--accuracy", "0.8"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("preprocess.harmonics"));

    let out = run(&["report", "--accuracy", "0.8", "--time-base", "compute:0"]);
    assert!(!out.status.success());

    let data = dir.path().join("data");
    let model = dir.path().join("all.json");
    ok(&[
        "synth",
        "--profile",
        "clean",
        "--seed",
        "1",
        "--out",
        p(&data),
    ]);
    ok(&["train", "--data", p(&data), "--out", p(&model), "--all"]);
    let out = run(&["online", "--model", p(&model), "--data", p(&data)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--split all"));
    let frames = ok(&[
        "online",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--split",
        "all",
    ]);
    assert_eq!(frames.lines().count(), 126);
}

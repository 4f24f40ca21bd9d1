use std::path::Path;
use std::process::{Command, Output};

fn fedsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fedsim(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_files(dir: &Path, prefix: &str) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(prefix) && n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--n", "40", "--size", "16", "--seed", "3", "--out", s(&data)]);
    assert!(data.join("labels.csv").exists());

    let stats = tmp.path().join("stats");
    ok(&["stats", "--data", s(&data), "--out", s(&stats)]);
    let counts = std::fs::read_to_string(stats.join("label_counts.csv")).unwrap();
    assert_eq!(counts.lines().count(), 17);
    let cosine = std::fs::read_to_string(stats.join("cosine.csv")).unwrap();
    assert_eq!(cosine.lines().count(), 17);

    let part = ok(&["partition", "--data", s(&data), "--clients", "4", "--skewness", "50", "--small-skew"]);
    let text = String::from_utf8(part.stdout).unwrap();
    assert!(text.starts_with("client,label,count,monopoly"));
    assert_eq!(text.lines().count(), 1 + 4 * 16);

    let runs = tmp.path().join("runs");
    let args = [
        "run", "--data", s(&data), "--out", s(&runs), "--model", "mlp", "--algorithm", "FedProx", "--rounds", "3",
        "--clients", "4", "--c-fraction", "0.5", "--client-epochs", "1", "--skewness", "40", "--no-timing",
    ];
    ok(&args);
    let files = csv_files(&runs, "run-");
    assert_eq!(files.len(), 1);
    let first = std::fs::read(runs.join(&files[0])).unwrap();
    ok(&args);
    assert_eq!(std::fs::read(runs.join(&files[0])).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("round,f1,accuracy,classification_accuracy,cumulative_bytes,wall_seconds"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn sweep_reports_failures_through_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--n", "30", "--size", "8", "--out", s(&data)]);
    let header = "DL Model,FL Algorithm,Epochs,Clients,Batch Size,C-Fraction,Skewness,Client Epochs,Small Skew,seed,mu";
    let good = "Linear,FedAvg,2,3,4,1,0,1,FALSE,0,0.01\nMLP,BSP-max,2,3,8,NA,40,NA,TRUE,1,0.01\nLinear,Centralized,2,NA,4,NA,NA,NA,NA,0,0.01\n";

    let cfg = tmp.path().join("good.csv");
    std::fs::write(&cfg, format!("{header}\n{good}")).unwrap();
    let out_dir = tmp.path().join("good");
    ok(&["sweep", "--config", s(&cfg), "--data", s(&data), "--out", s(&out_dir), "--jobs", "2"]);
    assert_eq!(csv_files(&out_dir, "run-").len(), 3);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",ok")));

    let cfg = tmp.path().join("bad.csv");
    std::fs::write(&cfg, format!("{header}\n{good}Linear,FedAvg,2,99,4,1,0,1,FALSE,0,0.01\n")).unwrap();
    let out_dir = tmp.path().join("bad");
    let out = fedsim(&["sweep", "--config", s(&cfg), "--data", s(&data), "--out", s(&out_dir)]);
    assert!(!out.status.success());
    assert_eq!(csv_files(&out_dir, "run-").len(), 3);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.lines().last().unwrap().contains("error"));
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fedsim(&["stats", "--data", s(&tmp.path().join("missing")), "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!fedsim(&["run", "--algorithm", "gossip", "--data", "x", "--out", "y"]).status.success());
}

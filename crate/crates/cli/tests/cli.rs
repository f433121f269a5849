use std::path::Path;
use std::process::Command;

fn toll_lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toll-lab"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.json");
    let mut scenario = tcs_core::sim::ScenarioConfig::desk();
    scenario.population = 60;
    scenario.jam_accumulation = 56.0;
    let spec = serde_json::json!({
        "scenario": scenario,
        "episode": { "horizon_days": 8 },
        "bo": { "n_init": 3, "n_iter": 2, "candidates": 64 },
        "train": { "n_envs": 2, "n_steps": 8, "batch_size": 8, "n_epochs": 1 },
        "iterations": 1
    });
    std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    path
}

#[test]
fn nt_run_writes_files_and_reports_na_price() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("nt");
    let res = toll_lab()
        .args(["nt", "--config", cfg.to_str().unwrap(), "--seeds", "1,2", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("price NA"), "{stdout}");
    let days = std::fs::read_to_string(out.join("nt_days.csv")).unwrap();
    assert_eq!(days.lines().count(), 1 + 2 * 8);
    assert!(out.join("nt_metrics.csv").exists());
}

#[test]
fn train_then_transfer_and_rerun_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let run = |args: &[&str]| {
        let res = toll_lab().args(args).output().unwrap();
        assert!(res.status.success(), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        run(&["train", "--config", cfg, "--seeds", "4", "--caps", "t_l1", "--out", out.to_str().unwrap()]);
    }
    for f in ["train_curves.csv", "train_days.csv", "train_trace.ndjson", "train_policy_seed4.ckpt", "train_metrics.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ckpt = a.join("train_policy_seed4.ckpt");
    let t = dir.path().join("t");
    run(&[
        "transfer",
        "--config",
        cfg,
        "--seeds",
        "4",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--capacity-mult",
        "0.9",
        "--out",
        t.to_str().unwrap(),
    ]);
    let metrics = std::fs::read_to_string(t.join("transfer_metrics.csv")).unwrap();
    assert!(metrics.contains("transferred") && metrics.contains("scratch"));
}

#[test]
fn transfer_with_wrong_dimension_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let ok = toll_lab().args(["train", "--config", cfg, "--seeds", "1", "--out", a.to_str().unwrap()]).output().unwrap();
    assert!(ok.status.success());
    let res = toll_lab()
        .args([
            "transfer",
            "--config",
            cfg,
            "--action-dim",
            "3",
            "--checkpoint",
            a.join("train_policy_seed1.ckpt").to_str().unwrap(),
            "--out",
            dir.path().join("t").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!res.status.success());
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("146") && err.contains("148"), "{err}");
}

#[test]
fn bad_arguments_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["nt", "--out", out, "--capacity-mult", "-1"],
        vec!["train", "--out", out, "--action-dim", "2"],
        vec!["train", "--out", out, "--caps", "wobbly"],
        vec!["transfer", "--out", out],
    ] {
        let res = toll_lab().args(&args).output().unwrap();
        assert!(!res.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&res.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn bo_history_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("bo");
    let res = toll_lab()
        .args(["bo", "--config", cfg.to_str().unwrap(), "--seeds", "1", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let hist = std::fs::read_to_string(out.join("bo_history.csv")).unwrap();
    let mut lines = hist.lines();
    assert_eq!(lines.next().unwrap(), "config_hash,seed,iteration,M,mu,sigma,objective,running_best");
    assert_eq!(lines.count(), 5);
}

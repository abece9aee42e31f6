use std::path::Path;
use std::process::{Command, Output};

use fednewton::accounting::read_trace_csv;

fn fednewton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fednewton"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn fedavg_single_round_writes_header_and_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = fednewton(&[
        "run",
        "--method",
        "fedavg",
        "--dataset",
        "synthetic-iid",
        "--rounds",
        "1",
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = read(&dir.path().join("fedavg_synthetic-iid_3.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(
        lines[0],
        "round,comm_rounds,grad_evals,global_loss,step_size,method,seed"
    );
    assert!(lines[1].starts_with("0,0,0,"));
    // 5 active clients × 1 local step × 20 samples
    assert!(lines[2].starts_with("1,1,100,"));
    let rows = read_trace_csv(text.as_bytes()).unwrap();
    assert_eq!(rows[1].step_size, None);
    assert_eq!(rows[1].method, "fedavg");
}

#[test]
fn unknown_method_is_a_usage_error() {
    let out = fednewton(&["run", "--method", "newton"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown method"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = fednewton(&["run", "--no-such-flag", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "method = giant\nlocal_stepz = 3\n").unwrap();
    let out = fednewton(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("local_stepz"));
}

#[test]
fn missing_data_file_is_a_runtime_error() {
    let out = fednewton(&["run", "--dataset", "w8a", "--data-path", "/nonexistent/w8a"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!("# comment\nmethod = giant\nrounds = 7\nseed = 4\nout = {out_dir}\n"),
    )
    .unwrap();
    let out = fednewton(&["run", "--config", cfg.to_str().unwrap(), "--rounds", "2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows =
        read_trace_csv(read(&dir.path().join("giant_synthetic-iid_4.csv")).as_bytes()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2].comm_rounds, 6);
}

#[test]
fn outputs_identical_across_reruns_and_worker_counts() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, workers) in dirs.iter().zip(["1", "1", "4"]) {
        let out = fednewton(&[
            "run",
            "--method",
            "localnewton-global-ls",
            "--dataset",
            "synthetic-het",
            "--rounds",
            "5",
            "--seed",
            "8",
            "--workers",
            workers,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let name = "localnewton-global-ls_synthetic-het_8.csv";
    let first = std::fs::read(dirs[0].path().join(name)).unwrap();
    for dir in &dirs[1..] {
        assert_eq!(first, std::fs::read(dir.path().join(name)).unwrap());
    }
}

#[test]
fn single_cell_grid_equals_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let common = [
        "--method",
        "giant-local-global-ls",
        "--rounds",
        "4",
        "--seed",
        "2",
        "--local-steps",
        "3",
        "--step-size",
        "0.5",
        "--out",
        out_dir,
    ];
    let run: Vec<&str> = ["run"].iter().chain(&common).copied().collect();
    assert!(fednewton(&run).status.success());
    let grid: Vec<&str> = [
        "grid",
        "--grid-step-sizes",
        "0.5",
        "--grid-local-steps",
        "3",
    ]
    .iter()
    .chain(&common)
    .copied()
    .collect();
    let out = fednewton(&grid);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let plain =
        std::fs::read(dir.path().join("giant-local-global-ls_synthetic-iid_2.csv")).unwrap();
    let cell = std::fs::read(
        dir.path()
            .join("giant-local-global-ls_synthetic-iid_2_step0.5_local3.csv"),
    )
    .unwrap();
    assert_eq!(plain, cell);
    let summary = read(
        &dir.path()
            .join("giant-local-global-ls_synthetic-iid_2_summary.csv"),
    );
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().ends_with(",true"));
}

#[test]
fn hessian_similarity_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = fednewton(&[
        "hessian-similarity",
        "--clients",
        "6",
        "--draws",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = read(&dir.path().join("hessian_similarity_synthetic-iid_0.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,mean_error,rms_frobenius,identity_baseline");
    assert_eq!(lines.len(), 7);
    assert!(lines[6].starts_with("6,0.0000000000000000e0,0.0000000000000000e0,"));
}

#[test]
fn help_exits_zero() {
    let out = fednewton(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("hessian-similarity"));
}

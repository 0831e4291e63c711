//! End-to-end tests of the bds binary and its exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn bds(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bds"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("bds runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn list_is_stable_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let a = bds(&["list"], dir.path());
    let b = bds(&["list"], dir.path());
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let text = stdout(&a);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows.len() >= 8);
    let p1 = rows.iter().find(|r| r.starts_with("P1")).unwrap();
    assert!(p1.contains('0'), "P1 row shows F* = 0: {p1}");
}

#[test]
fn run_defaults_terminate_at_the_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = bds(
        &["run", "--problem", "P1", "--solver", "coordinate-ds", "--seed", "3", "--out", "t.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("termination=floor"));
    assert!(dir.path().join("t.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["result"]["termination"], "floor");
    assert_eq!(summary["run_spec"]["problem"], "P1");
    assert!(summary["result"]["seed"].is_u64());
}

#[test]
fn tiny_budget_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bds(
        &["run", "--problem", "P1", "--solver", "coordinate-ds", "--budget", "3", "--out", "t.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_solver_exits_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = bds(&["run", "--problem", "P1", "--solver", "nope", "--out", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bds(
        &[
            "run", "--problem", "P1", "--solver", "coordinate-ds", "--set", "warp=9",
            "--out", "t.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn replaying_a_summary_reproduces_the_trace_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let first = bds(
        &[
            "run", "--problem", "P2", "--solver", "random-ds", "--seed", "11", "--x0", "start:2",
            "--out", "a.csv",
        ],
        dir.path(),
    );
    assert_eq!(first.status.code(), Some(0));
    let replay = bds(
        &["run", "--spec", "a.summary.json", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(replay.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn certify_passes_on_a_dense_run_near_the_kink() {
    let dir = tempfile::tempdir().unwrap();
    let run = bds(
        &[
            "run", "--problem", "P8", "--solver", "dense-ds", "--eps", "1e-4", "--seed", "5",
            "--budget", "4000", "--set", "alpha_min=0.632", "--set", "iter_cap=300",
            "--set", "oracle=injected", "--out", "p8.csv",
        ],
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    // delta = 2 sqrt(l_f eps / c), target = 4 sqrt(l_f eps c) at
    // l_f = 1, eps = 1e-4, c = 1e-3
    let cert = bds(
        &[
            "certify", "--trace", "p8.csv", "--delta", "0.632", "--epsilon", "1.265e-3",
            "--samples", "64", "--seed", "1",
        ],
        dir.path(),
    );
    assert_eq!(cert.status.code(), Some(0), "{}", String::from_utf8_lossy(&cert.stderr));
    let cert_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p8.cert.json")).unwrap())
            .unwrap();
    assert_eq!(cert_json["passed"], true);
    assert_eq!(cert_json["samples_used"], 64);
}

#[test]
fn certify_with_zero_samples_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = bds(
        &["run", "--problem", "P8", "--solver", "dense-ds", "--budget", "50", "--set",
          "iter_cap=10", "--out", "p8.csv"],
        dir.path(),
    );
    assert!(run.status.code() == Some(0) || run.status.code() == Some(2));
    let cert = bds(
        &["certify", "--trace", "p8.csv", "--delta", "0.5", "--epsilon", "1e-3", "--samples", "0"],
        dir.path(),
    );
    assert_eq!(cert.status.code(), Some(1));
}

#[test]
fn certify_far_from_stationarity_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    // a single-row trace at x = 0.5 on P8: gradient 1 everywhere nearby
    std::fs::write(
        dir.path().join("flat.csv"),
        "k,upper_evals,success,alpha,F_tilde,x_1\n0,1,0,1.0,0.5,5.0000000000000000e-1\n",
    )
    .unwrap();
    let cert = bds(
        &[
            "certify", "--trace", "flat.csv", "--problem", "P8", "--delta", "0.1", "--epsilon",
            "1e-3", "--samples", "32",
        ],
        dir.path(),
    );
    assert_eq!(cert.status.code(), Some(3));
}

#[test]
fn bench_with_small_config_populates_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"solvers": ["coordinate-ds"], "problems": ["P1", "P6"], "lltols": [1e-3],
            "conv_tols": [1e-3], "starts": 2, "budget": 80, "master_seed": 4}"#,
    )
    .unwrap();
    let out = bds(&["bench", "--config", "cfg.json", "--out", "exp"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("exp/table.csv").exists());
    assert!(dir.path().join("exp/profiles_perf_1e-3.csv").exists());
    assert!(dir.path().join("exp/profiles_data_1e-3.csv").exists());
    assert!(dir.path().join("exp/figures/performance_profiles_tol1e-3.svg").exists());
    assert!(dir.path().join("exp/figures/data_profiles_tol1e-3.svg").exists());
    let table = std::fs::read_to_string(dir.path().join("exp/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 4); // header + 1 solver x 2 problems x 2 starts

    // rerunning the same config reproduces the score table bit for bit
    let again = bds(&["bench", "--config", "cfg.json", "--out", "exp2"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    let t1 = std::fs::read(dir.path().join("exp/table.csv")).unwrap();
    let t2 = std::fs::read(dir.path().join("exp2/table.csv")).unwrap();
    assert_eq!(t1, t2);
}

#[test]
fn bench_rejects_malformed_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"solverz": []}"#).unwrap();
    let out = bds(&["bench", "--config", "bad.json", "--out", "exp"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

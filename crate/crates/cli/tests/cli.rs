use std::path::PathBuf;
use std::process::{Command, Output};

fn turbo_bec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turbo-bec")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("turbo-bec-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn threshold_of_regular_rate_half() {
    let v = stdout_json(&turbo_bec(&["threshold", "--profile", "f2=1", "--pattern", "1,0"]));
    assert!((v["p_th"].as_f64().unwrap() - 0.4729).abs() < 5e-4);
    assert_eq!(v["pattern"], "1,0");
    assert!((v["coding_rate"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn threshold_csv_has_one_row() {
    let out = turbo_bec(&["threshold", "--rate", "0.5", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("p_th,"));
}

#[test]
fn rejected_preconditions_exit_nonzero() {
    for args in [
        &["threshold", "--code", "1,9/7"][..],
        &["threshold", "--pattern", "0,0"],
        &["threshold", "--profile", "f2=0.5"],
        &["threshold", "--rate", "0.2", "--profile", "f2=1"],
        &["threshold", "--rate", "0.5", "--pattern", "1,1", "--profile", "f2=1"],
        &["optimize", "--generations", "1"],
        &["simulate", "--K", "4", "--p0", "0.3", "--decoder", "viterbi"],
        &["simulate", "--K", "4", "--p0", "1.5"],
        &["interleave", "--K", "0"],
    ] {
        let out = turbo_bec(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
}

#[test]
fn analyze_lists_alphabets_and_grid() {
    let v = stdout_json(&turbo_bec(&["analyze", "--grid", "3"]));
    assert_eq!(v["forward_alphabet"].as_array().unwrap().len(), 5);
    assert_eq!(v["grid"].as_array().unwrap().len(), 9);
    assert_eq!(v["forward_matrix"][0][0], "1 - pq");

    let out = turbo_bec(&["analyze", "--grid", "2", "--format", "csv", "--pattern", "1,0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "p,q,pattern,P_ext");
    assert_eq!(data.len(), 5);
}

#[test]
fn interleave_writes_permutation_and_summary() {
    let path = scratch("pi.txt");
    let out = turbo_bec(&["interleave", "--K", "50", "--profile", "f2=0.8,f4=0.2", "--pattern", "1,0", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut perm: Vec<usize> = std::fs::read_to_string(&path).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(perm.len(), 120);
    perm.sort_unstable();
    assert_eq!(perm, (1..=120).collect::<Vec<_>>());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path.with_extension("txt.json")).unwrap()).unwrap();
    assert_eq!(summary["N"], 120);
    let g = summary["girth"].as_u64().unwrap();
    assert!(g >= summary["girth_lower_bound"].as_u64().unwrap() && g <= summary["girth_upper_bound"].as_u64().unwrap());
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--K", "64", "--p0", "0.2,0.7", "--max-trials", "300", "--seed", "3", "--format", "csv"];
    let a = turbo_bec(&args);
    let b = turbo_bec(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "p0,trials,frame_errors,fer,fer_lo,fer_hi,ber,mean_iters");
    assert_eq!(rows.len(), 3);
}

#[test]
fn short_optimize_run_streams_generations() {
    let out = turbo_bec(&["optimize", "--rate", "0.5", "--generations", "2", "--population", "6", "--dmax", "4", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<serde_json::Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[3]["final"], true);
    assert!(lines[3]["p_th"].as_f64().unwrap() >= lines[2]["p_th"].as_f64().unwrap() - 1e-3);
}

use std::fs;
use std::process::{Command, Output};

fn bvo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvo")).args(args).output().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON object")
}

#[test]
fn run_reads_config_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "version = 1\nproblem = \"contamination\"\nmethod = \"sa\"\nruns = 5\niters = 4\ninit_points = 3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = bvo(&["run", "--config", cfg.to_str().unwrap(), "--runs", "2", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("contamination_sa_summary.csv")).unwrap();
    assert!(summary.lines().nth(2).unwrap().starts_with("contamination,sa,0.0,2,0,"));
    assert!(out_dir.join("contamination_sa_run1.jsonl").exists());
    assert!(!out_dir.join("contamination_sa_run2.jsonl").exists());

    let agg = dir.path().join("agg");
    let traces: Vec<String> = (0..2).map(|r| out_dir.join(format!("contamination_sa_run{r}.jsonl")).display().to_string()).collect();
    let mut args = vec!["aggregate", "--out", agg.to_str().unwrap()];
    args.extend(traces.iter().map(String::as_str));
    assert!(bvo(&args).status.success());
    assert_eq!(fs::read(agg.join("all_curves.csv")).unwrap(), fs::read(out_dir.join("contamination_sa_curves.csv")).unwrap());
}

#[test]
fn failures_exit_nonzero_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let v = error_json(&bvo(&["run", "--problem", "sudoku"]));
    assert_eq!(v["error"], "usage");

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "version = 7\n").unwrap();
    let v = error_json(&bvo(&["run", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["error"], "version");

    let v = error_json(&bvo(&["run", "--runs", "0", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(v["error"], "config");

    let missing = dir.path().join("missing.jsonl");
    let v = error_json(&bvo(&["aggregate", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
    assert_eq!(v["error"], "io");
}

#[test]
fn config_dump_is_a_loadable_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = bvo(&["config"]);
    assert!(out.status.success());
    let path = dir.path().join("inst.toml");
    fs::write(&path, &out.stdout).unwrap();
    let run = bvo(&[
        "run", "--problem", "ising", "--method", "rs", "--runs", "1", "--iters", "2", "--init", "2",
        "--instances", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn scale_refuses_parallel_timing() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let v = error_json(&bvo(&["scale", "--jobs", "2", "--out", csv.to_str().unwrap()]));
    assert_eq!(v["error"], "config");
    let v = error_json(&bvo(&["scale", "--sizes", "4,8,6,10", "--out", csv.to_str().unwrap()]));
    assert_eq!(v["error"], "config");
}

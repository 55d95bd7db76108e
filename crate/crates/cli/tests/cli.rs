use std::path::PathBuf;
use std::process::{Command, Output};

use locallll::corpus;
use locallll::format::{parse_instance, serialize_instance};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_locallll"))
}

fn instances() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn inst(name: &str) -> String {
    instances().join(format!("{name}.instance")).display().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bundled_files_match_the_corpus() {
    for name in ["pair", "path3", "cycle-5", "chain-4", "two-pairs", "chain-counterexample-6"] {
        let text = std::fs::read_to_string(inst(name)).unwrap();
        let file = parse_instance(&text).unwrap();
        assert_eq!(file.instance, corpus::by_name(name).unwrap(), "{name}");
        let again = serialize_instance(&file).unwrap();
        assert_eq!(serialize_instance(&parse_instance(&again).unwrap()).unwrap(), again);
    }
}

#[test]
fn exact_prints_pair_table() {
    let o = run(&["exact", "--instance", &inst("pair")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0 0 1/3\n0 1 1/3\n1 0 1/3\n");
}

#[test]
fn sample_is_byte_identical_across_invocations_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("s{i}.txt"));
        let o = run(&[
            "--threads", threads, "sample", "--instance", &inst("cycle-5"), "--seed", "9", "--runs", "10", "--out",
            out.to_str().unwrap(), "--mode", "oracle-check",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let samples = std::fs::read(&out).unwrap();
        let report = std::fs::read(dir.path().join(format!("s{i}.txt.report.json"))).unwrap();
        files.push((samples, report));
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
    let lines = String::from_utf8(files[0].0.clone()).unwrap();
    assert_eq!(lines.lines().count(), 10);
    assert!(lines.lines().all(|l| l.split(' ').count() == 5));
    let v: serde_json::Value = serde_json::from_slice(&files[0].1).unwrap();
    assert_eq!(v["seeds"].as_array().unwrap().len(), 10);
    assert_eq!(v["distribution"]["exact"][0]["p"], "1/11");
}

#[test]
fn zero_run_sample_emits_a_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty.txt");
    let o = run(&["sample", "--instance", &inst("pair"), "--runs", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("empty.txt.report.json")).unwrap()).unwrap();
    assert_eq!(v["runs"], 0);
    assert_eq!(std::fs::read_to_string(out).unwrap(), "");
}

#[test]
fn verify_pipeline_on_path3() {
    let o = run(&["verify", "--instance", &inst("path3"), "--suite", "pipeline", "--runs", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["suites"].as_array().unwrap().len(), 2);
}

#[test]
fn verify_checker_suites_on_path3() {
    for suite in ["augment", "estimate", "substitute", "gibbs"] {
        let o = run(&["verify", "--instance", &inst("path3"), "--suite", suite, "--runs", "5000"]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn usage_and_parse_errors_exit_2() {
    assert_eq!(run(&["exact", "--instance", &inst("pair"), "--frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.instance");
    std::fs::write(&bad, "var x 2 1/2 1/2\nvar y 2 0 1\n").unwrap();
    let o = run(&["exact", "--instance", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 2") && err.contains("strictly positive"), "{err}");
}

#[test]
fn simulate_lv_matches_rejection() {
    let g = instances().join("path3.graph");
    let o = run(&["simulate-lv", "--builtin", "no-adjacent-ones", "--graph", g.to_str().unwrap(), "--runs", "4000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["simulation"]["exact"].as_array().unwrap().len(), 5);
    assert_eq!(run(&["simulate-lv", "--builtin", "nope", "--graph", g.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn augment_and_bench_report() {
    let o = run(&[
        "augment", "--instance", &inst("chain-4"), "--region", "e1", "--eps", "1/2", "--gamma", "1/4", "--delta", "1/16", "--ell", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["region"][0], "e1");
    assert!(v["rarity"].as_str().unwrap().contains('/'));
    let o = run(&["bench", "--instance", &inst("two-pairs"), "--seeds", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["rounds"]["total"]["max"].as_u64().unwrap() >= v["rounds"]["initialization"]["max"].as_u64().unwrap());
}

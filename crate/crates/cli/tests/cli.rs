use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn adsem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adsem")).args(args).env_remove("ADSEM_SEED").output().unwrap()
}

fn adsem_env(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adsem")).args(args).env("ADSEM_SEED", seed).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_v1_factorial() {
    let fac = corpus("fac.ad");
    let o = adsem(&["run-v1", path(&fac), "n=5"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["store"]["res"], 120);
    assert_eq!(v["returned"], true);

    let human = adsem(&["--human", "run-v1", path(&fac), "n=3"]);
    assert!(String::from_utf8_lossy(&human.stdout).contains("res=6"));
}

#[test]
fn validate_profiles() {
    let grade = corpus("grade_thesis.ad");
    let o = adsem(&["validate", path(&grade), "--profile", "variant1"]);
    assert_eq!(code(&o), 1);
    let diags = stdout_json(&o);
    let codes: Vec<&str> = diags.as_array().unwrap().iter().map(|d| d["code"].as_str().unwrap()).collect();
    assert!(codes.contains(&"v1-forkjoin"));
    assert_eq!(code(&adsem(&["validate", path(&grade)])), 0);
    assert_eq!(code(&adsem(&["validate", path(&corpus("fac.ad")), "--profile", "variant1"])), 0);
}

#[test]
fn syntax_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ad");
    std::fs::write(&bad, "activity X { action ; }").unwrap();
    let o = adsem(&["validate", path(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(stdout_json(&o)[0]["location"].is_object());
}

#[test]
fn simulate_then_check_is_satisfied() {
    let dir = tempfile::tempdir().unwrap();
    for file in ["grade_thesis.ad", "fac.ad", "choice.ad"] {
        let ad = corpus(file);
        for (mode, actions) in [("interleaving", "instant"), ("concurrent", "twoPhase")] {
            for seed in ["0", "7"] {
                let trace = dir.path().join("run.jsonl");
                let o = adsem(&[
                    "simulate", path(&ad), "--mode", mode, "--actions", actions, "--seed", seed, "--bound", "60",
                    "-o", path(&trace),
                ]);
                assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
                let c = adsem(&["check-trace", path(&ad), path(&trace), "--variant", "token"]);
                assert_eq!(code(&c), 0, "{file} {mode} {actions} {seed}: {}", String::from_utf8_lossy(&c.stdout));
                assert!(stdout_json(&c)["verdict"].as_str().unwrap().starts_with("satisfied"));
            }
        }
    }
}

#[test]
fn tampered_token_trace_is_violated() {
    let dir = tempfile::tempdir().unwrap();
    let ad = corpus("grade_thesis.ad");
    let o = adsem(&["simulate", path(&ad), "--seed", "1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    // Drop the configuration right after the initial one.
    lines.remove(2);
    let trace = dir.path().join("t.jsonl");
    std::fs::write(&trace, lines.join("\n")).unwrap();
    let c = adsem(&["check-trace", path(&ad), path(&trace), "--variant", "token"]);
    assert_eq!(code(&c), 2);
    assert_eq!(stdout_json(&c)["verdict"], "violated");
}

#[test]
fn run_v2_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let ad = corpus("grade_thesis.ad");
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, r#"{"seed": 4, "decisions": {"D1": "passed"}}"#).unwrap();
    let trace = dir.path().join("v2.jsonl");
    let o = adsem(&["run-v2", path(&ad), path(&scenario), "-o", path(&trace)]);
    assert_eq!(code(&o), 0);
    let summary = stdout_json(&o);
    assert_eq!(summary["outcome"], "final");
    let events = summary["events"].as_array().unwrap();
    assert!(events.iter().any(|e| e["node"] == "CreateCert" && e["kind"] == "start"));
    let c = adsem(&["check-trace", path(&ad), path(&trace), "--variant", "v2", "--constraints"]);
    assert_eq!(code(&c), 0);
    let wrong = adsem(&["check-trace", path(&ad), path(&trace), "--variant", "token"]);
    assert_eq!(code(&wrong), 3);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let ad = corpus("grade_thesis.ad");
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, r#"{"seed": 0}"#).unwrap();
    let a = adsem_env(&["run-v2", path(&ad), path(&scenario)], "9");
    let b = adsem_env(&["run-v2", path(&ad), path(&scenario)], "9");
    assert_eq!(a.stdout, b.stdout);
    let header: Value = serde_json::from_str(String::from_utf8_lossy(&a.stdout).lines().next().unwrap()).unwrap();
    assert_eq!(header["params"]["seed"], 9);
    let bad = adsem_env(&["run-v2", path(&ad), path(&scenario)], "nine");
    assert_eq!(code(&bad), 3);
}

#[test]
fn v1_trace_with_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let fac = corpus("fac.ad");
    let trace = dir.path().join("fac.jsonl");
    assert_eq!(code(&adsem(&["run-v1", path(&fac), "n=4", "-o", path(&trace)])), 0);
    let c = adsem(&["check-trace", path(&fac), path(&trace), "--variant", "v1", "--constraints"]);
    assert_eq!(code(&c), 0);

    let text = std::fs::read_to_string(&trace).unwrap();
    let tampered = text.replacen("\"res\":1", "\"res\":7", 1);
    assert_ne!(tampered, text);
    std::fs::write(&trace, tampered).unwrap();
    let plain = adsem(&["check-trace", path(&fac), path(&trace), "--variant", "v1"]);
    assert_eq!(code(&plain), 0, "the inner semantics does not look at data");
    let strict = adsem(&["check-trace", path(&fac), path(&trace), "--variant", "v1", "--constraints"]);
    assert_eq!(code(&strict), 2);
    assert_eq!(stdout_json(&strict)["constraint"], "effect");
}

#[test]
fn reach_render_and_usage() {
    let dir = tempfile::tempdir().unwrap();
    let ad = corpus("grade_thesis.ad");
    let dot = dir.path().join("r.dot");
    let o = adsem(&["reach", path(&ad), "--dot", path(&dot)]);
    assert_eq!(code(&o), 0);
    let report = stdout_json(&o);
    assert_eq!(report["deadlocks"].as_array().unwrap().len(), 0);
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph"));
    let seq = adsem(&["reach", path(&ad), "--sequential"]);
    assert_eq!(stdout_json(&seq), report);

    let r = adsem(&["render", path(&ad)]);
    assert!(String::from_utf8_lossy(&r.stdout).starts_with("digraph"));

    assert_eq!(code(&adsem(&["frobnicate"])), 3);
    assert_eq!(code(&adsem(&["validate", "/nonexistent.ad"])), 3);
    assert_eq!(code(&adsem(&["simulate", path(&ad), "--mode", "sideways"])), 3);
    assert_eq!(code(&adsem(&["--help"])), 0);
}

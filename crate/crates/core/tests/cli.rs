use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const SINGLE: &str = r#"{
  "directed": true,
  "vertices": 2,
  "edges": [{"tail": 0, "head": 1, "capacity": 10.0}],
  "requests": [{"id": "r", "source": 0, "target": 1, "demand": 1.0, "value": 5.0}]
}"#;

const BOTTLENECK: &str = r#"{
  "directed": true,
  "vertices": 2,
  "edges": [{"tail": 0, "head": 1, "capacity": 1.0}],
  "requests": [
    {"id": "r1", "source": 0, "target": 1, "demand": 1.0, "value": 5.0},
    {"id": "r2", "source": 0, "target": 1, "demand": 1.0, "value": 3.0}
  ]
}"#;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn flowmech(args: &[&str], threads: Option<&str>) -> Out {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flowmech"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("FLOWMECH_THREADS", t);
    }
    let out = cmd.output().unwrap();
    Out {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_single_request() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "single.json", SINGLE);
    let out = flowmech(&["solve", "ufp", "--input", s(&inst), "--epsilon", "0.1"], None);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let doc = json(&out.stdout);
    assert_eq!(doc["primal_value"], 5.0);
    assert_eq!(doc["allocated"][0]["request"], "r");
    assert!(doc["dual_certificate"].as_f64().unwrap() >= 5.0);
}

#[test]
fn directed_lb_end_to_end() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("lb.json");
    let out = flowmech(&["gen", "directed-lb", "--B", "1", "--ell", "2", "--output", s(&inst)], None);
    assert_eq!(out.code, 0, "{}", out.stderr);

    let sol = dir.path().join("sol.json");
    let out = flowmech(
        &["solve", "ufp", "--input", s(&inst), "--epsilon", "0.1", "--stop", "exhaustion", "--output", s(&sol)],
        None,
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let doc = json(&std::fs::read_to_string(&sol).unwrap());
    assert_eq!(doc["primal_value"], 1.0);
    assert_eq!(doc["allocated"][0]["request"], "s1_0");

    let out = flowmech(&["oracle", "ufp", "--input", s(&inst)], None);
    assert_eq!(out.code, 0);
    assert_eq!(json(&out.stdout)["opt"], 2.0);

    let out = flowmech(&["verify", "--input", s(&inst), "--solution", s(&sol)], None);
    assert_eq!(out.code, 0);
    assert_eq!(json(&out.stdout)["feasible"], true);
}

#[test]
fn small_b_voids_the_guarantee_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("lb.json");
    assert_eq!(flowmech(&["gen", "directed-lb", "--B", "1", "--ell", "2", "--output", s(&inst)], None).code, 0);
    let out = flowmech(&["solve", "ufp", "--input", s(&inst)], None);
    assert_eq!(out.code, 0);
    assert_eq!(json(&out.stdout)["guarantee"], "void");
    let warning = json(out.stderr.lines().next().unwrap());
    assert_eq!(warning["warning"], "guarantee-void");
}

#[test]
fn b_below_one_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let body = SINGLE.replace("\"capacity\": 10.0", "\"capacity\": 0.5");
    let inst = write(&dir, "tiny.json", &body);
    let out = flowmech(&["solve", "ufp", "--input", s(&inst), "--no-normalize"], None);
    assert_eq!(out.code, 3, "{}", out.stderr);
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let broken = write(&dir, "broken.json", "{ not json");
    assert_eq!(flowmech(&["solve", "ufp", "--input", s(&broken)], None).code, 2);
    let inst = write(&dir, "single.json", SINGLE);
    assert_eq!(flowmech(&["solve", "ufp", "--input", s(&inst), "--epsilon", "1.5"], None).code, 2);
    assert_eq!(flowmech(&["solve", "ufp", "--input", s(&dir.path().join("missing.json"))], None).code, 2);
    assert_eq!(flowmech(&["frobnicate"], None).code, 2);
    assert_eq!(flowmech(&["audit", "--input", s(&inst), "--request", "nobody"], None).code, 2);
}

#[test]
fn oversized_oracle_exits_four() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("u.json");
    assert_eq!(flowmech(&["gen", "undirected-lb", "--B", "10", "--output", s(&inst)], None).code, 0);
    assert_eq!(flowmech(&["oracle", "ufp", "--input", s(&inst)], None).code, 4);
}

#[test]
fn payments_and_audit_on_bottleneck() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "b.json", BOTTLENECK);
    let out = flowmech(&["payments", "--input", s(&inst), "--epsilon", "0.5"], None);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let doc = json(&out.stdout);
    let winners = doc["winners"].as_array().unwrap();
    assert_eq!(winners.len(), 1);
    assert_eq!(winners[0]["request"], "r1");
    let p = winners[0]["payment"].as_f64().unwrap();
    assert!((p - 3.0).abs() <= 2.0 * doc["tolerance"].as_f64().unwrap().max(5e-6), "payment {p}");

    let out = flowmech(&["audit", "--input", s(&inst), "--epsilon", "0.5", "--request", "r2", "--grid", "20"], None);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let doc = json(&out.stdout);
    assert!(doc["gap"].as_f64().unwrap() <= 2.0 * doc["tolerance"].as_f64().unwrap());
}

#[test]
fn repeat_and_muca_round_trip_through_verify() {
    let dir = TempDir::new().unwrap();
    let ufp = dir.path().join("r.json");
    assert_eq!(flowmech(&["gen", "random", "--B", "4", "--seed", "7", "--output", s(&ufp)], None).code, 0);
    let sol = dir.path().join("rs.json");
    let out = flowmech(&["solve", "repeat", "--input", s(&ufp), "--output", s(&sol)], None);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let out = flowmech(&["verify", "--input", s(&ufp), "--solution", s(&sol)], None);
    assert_eq!(json(&out.stdout)["feasible"], true, "{}", out.stdout);

    let muca = dir.path().join("m.json");
    assert_eq!(flowmech(&["gen", "random-muca", "--B", "3", "--seed", "7", "--output", s(&muca)], None).code, 0);
    let sol = dir.path().join("ms.json");
    assert_eq!(flowmech(&["solve", "muca", "--input", s(&muca), "--output", s(&sol)], None).code, 0);
    let out = flowmech(&["verify", "--input", s(&muca), "--solution", s(&sol)], None);
    assert_eq!(json(&out.stdout)["feasible"], true, "{}", out.stdout);
}

#[test]
fn verify_rejects_overload() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "b.json", BOTTLENECK);
    let out = flowmech(&["solve", "ufp", "--input", s(&inst)], None);
    let mut doc = json(&out.stdout);
    let mut extra = doc["allocated"][0].clone();
    extra["request"] = "r2".into();
    doc["allocated"].as_array_mut().unwrap().push(extra);
    let sol = write(&dir, "bad.json", &doc.to_string());
    let out = flowmech(&["verify", "--input", s(&inst), "--solution", s(&sol)], None);
    assert_eq!(out.code, 2, "{}{}", out.stdout, out.stderr);
    assert_eq!(json(&out.stdout)["feasible"], false);
}

#[test]
fn recommend_epsilon_reports_bound() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "single.json", SINGLE);
    let out = flowmech(&["recommend-epsilon", "--input", s(&inst)], None);
    assert_eq!(out.code, 0);
    let doc = json(&out.stdout);
    // One edge: ln m = 0.
    assert_eq!(doc["epsilon_max"], 0.0);
    assert_eq!(doc["m"], 1);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("r.json");
    let gen = ["gen", "random", "--vertices", "7", "--requests", "7", "--B", "3", "--seed", "11", "--output", s(&inst)];
    assert_eq!(flowmech(&gen, None).code, 0);
    let runs: [&[&str]; 3] = [
        &["solve", "ufp", "--input", s(&inst)],
        &["payments", "--input", s(&inst), "--epsilon", "0.5"],
        &["audit", "--input", s(&inst), "--epsilon", "0.5", "--request", "r0", "--grid", "10"],
    ];
    for args in runs {
        let one = flowmech(args, Some("1"));
        let four = flowmech(args, Some("4"));
        assert_eq!(one.code, 0, "{}", one.stderr);
        assert_eq!(one.stdout, four.stdout);
    }
}

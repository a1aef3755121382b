use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use efm_core::cli::{generate_instance, GenConfig, EXIT_BUDGET, EXIT_OK, EXIT_PARSE, EXIT_VERIFY};
use efm_core::model::instance_to_json;
use efm_core::solver::{solve, SolveError, SolverConfig};

fn efm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TWIN: &str = r#"{
  "agents": ["alice", "bob"],
  "items": [
    {"id": "g", "utilities": {"alice": "1", "bob": "1"}},
    {"id": "c", "utilities": {"alice": "-1", "bob": "-1"}}
  ]
}"#;

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.json"), path(dir.path(), "b.json"));
    for p in [&a, &b] {
        let out = efm(&[
            "gen",
            "--seed",
            "11",
            "--agents",
            "3",
            "--items",
            "4",
            "--cake",
            "-o",
            s(p),
        ]);
        assert_eq!(code(&out), EXIT_OK);
    }
    assert_eq!(
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap()
    );
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["discrete", "efm", "money"] {
        for seed in 0..5 {
            let inst = path(dir.path(), "inst.json");
            let alloc = path(dir.path(), "alloc.json");
            let cert = path(dir.path(), "cert.json");
            let report = path(dir.path(), "report.json");
            let seed = seed.to_string();
            assert_eq!(code(&efm(&["gen", "--seed", &seed, "--cake", "-o", s(&inst)])), EXIT_OK);
            let out = efm(&[
                "solve",
                "--mode",
                mode,
                s(&inst),
                "-o",
                s(&alloc),
                "--certificate",
                s(&cert),
            ]);
            assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
            let cert: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
            assert!(cert.get("case").is_some());
            let out = efm(&["verify", s(&inst), s(&alloc), "--report", s(&report)]);
            assert_eq!(
                code(&out),
                EXIT_OK,
                "{mode} seed {seed}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
            assert_eq!(report["passed"], true);
        }
    }
}

#[test]
fn discrete_solve_bundles_the_twin_items() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "twin.json");
    std::fs::write(&inst, TWIN).unwrap();
    let out = efm(&["solve", s(&inst)]);
    assert_eq!(code(&out), EXIT_OK);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let sizes: Vec<usize> = ["alice", "bob"]
        .iter()
        .map(|a| doc["bundles"][a].as_array().unwrap().len())
        .collect();
    assert!(sizes == [2, 0] || sizes == [0, 2], "{doc}");
}

#[test]
fn verify_rejects_the_twin_split() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "twin.json");
    let alloc = path(dir.path(), "split.json");
    std::fs::write(&inst, TWIN).unwrap();
    std::fs::write(&alloc, r#"{"bundles": {"alice": ["g"], "bob": ["c"]}}"#).unwrap();
    assert_eq!(code(&efm(&["verify", s(&inst), s(&alloc)])), EXIT_VERIFY);
}

#[test]
fn malformed_input_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "bad.json");
    std::fs::write(&inst, r#"{"agents": ["a"], "items": [{"id": "x", "utilities": {}}]}"#).unwrap();
    assert_eq!(code(&efm(&["solve", s(&inst)])), EXIT_PARSE);
    std::fs::write(&inst, TWIN).unwrap();
    assert_eq!(code(&efm(&["solve", "--mode", "efm", s(&inst)])), EXIT_PARSE);
    assert_eq!(code(&efm(&["solve", "--budget", "0", s(&inst)])), EXIT_PARSE);
}

#[test]
fn exhausted_budget_exits_with_budget_code() {
    let tight = SolverConfig {
        budget: 1,
        heuristic: false,
    };
    let inst = (0..500)
        .map(|seed| {
            generate_instance(&GenConfig {
                seed,
                agents: 3,
                items: 6,
                cake: false,
                chores_only: false,
            })
        })
        .find(|inst| matches!(solve(inst, &tight), Err(SolveError::BudgetExceeded { .. })))
        .expect("some generated instance needs more than one candidate");
    let dir = tempfile::tempdir().unwrap();
    let file = path(dir.path(), "inst.json");
    std::fs::write(&file, instance_to_json(&inst)).unwrap();
    assert_eq!(code(&efm(&["solve", "--budget", "1", s(&file)])), EXIT_BUDGET);
    let out = efm(&["solve", "--budget", "1", "--heuristic", s(&file)]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&efm(&["solve", s(&file)])), EXIT_OK);
}

use std::path::Path;
use std::process::{Command, Output};

use sail_core::policy::stub::StubServer;

fn sail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sail"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let out = dir.join(name.replace(".json", ""));
    let text = format!(
        r#"{{"output_dir": "{}", "tasks": ["pick_place"], "seeds": {{"start": 0, "count": 4}}, {body}}}"#,
        out.display()
    );
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#""strategies": ["mcts", "single"], "budgets": [1, 6]"#;
    let a = write_config(dir.path(), "a.json", body);
    let b = write_config(dir.path(), "b.json", body);
    for cfg in [&a, &b] {
        let out = sail(&["run", "--config", cfg]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("Avg"));
    }
    for file in ["results.csv", "results_summary.txt", "results_summary.json", "results_tree_log.jsonl"] {
        let x = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 4);

    let log = dir.path().join("a/results_tree_log.jsonl").display().to_string();
    let out = sail(&["replay", "--tree-log", &log, "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(", 0 mismatches"));

    let plots = dir.path().join("plots");
    let csv_path = dir.path().join("a/results.csv").display().to_string();
    let out = sail(&["plot", "--csv", &csv_path, "--out", plots.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(plots.join("pick_place.svg").exists());
    assert!(plots.join("average.svg").exists());
}

#[test]
fn ablate_writes_ablation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ab.json",
        r#""ablation_budget": 3, "retrieval_modes": ["SIMILARITY", "FIXED"], "feedback_modes": ["STEP_LEVEL", "TRAJECTORY_ONLY"]"#,
    );
    let out = sail(&["ablate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ab/ablation.csv")).unwrap();
    // similarity/step, fixed/step, similarity/trajectory-only
    assert_eq!(csv.lines().count(), 1 + 3 * 4);
    assert!(csv.contains(",FIXED,STEP_LEVEL,"));
    assert!(csv.contains(",SIMILARITY,TRAJECTORY_ONLY,"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#""budgets": [0]"#);
    assert_eq!(sail(&["run", "--config", &bad]).status.code(), Some(1));
    assert_eq!(sail(&["ablate", "--config", "/nonexistent.json"]).status.code(), Some(1));
    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{ not json").unwrap();
    assert_eq!(sail(&["run", "--config", garbled.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn aborted_seeds_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let stub = StubServer::start(vec!["no trajectory here".into()]).unwrap();
    let body = format!(
        r#""budgets": [1], "parallel": false, "backend": {{"kind": "remote", "endpoint": "{}", "max_retries": 0}}"#,
        stub.endpoint()
    );
    let cfg = write_config(dir.path(), "remote.json", &body);
    let out = sail(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let aborted = std::fs::read_to_string(dir.path().join("remote/results_aborted.txt")).unwrap();
    assert_eq!(aborted.lines().count(), 4);
    assert!(aborted.contains("no parseable trajectory"));
}

#[test]
fn plot_and_replay_input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    std::fs::write(
        &csv,
        "task,strategy,budget,retrieval,feedback,seed,success,best_reward,nodes_expanded,wall_time_s\n\
         pick_place,mcts,15,SIMILARITY,STEP_LEVEL,0,true,1.0,3,0.0\n",
    )
    .unwrap();
    let out_dir = dir.path().join("p");
    assert_eq!(
        sail(&["plot", "--csv", csv.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]).status.code(),
        Some(1)
    );
    let log = dir.path().join("log.jsonl");
    std::fs::write(&log, "{\"kind\": \"bogus\"}\n").unwrap();
    assert_eq!(
        sail(&["replay", "--tree-log", log.to_str().unwrap(), "--seed", "0"]).status.code(),
        Some(1)
    );
}

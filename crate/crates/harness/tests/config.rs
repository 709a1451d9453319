use std::io::Write as _;

use sail_harness::{ConfigError, ExperimentConfig};

fn load(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    ExperimentConfig::load(f.path())
}

#[test]
fn defaults_are_the_desk_protocol() {
    let cfg = load("{}").unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!(cfg.tasks, ["pick_place", "drawer_open", "hand_over"]);
    assert_eq!(cfg.seeds.count, 100);
    assert_eq!(cfg.budgets, [1, 6, 15, 30, 45]);
    assert_eq!((cfg.branching, cfg.k, cfg.c_pucb), (3, 1, 1.0));
    assert!(cfg.early_stop);
    assert!(!cfg.record_wall_time);
}

#[test]
fn partial_configs_fill_in_defaults() {
    let cfg = load(
        r#"{"tasks": ["drawer_open"], "seeds": {"start": 0, "count": 20},
            "strategies": ["mcts", "breadth"], "retrieval_modes": ["RANDOM"],
            "feedback_modes": ["FINAL_SCORE"],
            "backend": {"kind": "scripted", "noise": {"sigma0": 0.05}}}"#,
    )
    .unwrap();
    assert_eq!(cfg.seeds.seeds().count(), 20);
    assert_eq!(cfg.budgets, [1, 6, 15, 30, 45]);
    match cfg.backend {
        sail_harness::config::Backend::Scripted { noise } => assert_eq!(noise.sigma0, 0.05),
        other => panic!("{other:?}"),
    }
}

#[test]
fn remote_backend_parses() {
    let cfg = load(
        r#"{"backend": {"kind": "remote", "endpoint": "http://localhost:9000",
            "auth_token_env": "POLICY_TOKEN"}}"#,
    )
    .unwrap();
    match cfg.backend {
        sail_harness::config::Backend::Remote(r) => {
            assert_eq!(r.endpoint, "http://localhost:9000");
            assert_eq!(r.auth_token_env.as_deref(), Some("POLICY_TOKEN"));
            assert_eq!(r.max_retries, 2);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn syntax_and_unknown_fields_are_parse_errors() {
    assert!(matches!(load("{"), Err(ConfigError::Parse(_))));
    assert!(matches!(load(r#"{"budget": 15}"#), Err(ConfigError::Parse(_))));
    assert!(matches!(load(r#"{"strategies": ["greedy"]}"#), Err(ConfigError::Parse(_))));
}

#[test]
fn invalid_values_are_rejected() {
    for text in [
        r#"{"tasks": []}"#,
        r#"{"tasks": ["stack_cups"]}"#,
        r#"{"seeds": {"start": 0, "count": 0}}"#,
        r#"{"seeds": {"start": 9990, "count": 20}}"#,
        r#"{"demo_seeds": []}"#,
        r#"{"budgets": [1, 0]}"#,
        r#"{"ablation_budget": 0}"#,
        r#"{"branching": 0}"#,
        r#"{"k": 0}"#,
        r#"{"frames": 0}"#,
        r#"{"c_pucb": 0.0}"#,
        r#"{"c_pucb": -1.0}"#,
        r#"{"retrieval_modes": []}"#,
        r#"{"feedback_modes": []}"#,
        r#"{"keypoint_noise": -0.01}"#,
    ] {
        assert!(matches!(load(text), Err(ConfigError::Invalid(_))), "{text}");
    }
}

#[test]
fn missing_file_is_a_read_error() {
    let err = ExperimentConfig::load(std::path::Path::new("/nonexistent/sail.json")).unwrap_err();
    assert!(matches!(err, ConfigError::Read { .. }));
}

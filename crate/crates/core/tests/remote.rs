use std::net::TcpListener;
use std::sync::{Mutex, OnceLock};

use sail_core::codec::{encode_initial_state_text, encode_trajectory_text};
use sail_core::policy::stub::StubServer;
use sail_core::policy::template::golden;
use sail_core::policy::{DemoBlock, PolicyError, ProposalRequest, RemoteConfig, RemotePolicy};
use sail_core::sim::{Simulator, TaskSpec};
use sail_core::{SeedId, TaskId};

const PROSE: &str = include_str!("fixtures/prose_response.txt");

/// Keeps every formatted log line so tests can search them.
struct Capture(Mutex<Vec<String>>);

impl log::Log for Capture {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }
    fn log(&self, record: &log::Record) {
        self.0.lock().unwrap().push(format!("{}", record.args()));
    }
    fn flush(&self) {}
}

fn capture() -> &'static Capture {
    static LOGGER: OnceLock<&'static Capture> = OnceLock::new();
    LOGGER.get_or_init(|| {
        let c: &'static Capture = Box::leak(Box::new(Capture(Mutex::new(Vec::new()))));
        log::set_logger(c).unwrap();
        log::set_max_level(log::LevelFilter::Trace);
        c
    })
}

fn request() -> ProposalRequest {
    let task = TaskId::new("pick_place");
    let spec = TaskSpec::lookup(&task).unwrap();
    let sim = Simulator::default();
    let (_, _, initial) = sim.reset(&task, SeedId(3)).unwrap();
    let (_, _, demo_initial) = sim.reset(&task, SeedId(10_000)).unwrap();
    ProposalRequest {
        demos: vec![DemoBlock {
            task: task.clone(),
            seed: SeedId(10_000),
            trajectory_text: encode_trajectory_text(&golden(&task, SeedId(10_000)).unwrap()),
            initial_text: encode_initial_state_text(&demo_initial),
        }],
        task,
        seed: SeedId(3),
        task_goal: spec.goal_text,
        initial,
        feedback: vec![],
        parent_demos: vec![],
        attempt_index: 0,
        child_index: 0,
        depth: 0,
    }
}

fn config(endpoint: String) -> RemoteConfig {
    RemoteConfig {
        endpoint,
        max_retries: 2,
        timeout_s: 5.0,
        max_concurrency: 1,
        auth_token_env: None,
    }
}

fn valid_text() -> String {
    encode_trajectory_text(&golden(&TaskId::new("pick_place"), SeedId(3)).unwrap())
}

#[test]
fn loopback_returns_the_served_trajectory() {
    let stub = StubServer::start(vec![valid_text()]).unwrap();
    let policy = RemotePolicy::new(config(stub.endpoint())).unwrap();
    let (traj, retries) = policy.propose_counted(&request()).unwrap();
    assert_eq!(retries, 0);
    assert_eq!(encode_trajectory_text(&traj), valid_text());

    let reqs = stub.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].path, "/propose");
    let prompt = reqs[0].body["prompt"].as_str().unwrap();
    let req = request();
    assert!(prompt.contains(&req.task_goal));
    assert!(prompt.contains(&req.demos[0].trajectory_text));
    assert!(reqs[0].body["images"].as_array().unwrap().is_empty());
    assert_eq!(reqs[0].authorization, None);
}

#[test]
fn prose_wrapped_reply_is_parsed() {
    let stub = StubServer::start(vec![PROSE.to_string()]).unwrap();
    let policy = RemotePolicy::new(config(stub.endpoint())).unwrap();
    let (traj, retries) = policy.propose_counted(&request()).unwrap();
    assert_eq!(retries, 0);
    assert_eq!(traj.len(), 8);
    let text = encode_trajectory_text(&traj);
    assert!(text.starts_with("W 0: pos=[-56,-132,120]"), "{text}");
    assert!(text.contains("W 7: pos=[140,20,150] quat=[1.000,0.000,0.000,0.000] grip=OPEN"));
}

#[test]
fn garbage_is_retried_with_the_parse_error() {
    let stub = StubServer::start(vec![
        "I am not sure what to do.".to_string(),
        "W 0: pos=[1,2] grip=OPEN".to_string(),
        valid_text(),
    ])
    .unwrap();
    let policy = RemotePolicy::new(config(stub.endpoint())).unwrap();
    let (traj, retries) = policy.propose_counted(&request()).unwrap();
    assert_eq!(retries, 2);
    assert_eq!(encode_trajectory_text(&traj), valid_text());
    let reqs = stub.requests();
    assert_eq!(reqs.len(), 3);
    let first = reqs[0].body["prompt"].as_str().unwrap();
    let retry = reqs[1].body["prompt"].as_str().unwrap();
    assert!(!first.contains("could not be parsed"));
    assert!(retry.starts_with(first));
    assert!(retry.contains("could not be parsed"));
}

#[test]
fn persistent_garbage_exhausts_retries() {
    let stub = StubServer::start(vec!["nope".to_string(); 3]).unwrap();
    let policy = RemotePolicy::new(config(stub.endpoint())).unwrap();
    match policy.propose_counted(&request()) {
        Err(PolicyError::ParseExhausted { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected ParseExhausted, got {other:?}"),
    }
    assert_eq!(stub.requests().len(), 3);
}

#[test]
fn bearer_token_is_sent_and_never_logged() {
    let logs = capture();
    let token = "tok-3f9a1c77e2d04b5b";
    std::env::set_var("SAIL_TEST_REMOTE_TOKEN", token);
    let stub = StubServer::start(vec!["garbage".to_string(), valid_text()]).unwrap();
    let mut cfg = config(stub.endpoint());
    cfg.auth_token_env = Some("SAIL_TEST_REMOTE_TOKEN".into());
    let policy = RemotePolicy::new(cfg).unwrap();
    let (_, retries) = policy.propose_counted(&request()).unwrap();
    assert_eq!(retries, 1);
    for r in stub.requests() {
        assert_eq!(r.authorization.as_deref(), Some(&*format!("Bearer {token}")));
    }
    assert!(!format!("{policy:?}").contains(token));
    let lines = logs.0.lock().unwrap();
    assert!(lines.iter().any(|l| l.contains("remote proposal")));
    assert!(lines.iter().all(|l| !l.contains(token)));
}

#[test]
fn missing_credential_is_reported_before_any_call() {
    let stub = StubServer::start(vec![valid_text()]).unwrap();
    let mut cfg = config(stub.endpoint());
    cfg.auth_token_env = Some("SAIL_TEST_UNSET_TOKEN".into());
    std::env::remove_var("SAIL_TEST_UNSET_TOKEN");
    let policy = RemotePolicy::new(cfg).unwrap();
    match policy.propose_counted(&request()) {
        Err(PolicyError::MissingCredential(v)) => assert_eq!(v, "SAIL_TEST_UNSET_TOKEN"),
        other => panic!("expected MissingCredential, got {other:?}"),
    }
    assert!(stub.requests().is_empty());
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let policy = RemotePolicy::new(config(format!("http://127.0.0.1:{port}"))).unwrap();
    assert!(matches!(
        policy.propose_counted(&request()),
        Err(PolicyError::Transport(_))
    ));
}

#[test]
fn silent_server_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let mut cfg = config(format!("http://127.0.0.1:{port}"));
    cfg.timeout_s = 0.3;
    let policy = RemotePolicy::new(cfg).unwrap();
    assert!(matches!(policy.propose_counted(&request()), Err(PolicyError::Timeout)));
    drop(listener);
}

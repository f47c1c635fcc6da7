use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use metateach::config::ExperimentConfig;
use metateach::feedback::{Mode, Preference, Target, TrialFeedback};
use metateach::session::client::{drive_scripted, Client};
use metateach::session::protocol::{ClientMessage, ServerMessage};
use metateach::session::server::{Server, ServerConfig};
use metateach::session::{Phase, RecordBody, SessionLog};
use metateach::teacher::TeacherConfig;
use metateach::Error;

fn config(trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.session.trials = trials;
    c
}

/// Runs a server on an ephemeral port for the duration of `f`.
fn with_server<T>(mode: Mode, out_dir: Option<std::path::PathBuf>, f: impl FnOnce(&Server, SocketAddr) -> T) -> T {
    let server = Server::bind(
        "127.0.0.1:0",
        ServerConfig {
            mode,
            experiment: config(6),
            out_dir,
        },
    )
    .unwrap();
    let addr = server.local_addr().unwrap();
    let stop = AtomicBool::new(false);
    std::thread::scope(|scope| {
        let handle = scope.spawn(|| server.run(&stop));
        let result = f(&server, addr);
        stop.store(true, Ordering::SeqCst);
        handle.join().unwrap().unwrap();
        result
    })
}

fn error_code(msg: ServerMessage) -> String {
    match msg {
        ServerMessage::Error { code, .. } => code,
        other => panic!("expected an error, got {other:?}"),
    }
}

#[test]
fn framed_session_matches_the_scripted_log() {
    let dir = tempfile::tempdir().unwrap();
    with_server(Mode::FullModality, Some(dir.path().to_path_buf()), |server, addr| {
        let teacher = TeacherConfig { seed: 3, ..TeacherConfig::default() };
        let id = drive_scripted(addr, teacher, config(6).course, 21, Some("alpha".into())).unwrap();
        assert_eq!(id, "alpha");
        let log = server.session_log("alpha").unwrap();
        log.validate_finished().unwrap();
        log.verify_replay().unwrap();
        let header = log.header().unwrap();
        assert_eq!((header.seed, header.mode, header.clock.as_str()), (21, Mode::FullModality, "wall"));
        let on_disk = SessionLog::read(&dir.path().join("alpha.jsonl")).unwrap();
        assert_eq!(on_disk, log);
    });
}

#[test]
fn preference_only_server_refuses_full_sessions() {
    with_server(Mode::PreferenceOnly, None, |_, addr| {
        let mut c = Client::connect(addr).unwrap();
        let reply = c
            .request(&ClientMessage::StartSession {
                mode: Some(Mode::FullModality),
                seed: Some(1),
                session_id: None,
            })
            .unwrap();
        assert_eq!(error_code(reply), "capability");
        assert!(matches!(c.start_session(None, Some(1), None), Ok(ServerMessage::State { mode: Mode::PreferenceOnly, .. })));
    });
}

#[test]
fn meta_feedback_is_refused_in_preference_only_sessions() {
    with_server(Mode::FullModality, None, |server, addr| {
        let mut c = Client::connect(addr).unwrap();
        let ServerMessage::State { session_id, capabilities, .. } =
            c.start_session(Some(Mode::PreferenceOnly), Some(2), None).unwrap()
        else {
            panic!("expected state")
        };
        assert!(!capabilities.iter().any(|c| c == "guidance"));
        c.get_pair().unwrap();
        let fb = TrialFeedback {
            guidance_target: Some(Target::First),
            ..TrialFeedback::preference(Preference::First)
        };
        assert!(matches!(c.feedback(fb), Err(Error::Capability(_))));
        let points: Vec<[f64; 3]> = (0..8).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let reply = c.request(&ClientMessage::DemoPoints { session_id: None, points }).unwrap();
        assert_eq!(error_code(reply), "capability");
        // Nothing reached the log.
        let log = server.session_log(&session_id).unwrap();
        assert!(!log.records.iter().any(|r| matches!(r.body, RecordBody::Feedback(_))));
        assert!(c.feedback(TrialFeedback::preference(Preference::First)).is_ok());
    });
}

#[test]
fn session_ids_are_checked() {
    with_server(Mode::FullModality, None, |_, addr| {
        let mut c = Client::connect(addr).unwrap();
        c.start_session(None, Some(1), Some("dup".into())).unwrap();
        let mut d = Client::connect(addr).unwrap();
        assert!(matches!(d.start_session(None, Some(1), Some("dup".into())), Err(Error::DuplicateSession(_))));
        assert!(matches!(d.start_session(None, Some(1), Some("no spaces".into())), Err(Error::Validation(_))));
        let reply = d.request(&ClientMessage::GetState { session_id: Some("ghost".into()) }).unwrap();
        assert_eq!(error_code(reply), "unknown_session");
        // Without a started session a framed connection has nothing to talk about.
        let mut e = Client::connect(addr).unwrap();
        let reply = e.request(&ClientMessage::GetPair { session_id: None }).unwrap();
        assert_eq!(error_code(reply), "validation");
    });
}

#[test]
fn demonstrations_need_enough_points() {
    with_server(Mode::FullModality, None, |server, addr| {
        let mut c = Client::connect(addr).unwrap();
        c.start_session(None, Some(5), Some("demo".into())).unwrap();
        let few: Vec<[f64; 3]> = (0..4).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        // Before a pair is shown the phase is wrong.
        let reply = c.request(&ClientMessage::DemoPoints { session_id: None, points: few.clone() }).unwrap();
        assert_eq!(error_code(reply), "wrong_phase");
        c.get_pair().unwrap();
        let reply = c.request(&ClientMessage::DemoPoints { session_id: None, points: few }).unwrap();
        assert_eq!(error_code(reply), "validation");
        let points: Vec<[f64; 3]> = (0..20).map(|i| [i as f64 * 0.1, 0.02 * i as f64, 0.01 * i as f64]).collect();
        let reply = c.request(&ClientMessage::DemoPoints { session_id: None, points }).unwrap();
        assert!(matches!(reply, ServerMessage::State { phase: Phase::AwaitingFeedback, .. }));
        c.feedback(TrialFeedback::preference(Preference::Second)).unwrap();
        let log = server.session_log("demo").unwrap();
        let fb = log
            .records
            .iter()
            .find_map(|r| match &r.body {
                RecordBody::Feedback(f) => Some(f),
                _ => None,
            })
            .unwrap();
        assert!(fb.feedback.demonstration.is_some());
        assert!(fb.demo_weights.is_some());
    });
}

#[test]
fn pair_is_resent_while_feedback_is_pending() {
    with_server(Mode::FullModality, None, |_, addr| {
        let mut c = Client::connect(addr).unwrap();
        c.start_session(None, Some(8), None).unwrap();
        let first = c.get_pair().unwrap();
        assert_eq!(c.get_pair().unwrap(), first);
    });
}

fn http_post(addr: SocketAddr, path: &str, body: &str) -> (String, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "POST {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut text = String::new();
    s.read_to_string(&mut text).unwrap();
    let (head, body) = text.split_once("\r\n\r\n").unwrap();
    (head.lines().next().unwrap().to_string(), body.to_string())
}

#[test]
fn http_rpc_requires_session_ids() {
    with_server(Mode::FullModality, None, |_, addr| {
        let (status, body) = http_post(
            addr,
            "/rpc",
            r#"{"protocol":"metateach/1","type":"start_session","seed":4,"session_id":"web"}"#,
        );
        assert!(status.contains("200"), "{status}");
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!((v["protocol"].as_str(), v["type"].as_str()), (Some("metateach/1"), Some("state")));

        let (_, body) = http_post(addr, "/rpc", r#"{"protocol":"metateach/1","type":"get_pair"}"#);
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!((v["type"].as_str(), v["code"].as_str()), (Some("error"), Some("validation")));

        let (_, body) = http_post(addr, "/rpc", r#"{"protocol":"metateach/1","type":"get_pair","session_id":"web"}"#);
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["type"], "pair");

        let (_, body) = http_post(addr, "/rpc", r#"{"protocol":"metateach/0","type":"get_state","session_id":"web"}"#);
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["code"], "validation");

        let (status, _) = http_post(addr, "/elsewhere", "{}");
        assert!(status.contains("404"), "{status}");
    });
}

#[test]
fn sigterm_truncates_open_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_metateach"))
        .args(["serve", "--port", "0", "--out", dir.path().to_str().unwrap()])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr: SocketAddr = line.trim().strip_prefix("listening on ").unwrap().parse().unwrap();

    let mut c = Client::connect(addr).unwrap();
    c.start_session(None, Some(1), Some("open".into())).unwrap();
    c.get_pair().unwrap();
    c.feedback(TrialFeedback::preference(Preference::First)).unwrap();

    let ok = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(ok.success());
    let deadline = Instant::now() + Duration::from_secs(10);
    let status = loop {
        if let Some(s) = child.try_wait().unwrap() {
            break s;
        }
        assert!(Instant::now() < deadline, "server did not stop");
        std::thread::sleep(Duration::from_millis(20));
    };
    assert!(status.success());
    let log = SessionLog::read(&dir.path().join("open.jsonl")).unwrap();
    assert!(log.is_truncated());
    assert_eq!(log.records.last().unwrap().body.kind(), "truncated");
    assert!(log.validate_finished().is_err());
}

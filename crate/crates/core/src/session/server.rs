//! Multi-session TCP server speaking `metateach/1`.
//!
//! Each connection gets its own thread. A connection either speaks
//! length-prefixed frames, where it remembers the session it started, or
//! sends a single `POST /rpc` HTTP request whose body is one message.
//! Logs stream to `<out_dir>/<session_id>.jsonl` as records are written.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, PoisonError};
use std::thread;
use std::time::Duration;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::feedback::Mode;
use crate::promp::Trajectory;

use super::protocol::{self, ClientMessage, ServerMessage};
use super::{Phase, SessionState};

/// Drawn demonstrations need at least this many points.
pub const MIN_DEMO_POINTS: usize = 5;

const ACCEPT_POLL: Duration = Duration::from_millis(20);
const MAX_HTTP_HEADER: usize = 64 * 1024;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Most permissive mode a client may request.
    pub mode: Mode,
    pub experiment: ExperimentConfig,
    /// Where session logs go; `None` keeps them in memory only.
    pub out_dir: Option<PathBuf>,
}

struct LiveSession {
    state: SessionState,
    pending_demo: Option<Trajectory>,
}

struct Shared {
    config: ServerConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<LiveSession>>>>,
    next_id: AtomicU64,
    closed: AtomicBool,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(PoisonError::into_inner)
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Shared {
    fn session(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    fn ensure_open(&self) -> Result<()> {
        if self.closed.load(Ordering::SeqCst) {
            Err(Error::Io("server is shutting down".into()))
        } else {
            Ok(())
        }
    }

    fn start_session(&self, mode: Option<Mode>, seed: Option<u64>, id: Option<String>) -> Result<ServerMessage> {
        self.ensure_open()?;
        let mode = mode.unwrap_or(self.config.mode);
        if mode == Mode::FullModality && self.config.mode == Mode::PreferenceOnly {
            return Err(Error::Capability("server only allows preference_only sessions".into()));
        }
        let id = match id {
            Some(id) if !valid_session_id(&id) => {
                return Err(Error::Validation(format!("invalid session id {id:?}")));
            }
            Some(id) => id,
            None => format!("session-{}", self.next_id.fetch_add(1, Ordering::SeqCst)),
        };
        let mut sessions = lock(&self.sessions);
        if sessions.contains_key(&id) {
            return Err(Error::DuplicateSession(id));
        }
        let seed = seed.unwrap_or_else(rand::random);
        let mut state = SessionState::start_live(id.clone(), mode, seed, self.config.experiment.clone())?;
        if let Some(dir) = &self.config.out_dir {
            fs::create_dir_all(dir)?;
            let file = File::create(dir.join(format!("{id}.jsonl")))?;
            state.attach_sink(Box::new(file))?;
        }
        let reply = state_message(&state);
        sessions.insert(
            id,
            Arc::new(Mutex::new(LiveSession {
                state,
                pending_demo: None,
            })),
        );
        Ok(reply)
    }

    fn with_session<F>(&self, id: &str, f: F) -> Result<ServerMessage>
    where
        F: FnOnce(&mut LiveSession) -> Result<ServerMessage>,
    {
        let session = self.session(id)?;
        let mut guard = lock(&session);
        self.ensure_open()?;
        f(&mut guard)
    }

    fn dispatch(&self, msg: ClientMessage, current: &mut Option<String>) -> Result<ServerMessage> {
        if let ClientMessage::StartSession { mode, seed, session_id } = msg {
            let reply = self.start_session(mode, seed, session_id)?;
            if let ServerMessage::State { session_id, .. } = &reply {
                *current = Some(session_id.clone());
            }
            return Ok(reply);
        }
        let id = msg
            .session_id()
            .map(str::to_string)
            .or_else(|| current.clone())
            .ok_or_else(|| Error::Validation("no session: send start_session or name a session_id".into()))?;
        match msg {
            ClientMessage::StartSession { .. } => unreachable!("handled above"),
            ClientMessage::GetState { .. } => self.with_session(&id, |s| Ok(state_message(&s.state))),
            ClientMessage::GetPair { .. } => self.with_session(&id, |s| {
                // Asking again while feedback is pending re-sends the same pair.
                if s.state.phase() == Phase::ReadyToSample {
                    s.state.present_pair()?;
                }
                pair_message(&s.state)
            }),
            ClientMessage::DemoPoints { points, .. } => self.with_session(&id, |s| {
                if s.state.mode() != Mode::FullModality {
                    return Err(Error::Capability("demonstration".into()));
                }
                if s.state.phase() != Phase::AwaitingFeedback {
                    return Err(Error::WrongPhase {
                        phase: s.state.phase().to_string(),
                        op: "demo_points".into(),
                    });
                }
                if points.len() < MIN_DEMO_POINTS {
                    return Err(Error::Validation(format!(
                        "demonstration needs at least {MIN_DEMO_POINTS} points, got {}",
                        points.len()
                    )));
                }
                let traj = Trajectory::from_points(&points, s.state.config().promp.num_timesteps)?;
                s.pending_demo = Some(traj);
                Ok(state_message(&s.state))
            }),
            ClientMessage::Feedback { mut feedback, .. } => self.with_session(&id, |s| {
                let staged = feedback.demonstration.is_none() && s.pending_demo.is_some();
                if staged {
                    feedback.demonstration = s.pending_demo.clone();
                }
                s.state.submit_feedback(feedback)?;
                s.pending_demo = None;
                Ok(state_message(&s.state))
            }),
        }
    }

    /// Marks every unfinished session as truncated and refuses further work.
    fn close(&self, reason: &str) -> Vec<String> {
        self.closed.store(true, Ordering::SeqCst);
        let sessions: Vec<_> = lock(&self.sessions).values().cloned().collect();
        let mut truncated = Vec::new();
        for s in sessions {
            let mut guard = lock(&s);
            if guard.state.phase() != Phase::Finished {
                // A failing sink has already lost the log; nothing more to do.
                let _ = guard.state.truncate(reason);
                truncated.push(guard.state.session_id().to_string());
            }
        }
        truncated.sort();
        truncated
    }
}

fn state_message(s: &SessionState) -> ServerMessage {
    ServerMessage::State {
        session_id: s.session_id().to_string(),
        phase: s.phase(),
        trial_index: s.trial_index(),
        trials: s.trials(),
        mode: s.mode(),
        capabilities: s.capabilities().into_iter().map(String::from).collect(),
        has_fallback: !s.fallback().is_empty(),
    }
}

fn pair_message(s: &SessionState) -> Result<ServerMessage> {
    let pair = s.current_pair().ok_or_else(|| Error::WrongPhase {
        phase: s.phase().to_string(),
        op: "get_pair".into(),
    })?;
    let [traj_a, traj_b] = pair.trajectories.clone();
    let [out_a, out_b] = pair.outcomes.clone();
    Ok(ServerMessage::Pair {
        session_id: s.session_id().to_string(),
        trial_index: pair.trial_index,
        traj_a,
        traj_b,
        out_a,
        out_b,
        exploration_level: s.exploration_level(),
        speed_level: s.speed_level(),
    })
}

fn respond(shared: &Shared, bytes: &[u8], current: &mut Option<String>) -> ServerMessage {
    protocol::decode::<ClientMessage>(bytes)
        .and_then(|msg| shared.dispatch(msg, current))
        .unwrap_or_else(|e| ServerMessage::from(&e))
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Server {
    pub fn bind(addr: impl std::net::ToSocketAddrs, config: ServerConfig) -> Result<Self> {
        config.experiment.validate()?;
        let listener = TcpListener::bind(addr)?;
        Ok(Self {
            listener,
            shared: Arc::new(Shared {
                config,
                sessions: Mutex::new(HashMap::new()),
                next_id: AtomicU64::new(1),
                closed: AtomicBool::new(false),
            }),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves until `shutdown` becomes true, then truncates unfinished
    /// sessions. Returns the ids of the truncated sessions.
    pub fn run(&self, shutdown: &AtomicBool) -> Result<Vec<String>> {
        self.listener.set_nonblocking(true)?;
        while !shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    let shared = Arc::clone(&self.shared);
                    thread::spawn(move || {
                        // Peer disconnects surface here; there is no one left to tell.
                        let _ = handle_connection(&shared, stream);
                    });
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(self.shared.close("server shutdown"))
    }

    /// Snapshot of a session's log, for tests and embedding.
    pub fn session_log(&self, id: &str) -> Result<super::SessionLog> {
        let s = self.shared.session(id)?;
        let guard = lock(&s);
        Ok(guard.state.log().clone())
    }
}

fn handle_connection(shared: &Shared, stream: TcpStream) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut peek = [0u8; 4];
    let n = stream.peek(&mut peek)?;
    if n >= 4 && &peek == b"POST" {
        return handle_http(shared, stream);
    }
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    let mut current = None;
    while let Some(frame) = protocol::read_frame(&mut reader)? {
        let reply = respond(shared, &frame, &mut current);
        protocol::write_frame(&mut writer, &protocol::encode(&reply))?;
    }
    Ok(())
}

fn handle_http(shared: &Shared, stream: TcpStream) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = None;
    let mut header_bytes = request_line.len();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        header_bytes += line.len();
        if header_bytes > MAX_HTTP_HEADER {
            return http_reply(&mut writer, "431 Request Header Fields Too Large", b"");
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse::<usize>().ok();
            }
        }
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("");
    if path != "/rpc" {
        return http_reply(&mut writer, "404 Not Found", b"");
    }
    let Some(len) = content_length.filter(|&l| l <= protocol::MAX_FRAME) else {
        return http_reply(&mut writer, "411 Length Required", b"");
    };
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;

    // Stateless transport: every message after start_session names its session.
    let reply = match protocol::decode::<ClientMessage>(&body) {
        Ok(msg) if !matches!(msg, ClientMessage::StartSession { .. }) && msg.session_id().is_none() => {
            ServerMessage::from(&Error::Validation("session_id is required over HTTP".into()))
        }
        Ok(msg) => shared
            .dispatch(msg, &mut None)
            .unwrap_or_else(|e| ServerMessage::from(&e)),
        Err(e) => ServerMessage::from(&e),
    };
    http_reply(&mut writer, "200 OK", &protocol::encode(&reply))
}

fn http_reply(w: &mut TcpStream, status: &str, body: &[u8]) -> io::Result<()> {
    write!(
        w,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    w.write_all(body)?;
    w.flush()
}

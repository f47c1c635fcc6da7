//! Framed `metateach/1` client and a scripted driver built on it.

use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};

use crate::env::CourseConfig;
use crate::error::{Error, Result};
use crate::feedback::{Mode, TrialFeedback};
use crate::teacher::{ScriptedTeacher, TeacherConfig};

use super::protocol::{self, ClientMessage, ServerMessage};
use super::Phase;

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
        })
    }

    /// Sends one message and returns the raw reply, including error replies.
    pub fn request(&mut self, msg: &ClientMessage) -> Result<ServerMessage> {
        protocol::write_frame(&mut self.writer, &protocol::encode(msg))?;
        let frame = protocol::read_frame(&mut self.reader)?
            .ok_or_else(|| Error::Io("connection closed by server".into()))?;
        protocol::decode(&frame)
    }

    /// Like [`Client::request`] but turns error replies into `Err`.
    pub fn call(&mut self, msg: &ClientMessage) -> Result<ServerMessage> {
        match self.request(msg)? {
            ServerMessage::Error { code, message } => Err(remote_error(&code, message)),
            reply => Ok(reply),
        }
    }

    pub fn start_session(&mut self, mode: Option<Mode>, seed: Option<u64>, session_id: Option<String>) -> Result<ServerMessage> {
        self.call(&ClientMessage::StartSession { mode, seed, session_id })
    }

    pub fn get_pair(&mut self) -> Result<ServerMessage> {
        self.call(&ClientMessage::GetPair { session_id: None })
    }

    pub fn feedback(&mut self, feedback: TrialFeedback) -> Result<ServerMessage> {
        self.call(&ClientMessage::Feedback {
            session_id: None,
            feedback,
        })
    }

    pub fn get_state(&mut self) -> Result<ServerMessage> {
        self.call(&ClientMessage::GetState { session_id: None })
    }
}

/// Maps a wire error back to a local error carrying the server's message.
fn remote_error(code: &str, message: String) -> Error {
    match code {
        "capability" => Error::Capability(message),
        "validation" => Error::Validation(message),
        "duplicate_session" => Error::DuplicateSession(message),
        "unknown_session" => Error::UnknownSession(message),
        "no_fallback" => Error::NoFallback,
        "wrong_phase" => Error::WrongPhase {
            phase: String::new(),
            op: message,
        },
        _ => Error::Io(format!("{code}: {message}")),
    }
}

/// Runs a whole session against a server with the scripted teacher.
/// Returns the session id.
pub fn drive_scripted(
    addr: impl ToSocketAddrs,
    teacher_cfg: TeacherConfig,
    course: CourseConfig,
    seed: u64,
    session_id: Option<String>,
) -> Result<String> {
    let mut client = Client::connect(addr)?;
    let id = match client.start_session(Some(teacher_cfg.mode), Some(seed), session_id)? {
        ServerMessage::State { session_id, .. } => session_id,
        other => return Err(Error::Validation(format!("unexpected reply {other:?}"))),
    };
    let mut teacher = ScriptedTeacher::new(teacher_cfg, course);
    loop {
        let (out_a, out_b) = match client.get_pair()? {
            ServerMessage::Pair { out_a, out_b, .. } => (out_a, out_b),
            other => return Err(Error::Validation(format!("unexpected reply {other:?}"))),
        };
        let fb = teacher.decide(&out_a, &out_b);
        match client.feedback(fb)? {
            ServerMessage::State { phase: Phase::Finished, .. } => return Ok(id),
            ServerMessage::State { .. } => {}
            other => return Err(Error::Validation(format!("unexpected reply {other:?}"))),
        }
    }
}

//! `metateach/1` wire messages and framing.
//!
//! On a socket every message is a 4-byte big-endian length followed by that
//! many bytes of UTF-8 JSON. The same JSON bodies can be POSTed to `/rpc`
//! for request/response clients, which must then name the session in every
//! message after `start_session`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::EnvOutcome;
use crate::error::Error;
use crate::feedback::{Level, Mode, TrialFeedback};
use crate::promp::Trajectory;
use crate::PROTOCOL_VERSION;

use super::Phase;

/// Frames larger than this are rejected.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    StartSession {
        #[serde(default)]
        mode: Option<Mode>,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        session_id: Option<String>,
    },
    GetPair {
        #[serde(default)]
        session_id: Option<String>,
    },
    Feedback {
        #[serde(default)]
        session_id: Option<String>,
        feedback: TrialFeedback,
    },
    /// Drawn demonstration as `[t, x, y]` points; attached to the next
    /// feedback of the current trial.
    DemoPoints {
        #[serde(default)]
        session_id: Option<String>,
        points: Vec<[f64; 3]>,
    },
    GetState {
        #[serde(default)]
        session_id: Option<String>,
    },
}

impl ClientMessage {
    pub fn session_id(&self) -> Option<&str> {
        match self {
            ClientMessage::StartSession { session_id, .. }
            | ClientMessage::GetPair { session_id }
            | ClientMessage::Feedback { session_id, .. }
            | ClientMessage::DemoPoints { session_id, .. }
            | ClientMessage::GetState { session_id } => session_id.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Pair {
        session_id: String,
        trial_index: usize,
        traj_a: Trajectory,
        traj_b: Trajectory,
        out_a: EnvOutcome,
        out_b: EnvOutcome,
        exploration_level: Level,
        speed_level: Level,
    },
    State {
        session_id: String,
        phase: Phase,
        trial_index: usize,
        trials: usize,
        mode: Mode,
        capabilities: Vec<String>,
        has_fallback: bool,
    },
    Error {
        code: String,
        message: String,
    },
}

impl From<&Error> for ServerMessage {
    fn from(e: &Error) -> Self {
        ServerMessage::Error {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

/// Every message travels inside an envelope naming the protocol version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub protocol: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(body: T) -> Self {
        Self {
            protocol: PROTOCOL_VERSION.to_string(),
            body,
        }
    }
}

pub fn encode<T: Serialize>(msg: &T) -> Vec<u8> {
    serde_json::to_vec(&Envelope::new(msg)).expect("message serializes")
}

/// Parses an enveloped message and checks its protocol version.
pub fn decode<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, Error> {
    let env: Envelope<T> =
        serde_json::from_slice(bytes).map_err(|e| Error::Validation(format!("bad message: {e}")))?;
    if env.protocol != PROTOCOL_VERSION {
        return Err(Error::Validation(format!(
            "unsupported protocol {:?}, expected {PROTOCOL_VERSION:?}",
            env.protocol
        )));
    }
    Ok(env.body)
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

//! Interactive policy search for a simulated minigolf putt.
//!
//! Movements are probabilistic movement primitives ([`promp`]); a teacher
//! compares pairs of movements and may add meta feedback (guidance,
//! correction, demonstration, exploration, speed, fallback) which the
//! reward-weighted averaging learner in [`learner`] turns into policy
//! updates. [`session`] drives the 40-trial protocol, logs every event and
//! serves it over a socket; [`analysis`] computes learning metrics and rank
//! statistics from the logs.

pub mod analysis;
pub mod config;
pub mod env;
pub mod error;
pub mod feedback;
pub mod learner;
pub mod promp;
pub mod rng;
pub mod session;
pub mod teacher;

pub use error::{Error, Result};

/// Wire protocol version string.
pub const PROTOCOL_VERSION: &str = "metateach/1";
/// Session log schema version string.
pub const LOG_SCHEMA_VERSION: &str = "metateach-log/1";
/// Trials per session.
pub const DEFAULT_TRIALS: usize = 40;

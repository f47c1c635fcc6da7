//! C ABI for metateach sessions and statistics.
//!
//! Every fallible function returns an [`MtStatus`]. On failure the message
//! for the calling thread is available from [`mt_last_error_message`].
//! Sessions are opaque [`MtSession`] handles released with
//! [`mt_session_free`]. No function retains caller-owned pointers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use metateach::analysis::{mann_whitney, spearman};
use metateach::config::ExperimentConfig;
use metateach::feedback::{Level, Mode, Preference, Target, TrialFeedback};
use metateach::promp::Trajectory;
use metateach::session::{run_scripted_session, Phase, SessionState};
use metateach::teacher::TeacherConfig;
use metateach::Error;

/// Result codes. `MT_STATUS_OK` is zero; every other value is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Underdetermined = 4,
    InvalidTrajectory = 5,
    Config = 6,
    EmptyHistory = 7,
    EmptyGroup = 8,
    LengthMismatch = 9,
    UndefinedCorrelation = 10,
    Validation = 11,
    NoFallback = 12,
    Capability = 13,
    WrongPhase = 14,
    MalformedLog = 15,
    Io = 16,
    BufferTooSmall = 17,
    Panic = 99,
}

impl From<&Error> for MtStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension { .. } => MtStatus::Dimension,
            Error::Underdetermined { .. } => MtStatus::Underdetermined,
            Error::InvalidTrajectory(_) => MtStatus::InvalidTrajectory,
            Error::Config(_) => MtStatus::Config,
            Error::EmptyHistory => MtStatus::EmptyHistory,
            Error::EmptyGroup => MtStatus::EmptyGroup,
            Error::LengthMismatch(..) => MtStatus::LengthMismatch,
            Error::UndefinedCorrelation => MtStatus::UndefinedCorrelation,
            Error::Validation(_) => MtStatus::Validation,
            Error::NoFallback => MtStatus::NoFallback,
            Error::Capability(_) => MtStatus::Capability,
            Error::WrongPhase { .. } => MtStatus::WrongPhase,
            Error::DuplicateSession(_) | Error::UnknownSession(_) => MtStatus::InvalidArgument,
            Error::MalformedLog(_) => MtStatus::MalformedLog,
            Error::Io(_) => MtStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtMode {
    PreferenceOnly = 0,
    FullModality = 1,
}

impl From<MtMode> for Mode {
    fn from(m: MtMode) -> Self {
        match m {
            MtMode::PreferenceOnly => Mode::PreferenceOnly,
            MtMode::FullModality => Mode::FullModality,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtPhase {
    ReadyToSample = 0,
    AwaitingFeedback = 1,
    Finished = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtPreference {
    First = 0,
    Second = 1,
    Both = 2,
    None = 3,
}

/// Movement index used for optional targets.
pub const MT_TARGET_NONE: i32 = -1;

/// One trial's feedback. Targets are 0 or 1 for the first or second
/// movement, or `MT_TARGET_NONE`. Levels are 1..=5 and apply to the next
/// trial.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MtFeedback {
    pub preference: MtPreference,
    pub guidance_target: i32,
    pub correction_target: i32,
    pub fallback_save_target: i32,
    pub exploration_level: u8,
    pub speed_level: u8,
    pub fallback_load: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MtOutcome {
    pub ball_x: f64,
    pub ball_y: f64,
    pub hit: bool,
    pub distance_to_hole: f64,
    pub impact_speed: f64,
    pub contact_made: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MtMannWhitney {
    pub u: f64,
    pub z: f64,
    pub p_two_sided: f64,
    pub p_greater: f64,
    pub p_less: f64,
    pub exact: bool,
}

/// Opaque session handle.
pub struct MtSession {
    state: SessionState,
    pending_demo: Option<Trajectory>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Status(MtStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn null() -> Failure {
    Failure::Status(MtStatus::NullPointer, "null pointer argument".into())
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(MtStatus::InvalidArgument, msg.into())
}

/// Runs `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> MtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MtStatus::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(&e.to_string());
            MtStatus::from(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(&msg);
            s
        }
        Err(_) => {
            set_last_error("internal panic");
            MtStatus::Panic
        }
    }
}

unsafe fn session_mut<'a>(s: *mut MtSession) -> Result<&'a mut MtSession, Failure> {
    s.as_mut().ok_or_else(null)
}

unsafe fn session_ref<'a>(s: *const MtSession) -> Result<&'a MtSession, Failure> {
    s.as_ref().ok_or_else(null)
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string is not valid UTF-8"))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(slice::from_raw_parts(p, len))
}

fn target(v: i32) -> Result<Option<Target>, Failure> {
    match v {
        MT_TARGET_NONE => Ok(None),
        0 => Ok(Some(Target::First)),
        1 => Ok(Some(Target::Second)),
        other => Err(invalid(format!("target {other} is not 0, 1 or -1"))),
    }
}

fn which_arg(which: u32) -> Result<usize, Failure> {
    match which {
        0 | 1 => Ok(which as usize),
        other => Err(invalid(format!("movement index {other} is not 0 or 1"))),
    }
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn mt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Wire protocol version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn mt_protocol_version() -> *const c_char {
    c"metateach/1".as_ptr()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn mt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Opens a session. `config_toml` may be null for the default configuration.
///
/// # Safety
/// `config_toml` must be null or a nul-terminated string; `out` must be a
/// valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn mt_session_new(
    mode: MtMode,
    seed: u64,
    config_toml: *const c_char,
    out: *mut *mut MtSession,
) -> MtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let config = if config_toml.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_toml_str(str_arg(config_toml)?)?
        };
        let state = SessionState::start(format!("{}-{seed}", Mode::from(mode)), mode.into(), seed, config)?;
        *out = Box::into_raw(Box::new(MtSession {
            state,
            pending_demo: None,
        }));
        Ok(())
    })
}

/// Releases a session. Null is ignored.
///
/// # Safety
/// `session` must be null or a handle from [`mt_session_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mt_session_free(session: *mut MtSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Samples and simulates the next pair of movements.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mt_session_present_pair(session: *mut MtSession) -> MtStatus {
    guard(|| {
        session_mut(session)?.state.present_pair()?;
        Ok(())
    })
}

/// Outcome of movement `which` (0 or 1) of the current pair.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_session_outcome(session: *const MtSession, which: u32, out: *mut MtOutcome) -> MtStatus {
    guard(|| {
        let s = session_ref(session)?;
        let out = out.as_mut().ok_or_else(null)?;
        let pair = s.state.current_pair().ok_or_else(|| {
            Failure::Core(Error::WrongPhase {
                phase: s.state.phase().to_string(),
                op: "outcome".into(),
            })
        })?;
        let o = &pair.outcomes[which_arg(which)?];
        *out = MtOutcome {
            ball_x: o.ball_final[0],
            ball_y: o.ball_final[1],
            hit: o.hit,
            distance_to_hole: o.distance_to_hole,
            impact_speed: o.impact_speed,
            contact_made: o.contact_made,
        };
        Ok(())
    })
}

/// Copies movement `which` of the current pair into `buf` as row-major
/// `[timestep][x, y]`. `written` receives the number of values the full
/// trajectory needs; if `buf_len` is smaller nothing is copied and
/// `BufferTooSmall` is returned.
///
/// # Safety
/// `session` must be a live handle, `buf` valid for `buf_len` doubles and
/// `written` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_session_positions(
    session: *const MtSession,
    which: u32,
    buf: *mut f64,
    buf_len: usize,
    written: *mut usize,
) -> MtStatus {
    guard(|| {
        let s = session_ref(session)?;
        let written = written.as_mut().ok_or_else(null)?;
        let pair = s.state.current_pair().ok_or_else(|| {
            Failure::Core(Error::WrongPhase {
                phase: s.state.phase().to_string(),
                op: "positions".into(),
            })
        })?;
        let traj = &pair.trajectories[which_arg(which)?];
        let flat: Vec<f64> = traj.positions.iter().flatten().copied().collect();
        *written = flat.len();
        if buf_len < flat.len() {
            return Err(Failure::Status(MtStatus::BufferTooSmall, format!("need {} values", flat.len())));
        }
        if buf.is_null() {
            return Err(null());
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), buf, flat.len());
        Ok(())
    })
}

/// Stages a drawn demonstration for the next feedback of this trial.
/// `points` holds `n_points` rows of `[t, x, y]`.
///
/// # Safety
/// `session` must be a live handle and `points` valid for `3 * n_points`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn mt_session_set_demonstration(
    session: *mut MtSession,
    points: *const f64,
    n_points: usize,
) -> MtStatus {
    guard(|| {
        let s = session_mut(session)?;
        if s.state.mode() != Mode::FullModality {
            return Err(Error::Capability("demonstration".into()).into());
        }
        let raw = slice_arg(points, n_points.checked_mul(3).ok_or_else(|| invalid("too many points"))?)?;
        let rows: Vec<[f64; 3]> = raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let traj = Trajectory::from_points(&rows, s.state.config().promp.num_timesteps)?;
        s.pending_demo = Some(traj);
        Ok(())
    })
}

/// Submits feedback for the current pair, attaching any staged
/// demonstration.
///
/// # Safety
/// `session` must be a live handle and `feedback` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_session_submit_feedback(session: *mut MtSession, feedback: *const MtFeedback) -> MtStatus {
    guard(|| {
        let s = session_mut(session)?;
        let fb = feedback.as_ref().ok_or_else(null)?;
        let preference = match fb.preference {
            MtPreference::First => Preference::First,
            MtPreference::Second => Preference::Second,
            MtPreference::Both => Preference::Both,
            MtPreference::None => Preference::None,
        };
        let feedback = TrialFeedback {
            preference,
            guidance_target: target(fb.guidance_target)?,
            correction_target: target(fb.correction_target)?,
            fallback_save_target: target(fb.fallback_save_target)?,
            exploration_level: Level::new(fb.exploration_level)?,
            speed_level: Level::new(fb.speed_level)?,
            demonstration: s.pending_demo.clone(),
            fallback_load: fb.fallback_load,
        };
        s.state.submit_feedback(feedback)?;
        s.pending_demo = None;
        Ok(())
    })
}

/// Submits feedback given as the JSON object used on the wire.
///
/// # Safety
/// `session` must be a live handle and `json` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mt_session_submit_feedback_json(session: *mut MtSession, json: *const c_char) -> MtStatus {
    guard(|| {
        let s = session_mut(session)?;
        let feedback: TrialFeedback = serde_json::from_str(str_arg(json)?)
            .map_err(|e| Failure::Core(Error::Validation(format!("bad feedback: {e}"))))?;
        s.state.submit_feedback(feedback)?;
        s.pending_demo = None;
        Ok(())
    })
}

/// Zero-based index of the current trial; equals the trial count once finished.
///
/// # Safety
/// `session` must be null or a live handle. Returns 0 for null.
#[no_mangle]
pub unsafe extern "C" fn mt_session_trial_index(session: *const MtSession) -> usize {
    session.as_ref().map_or(0, |s| s.state.trial_index())
}

/// # Safety
/// `session` must be null or a live handle. Returns `Finished` for null.
#[no_mangle]
pub unsafe extern "C" fn mt_session_phase(session: *const MtSession) -> MtPhase {
    match session.as_ref().map(|s| s.state.phase()) {
        Some(Phase::ReadyToSample) => MtPhase::ReadyToSample,
        Some(Phase::AwaitingFeedback) => MtPhase::AwaitingFeedback,
        Some(Phase::Finished) | None => MtPhase::Finished,
    }
}

/// Writes the session's JSONL log to `path`.
///
/// # Safety
/// `session` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mt_session_write_log(session: *const MtSession, path: *const c_char) -> MtStatus {
    guard(|| {
        let s = session_ref(session)?;
        s.state.log().write(Path::new(str_arg(path)?))?;
        Ok(())
    })
}

/// Runs a complete scripted session and writes its log to `path`.
///
/// # Safety
/// `path` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mt_run_scripted(mode: MtMode, seed: u64, noisy: bool, path: *const c_char) -> MtStatus {
    guard(|| {
        let path = Path::new(str_arg(path)?);
        let config = ExperimentConfig::default();
        let teacher = TeacherConfig {
            noise_temperature: if noisy { TeacherConfig::NOISY_TEMPERATURE } else { 0.0 },
            ..config.teacher.clone()
        };
        run_scripted_session(mode.into(), &teacher, &config, seed)?.write(path)?;
        Ok(())
    })
}

/// Mann-Whitney U test of group `a` against group `b`.
///
/// # Safety
/// `a` and `b` must be valid for `na` and `nb` doubles, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_mann_whitney(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut MtMannWhitney,
) -> MtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        let r = mann_whitney(slice_arg(a, na)?, slice_arg(b, nb)?)?;
        *out = MtMannWhitney {
            u: r.u,
            z: r.z,
            p_two_sided: r.p_two_sided,
            p_greater: r.p_greater,
            p_less: r.p_less,
            exact: r.exact,
        };
        Ok(())
    })
}

/// Spearman rank correlation of two equally long vectors.
///
/// # Safety
/// `x` and `y` must be valid for `n` doubles; `rho` and `p` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mt_spearman(x: *const f64, y: *const f64, n: usize, rho: *mut f64, p: *mut f64) -> MtStatus {
    guard(|| {
        if rho.is_null() || p.is_null() {
            return Err(null());
        }
        let s = spearman(slice_arg(x, n)?, slice_arg(y, n)?)?;
        *rho = s.rho;
        *p = s.p;
        Ok(())
    })
}

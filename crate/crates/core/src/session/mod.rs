//! The 40-trial teaching loop as an explicit state machine.
//!
//! `ReadyToSample --present_pair--> AwaitingFeedback --submit_feedback-->`
//! `ReadyToSample ... --> Finished`. Every transition appends to the
//! session log; an optional sink receives each record as it is written.

pub mod client;
pub mod log;
pub mod protocol;
pub mod server;

use std::fmt;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::env::{simulate, EnvOutcome};
use crate::error::{Error, Result};
use crate::feedback::{
    build_samples, effective_sigma, fallback_load, speed_factor, FallbackSlot, Level, Mode, TrialFeedback,
};
use crate::learner::{apply_demonstration, update, LearnerState};
use crate::promp::{fit_weights, generate_trajectory, sample_weights, PolicyDistribution, Trajectory, WeightVector};
use crate::rng;
use crate::teacher::{ScriptedTeacher, TeacherConfig};
use crate::{LOG_SCHEMA_VERSION, PROTOCOL_VERSION};

pub use self::log::{LogRecord, RecordBody, SessionLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ReadyToSample,
    AwaitingFeedback,
    Finished,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::ReadyToSample => "ready_to_sample",
            Phase::AwaitingFeedback => "awaiting_feedback",
            Phase::Finished => "finished",
        })
    }
}

/// The two movements shown in the current trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentedPair {
    pub trial_index: usize,
    pub weights: [WeightVector; 2],
    pub trajectories: [Trajectory; 2],
    pub outcomes: [EnvOutcome; 2],
    pub effective_sigma: Vec<f64>,
}

#[derive(Debug)]
enum Clock {
    Logical,
    Wall(Instant),
}

/// Applies one trial's feedback to the learner.
///
/// Order: fallback save, rated samples, learner update, then demonstration
/// or fallback load overwriting the mean. Returns the new learner, the new
/// fallback slot and the fitted demonstration weights, if any.
pub fn apply_trial(
    learner: &LearnerState,
    slot: &FallbackSlot,
    pair: &[WeightVector; 2],
    feedback: &TrialFeedback,
    trial_index: usize,
    config: &ExperimentConfig,
) -> Result<(LearnerState, FallbackSlot, Option<WeightVector>)> {
    feedback.validate()?;
    let demo_weights = feedback
        .demonstration
        .as_ref()
        .map(|d| fit_weights(d, &config.promp))
        .transpose()?;
    let mut slot = slot.clone();
    if let Some(t) = feedback.fallback_save_target {
        slot.save(&pair[t.index()]);
    }
    if feedback.fallback_load && slot.is_empty() {
        return Err(Error::NoFallback);
    }
    let samples = build_samples(feedback, &pair[0], &pair[1], trial_index, &config.learner)?;
    let mut next = update(learner, &samples)?;
    if let Some(w) = &demo_weights {
        next = apply_demonstration(&next, w)?;
    } else if feedback.fallback_load {
        next = fallback_load(&next, &slot)?;
    }
    Ok((next, slot, demo_weights))
}

pub struct SessionState {
    session_id: String,
    mode: Mode,
    seed: u64,
    config: ExperimentConfig,
    trial_index: usize,
    phase: Phase,
    learner: LearnerState,
    fallback: FallbackSlot,
    current: Option<PresentedPair>,
    exploration_level: Level,
    speed_level: Level,
    previous_effective_sigma: Option<Vec<f64>>,
    log: SessionLog,
    clock: Clock,
    sink: Option<Box<dyn Write + Send>>,
}

impl fmt::Debug for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionState")
            .field("session_id", &self.session_id)
            .field("mode", &self.mode)
            .field("trial_index", &self.trial_index)
            .field("phase", &self.phase)
            .finish_non_exhaustive()
    }
}

impl SessionState {
    /// Opens a session with a zero-mean policy. Scripted sessions use a
    /// logical clock so their logs are byte-reproducible.
    pub fn start(session_id: impl Into<String>, mode: Mode, seed: u64, config: ExperimentConfig) -> Result<Self> {
        Self::start_with_clock(session_id.into(), mode, seed, config, Clock::Logical)
    }

    /// Like [`SessionState::start`] but stamps records with wall-clock seconds.
    pub fn start_live(session_id: impl Into<String>, mode: Mode, seed: u64, config: ExperimentConfig) -> Result<Self> {
        Self::start_with_clock(session_id.into(), mode, seed, config, Clock::Wall(Instant::now()))
    }

    fn start_with_clock(session_id: String, mode: Mode, seed: u64, config: ExperimentConfig, clock: Clock) -> Result<Self> {
        config.validate()?;
        let dist = PolicyDistribution::new(WeightVector::zeros(config.promp.weight_len()), config.session.base_sigma)?;
        let learner = LearnerState::new(dist, config.learner.clone());
        let header = log::SessionHeader {
            schema: LOG_SCHEMA_VERSION.to_string(),
            session_id: session_id.clone(),
            mode,
            seed,
            trials: config.session.trials,
            clock: match clock {
                Clock::Logical => "logical".into(),
                Clock::Wall(_) => "wall".into(),
            },
            capabilities: mode.capabilities().into_iter().map(String::from).collect(),
            config: config.clone(),
            initial_learner: learner.clone(),
        };
        let mut s = Self {
            session_id,
            mode,
            seed,
            config,
            trial_index: 0,
            phase: Phase::ReadyToSample,
            learner,
            fallback: FallbackSlot::default(),
            current: None,
            exploration_level: Level::NEUTRAL,
            speed_level: Level::NEUTRAL,
            previous_effective_sigma: None,
            log: SessionLog::default(),
            clock,
            sink: None,
        };
        s.record(RecordBody::SessionStart(Box::new(header)))?;
        Ok(s)
    }

    /// Streams every record (including those already written) to `sink`.
    pub fn attach_sink(&mut self, mut sink: Box<dyn Write + Send>) -> Result<()> {
        sink.write_all(self.log.to_jsonl().as_bytes())?;
        sink.flush()?;
        self.sink = Some(sink);
        Ok(())
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }
    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn phase(&self) -> Phase {
        self.phase
    }
    pub fn trial_index(&self) -> usize {
        self.trial_index
    }
    pub fn trials(&self) -> usize {
        self.config.session.trials
    }
    pub fn learner(&self) -> &LearnerState {
        &self.learner
    }
    pub fn fallback(&self) -> &FallbackSlot {
        &self.fallback
    }
    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }
    pub fn current_pair(&self) -> Option<&PresentedPair> {
        self.current.as_ref()
    }
    pub fn exploration_level(&self) -> Level {
        self.exploration_level
    }
    pub fn speed_level(&self) -> Level {
        self.speed_level
    }
    pub fn log(&self) -> &SessionLog {
        &self.log
    }
    pub fn into_log(self) -> SessionLog {
        self.log
    }
    pub fn capabilities(&self) -> Vec<&'static str> {
        self.mode.capabilities()
    }

    fn record(&mut self, body: RecordBody) -> Result<()> {
        let seq = self.log.records.len() as u64;
        let timestamp = match self.clock {
            Clock::Logical => seq as f64,
            Clock::Wall(t0) => t0.elapsed().as_secs_f64(),
        };
        let rec = LogRecord {
            seq,
            timestamp,
            trial_index: self.trial_index,
            body,
        };
        if let Some(sink) = self.sink.as_mut() {
            writeln!(sink, "{}", rec.to_line())?;
            sink.flush()?;
        }
        self.log.records.push(rec);
        Ok(())
    }

    fn wrong_phase(&self, op: &str) -> Error {
        Error::WrongPhase {
            phase: self.phase.to_string(),
            op: op.to_string(),
        }
    }

    /// Samples, renders and simulates the next pair of movements.
    pub fn present_pair(&mut self) -> Result<&PresentedPair> {
        if self.phase != Phase::ReadyToSample {
            return Err(self.wrong_phase("present_pair"));
        }
        let sigma = effective_sigma(
            &self.learner.dist.sigma,
            self.exploration_level,
            self.previous_effective_sigma.as_deref(),
        );
        let dist = PolicyDistribution {
            mean: self.learner.dist.mean.clone(),
            sigma: sigma.clone(),
            base_sigma: self.learner.dist.base_sigma,
        };
        let trial_seed = rng::derive(self.seed, self.trial_index as u64);
        let weights = [
            sample_weights(&dist, rng::derive(trial_seed, 0)),
            sample_weights(&dist, rng::derive(trial_seed, 1)),
        ];
        let factor = speed_factor(self.speed_level);
        let trajectories = [
            generate_trajectory(&weights[0], &self.config.promp, factor)?,
            generate_trajectory(&weights[1], &self.config.promp, factor)?,
        ];
        let outcomes = [
            simulate(&trajectories[0], &self.config.course)?,
            simulate(&trajectories[1], &self.config.course)?,
        ];
        let pair = PresentedPair {
            trial_index: self.trial_index,
            weights,
            trajectories,
            outcomes,
            effective_sigma: sigma.clone(),
        };
        self.previous_effective_sigma = Some(sigma);
        self.record(RecordBody::PairPresented(Box::new(log::PairRecord {
            weights: pair.weights.clone(),
            trajectories: pair.trajectories.clone(),
            effective_sigma: pair.effective_sigma.clone(),
            exploration_level: self.exploration_level,
            speed_level: self.speed_level,
        })))?;
        self.record(RecordBody::Outcome(log::OutcomeRecord {
            outcomes: pair.outcomes.clone(),
        }))?;
        self.phase = Phase::AwaitingFeedback;
        self.current = Some(pair);
        Ok(self.current.as_ref().expect("pair just stored"))
    }

    /// Applies the feedback for the current pair and advances the trial.
    pub fn submit_feedback(&mut self, feedback: TrialFeedback) -> Result<()> {
        if self.phase != Phase::AwaitingFeedback {
            return Err(self.wrong_phase("submit_feedback"));
        }
        feedback.validate()?;
        feedback.check_mode(self.mode, self.exploration_level, self.speed_level)?;
        let pair = self.current.as_ref().expect("awaiting feedback implies a pair");
        let (learner, slot, demo_weights) = apply_trial(
            &self.learner,
            &self.fallback,
            &pair.weights,
            &feedback,
            self.trial_index,
            &self.config,
        )?;
        let events = feedback.events(self.exploration_level, self.speed_level);
        self.exploration_level = feedback.exploration_level;
        self.speed_level = feedback.speed_level;
        self.learner = learner;
        self.fallback = slot;
        self.record(RecordBody::Feedback(Box::new(log::FeedbackRecord {
            feedback,
            events,
            demo_weights,
        })))?;
        self.record(RecordBody::LearnerSnapshot(Box::new(log::SnapshotRecord {
            learner: self.learner.clone(),
            fallback: self.fallback.clone(),
        })))?;
        self.trial_index += 1;
        self.current = None;
        if self.trial_index >= self.config.session.trials {
            self.phase = Phase::Finished;
            let summary = self.summarize()?;
            self.record(RecordBody::Summary(summary))?;
        } else {
            self.phase = Phase::ReadyToSample;
        }
        Ok(())
    }

    fn summarize(&self) -> Result<log::SummaryRecord> {
        let hits: Vec<bool> = self
            .log
            .trials()?
            .iter()
            .map(|t| t.outcomes.outcomes.iter().any(|o| o.hit))
            .collect();
        Ok(log::SummaryRecord {
            trials_completed: self.trial_index,
            hit_trials: hits.iter().filter(|&&h| h).count(),
            first_hit_trial: hits.iter().position(|&h| h).map(|i| i + 1),
        })
    }

    /// Marks an unfinished log as cut short. No-op once finished.
    pub fn truncate(&mut self, reason: &str) -> Result<()> {
        if self.phase == Phase::Finished || self.log.is_truncated() {
            return Ok(());
        }
        self.record(RecordBody::Truncated(log::TruncationRecord {
            reason: reason.to_string(),
        }))
    }

    pub fn protocol_version(&self) -> &'static str {
        PROTOCOL_VERSION
    }
}

/// Runs a complete session driven by the scripted teacher. The teacher's
/// mode follows `mode`; its seed is derived from `seed`.
pub fn run_scripted_session(
    mode: Mode,
    teacher_cfg: &TeacherConfig,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<SessionLog> {
    let mut session = SessionState::start(format!("{mode}-{seed}"), mode, seed, config.clone())?;
    let mut teacher = ScriptedTeacher::new(
        TeacherConfig {
            mode,
            seed: rng::derive(seed, u64::MAX),
            ..teacher_cfg.clone()
        },
        config.course.clone(),
    );
    while session.phase() != Phase::Finished {
        let pair = session.present_pair()?;
        let [a, b] = &pair.outcomes;
        let fb = teacher.decide(a, b);
        session.submit_feedback(fb)?;
    }
    Ok(session.into_log())
}

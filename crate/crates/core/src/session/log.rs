//! JSONL session log. The log is the ground truth of a session: replaying
//! its pairs and feedback through the learner reproduces every stored
//! learner snapshot bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::env::EnvOutcome;
use crate::error::{Error, Result};
use crate::feedback::{FeedbackEvent, FallbackSlot, Level, Mode, TrialFeedback};
use crate::learner::LearnerState;
use crate::promp::{Trajectory, WeightVector};

use super::apply_trial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub schema: String,
    pub session_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub trials: usize,
    /// `logical` (timestamps are record ticks) or `wall` (seconds).
    pub clock: String,
    pub capabilities: Vec<String>,
    pub config: ExperimentConfig,
    pub initial_learner: LearnerState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub weights: [WeightVector; 2],
    pub trajectories: [Trajectory; 2],
    pub effective_sigma: Vec<f64>,
    pub exploration_level: Level,
    pub speed_level: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub outcomes: [EnvOutcome; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub feedback: TrialFeedback,
    pub events: Vec<FeedbackEvent>,
    /// Weights fitted to the demonstration, if one was given.
    pub demo_weights: Option<WeightVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub learner: LearnerState,
    pub fallback: FallbackSlot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub trials_completed: usize,
    pub hit_trials: usize,
    pub first_hit_trial: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRecord {
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record_kind", content = "payload", rename_all = "snake_case")]
pub enum RecordBody {
    SessionStart(Box<SessionHeader>),
    PairPresented(Box<PairRecord>),
    Outcome(OutcomeRecord),
    Feedback(Box<FeedbackRecord>),
    LearnerSnapshot(Box<SnapshotRecord>),
    Summary(SummaryRecord),
    Truncated(TruncationRecord),
}

impl RecordBody {
    pub fn kind(&self) -> &'static str {
        match self {
            RecordBody::SessionStart(_) => "session_start",
            RecordBody::PairPresented(_) => "pair_presented",
            RecordBody::Outcome(_) => "outcome",
            RecordBody::Feedback(_) => "feedback",
            RecordBody::LearnerSnapshot(_) => "learner_snapshot",
            RecordBody::Summary(_) => "summary",
            RecordBody::Truncated(_) => "truncated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub timestamp: f64,
    pub trial_index: usize,
    #[serde(flatten)]
    pub body: RecordBody,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }
}

/// One trial as reconstructed from the log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialView<'a> {
    pub trial_index: usize,
    pub pair: &'a PairRecord,
    pub outcomes: &'a OutcomeRecord,
    pub feedback: Option<&'a FeedbackRecord>,
    pub snapshot: Option<&'a SnapshotRecord>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    pub records: Vec<LogRecord>,
}

impl SessionLog {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_line());
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::MalformedLog(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<LogRecord>>>()?;
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn header(&self) -> Result<&SessionHeader> {
        match self.records.first().map(|r| &r.body) {
            Some(RecordBody::SessionStart(h)) => Ok(h),
            _ => Err(Error::MalformedLog("log does not start with session_start".into())),
        }
    }

    pub fn summary(&self) -> Option<&SummaryRecord> {
        self.records.iter().rev().find_map(|r| match &r.body {
            RecordBody::Summary(s) => Some(s),
            _ => None,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.summary().is_some()
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self.records.last().map(|r| &r.body), Some(RecordBody::Truncated(_)))
    }

    /// Groups records into trials, checking the per-trial record sequence
    /// `pair_presented, outcome, feedback, learner_snapshot`.
    pub fn trials(&self) -> Result<Vec<TrialView<'_>>> {
        self.header()?;
        let mut out: Vec<TrialView<'_>> = Vec::new();
        let mut pending_pair: Option<(usize, &PairRecord)> = None;
        for (expect_seq, r) in (0u64..).zip(&self.records) {
            if r.seq != expect_seq {
                return Err(Error::MalformedLog(format!("sequence gap at {}", r.seq)));
            }
            let bad = |what: &str| Err(Error::MalformedLog(format!("unexpected {what} at seq {}", r.seq)));
            match &r.body {
                RecordBody::SessionStart(_) => {
                    if r.seq != 0 {
                        return bad("session_start");
                    }
                }
                RecordBody::PairPresented(p) => {
                    let open = out.last().is_some_and(|t| t.feedback.is_none());
                    if pending_pair.is_some() || open || r.trial_index != out.len() {
                        return bad("pair_presented");
                    }
                    pending_pair = Some((r.trial_index, p));
                }
                RecordBody::Outcome(o) => match pending_pair.take() {
                    Some((i, pair)) if i == r.trial_index => out.push(TrialView {
                        trial_index: i,
                        pair,
                        outcomes: o,
                        feedback: None,
                        snapshot: None,
                    }),
                    _ => return bad("outcome"),
                },
                RecordBody::Feedback(f) => match out.last_mut() {
                    Some(t) if t.trial_index == r.trial_index && t.feedback.is_none() => t.feedback = Some(f),
                    _ => return bad("feedback"),
                },
                RecordBody::LearnerSnapshot(s) => match out.last_mut() {
                    Some(t) if t.trial_index == r.trial_index && t.feedback.is_some() && t.snapshot.is_none() => {
                        t.snapshot = Some(s)
                    }
                    _ => return bad("learner_snapshot"),
                },
                RecordBody::Summary(_) | RecordBody::Truncated(_) => {}
            }
        }
        if pending_pair.is_some() && !self.is_truncated() {
            return Err(Error::MalformedLog("pair without outcome".into()));
        }
        Ok(out)
    }

    /// Full structural validation of a finished log.
    pub fn validate_finished(&self) -> Result<()> {
        let header = self.header()?;
        let trials = self.trials()?;
        let summary = self
            .summary()
            .ok_or_else(|| Error::MalformedLog("log has no summary record (truncated?)".into()))?;
        if trials.len() != header.trials || summary.trials_completed != header.trials {
            return Err(Error::MalformedLog(format!(
                "{} trials recorded, {} expected",
                trials.len(),
                header.trials
            )));
        }
        let radius = header.config.course.hole_radius;
        for t in &trials {
            if t.feedback.is_none() || t.snapshot.is_none() {
                return Err(Error::MalformedLog(format!("trial {} incomplete", t.trial_index)));
            }
            for o in &t.outcomes.outcomes {
                if o.hit && o.distance_to_hole > radius {
                    return Err(Error::MalformedLog(format!("trial {} hit outside the cup", t.trial_index)));
                }
            }
            if header.mode == Mode::PreferenceOnly
                && t.feedback.is_some_and(|f| f.events.iter().any(|e| e.modality().is_some()))
            {
                return Err(Error::MalformedLog("meta event in a preference-only log".into()));
            }
        }
        Ok(())
    }

    /// Re-applies every trial's feedback to a fresh learner and returns the
    /// resulting per-trial states.
    pub fn replay(&self) -> Result<Vec<SnapshotRecord>> {
        let header = self.header()?;
        let mut learner = header.initial_learner.clone();
        let mut slot = FallbackSlot::default();
        let mut out = Vec::new();
        for t in self.trials()? {
            let Some(fb) = t.feedback else { break };
            let (next, next_slot, _) = apply_trial(
                &learner,
                &slot,
                &t.pair.weights,
                &fb.feedback,
                t.trial_index,
                &header.config,
            )?;
            learner = next;
            slot = next_slot;
            out.push(SnapshotRecord {
                learner: learner.clone(),
                fallback: slot.clone(),
            });
        }
        Ok(out)
    }

    /// Checks replay equality against the stored snapshots.
    pub fn verify_replay(&self) -> Result<()> {
        let replayed = self.replay()?;
        let stored: Vec<&SnapshotRecord> = self.trials()?.iter().filter_map(|t| t.snapshot).collect();
        if replayed.len() != stored.len() {
            return Err(Error::MalformedLog(format!(
                "replayed {} snapshots, log holds {}",
                replayed.len(),
                stored.len()
            )));
        }
        for (i, (a, b)) in replayed.iter().zip(stored).enumerate() {
            if a != b {
                return Err(Error::MalformedLog(format!("replay diverges at trial {i}")));
            }
        }
        Ok(())
    }
}

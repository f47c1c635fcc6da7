//! Teacher feedback vocabulary and its translation into rewards, sample
//! flags and sampling adjustments.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{apply_demonstration, LearnerConstants, LearnerState, Sample};
use crate::promp::{Trajectory, WeightVector};

/// Exploration multipliers for levels 1..=5.
pub const EXPLORATION_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
/// Playback speed factors for levels 1..=5.
pub const SPEED_FACTORS: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Preference judgments only.
    PreferenceOnly,
    /// Preference plus every meta-modality.
    FullModality,
}

impl Mode {
    pub fn capabilities(self) -> Vec<&'static str> {
        match self {
            Mode::PreferenceOnly => vec!["preference"],
            Mode::FullModality => {
                let mut caps = vec!["preference"];
                caps.extend(Modality::META.iter().map(|m| m.capability()));
                caps.dedup();
                caps
            }
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::PreferenceOnly => "preference_only",
            Mode::FullModality => "full_modality",
        })
    }
}

/// Which of the two presented movements an event refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    First,
    Second,
}

impl Target {
    pub fn index(self) -> usize {
        match self {
            Target::First => 0,
            Target::Second => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    First,
    Second,
    Both,
    None,
}

/// A slider position in `1..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Level(u8);

impl Level {
    pub const MIN: Level = Level(1);
    pub const NEUTRAL: Level = Level(3);
    pub const MAX: Level = Level(5);

    pub fn new(level: u8) -> Result<Self> {
        if (1..=5).contains(&level) {
            Ok(Self(level))
        } else {
            Err(Error::Validation(format!("level {level} outside 1..=5")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn raised(self) -> Self {
        Self((self.0 + 1).min(5))
    }

    pub fn lowered(self) -> Self {
        Self((self.0 - 1).max(1))
    }
}

impl Default for Level {
    fn default() -> Self {
        Self::NEUTRAL
    }
}

impl TryFrom<u8> for Level {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Level::new(v)
    }
}

impl From<Level> for u8 {
    fn from(l: Level) -> u8 {
        l.0
    }
}

/// Meta-modalities as counted in logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Guidance,
    Correction,
    Demonstration,
    Exploration,
    Speed,
    FallbackSave,
    FallbackLoad,
}

impl Modality {
    pub const META: [Modality; 7] = [
        Modality::Guidance,
        Modality::Correction,
        Modality::Demonstration,
        Modality::Exploration,
        Modality::Speed,
        Modality::FallbackSave,
        Modality::FallbackLoad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Guidance => "guidance",
            Modality::Correction => "correction",
            Modality::Demonstration => "demonstration",
            Modality::Exploration => "exploration",
            Modality::Speed => "speed",
            Modality::FallbackSave => "fallback_save",
            Modality::FallbackLoad => "fallback_load",
        }
    }

    /// The UI capability that unlocks this modality.
    pub fn capability(self) -> &'static str {
        match self {
            Modality::FallbackSave | Modality::FallbackLoad => "fallback",
            other => other.name(),
        }
    }
}

/// Everything a teacher can emit during one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum FeedbackEvent {
    Preference { choice: Preference },
    GuidanceMark { target: Target },
    CorrectionMark { target: Target },
    Demonstration { trajectory: Trajectory },
    ExplorationLevel { level: Level },
    SpeedLevel { level: Level },
    FallbackSave { target: Target },
    FallbackLoad,
}

impl FeedbackEvent {
    pub fn modality(&self) -> Option<Modality> {
        match self {
            FeedbackEvent::Preference { .. } => None,
            FeedbackEvent::GuidanceMark { .. } => Some(Modality::Guidance),
            FeedbackEvent::CorrectionMark { .. } => Some(Modality::Correction),
            FeedbackEvent::Demonstration { .. } => Some(Modality::Demonstration),
            FeedbackEvent::ExplorationLevel { .. } => Some(Modality::Exploration),
            FeedbackEvent::SpeedLevel { .. } => Some(Modality::Speed),
            FeedbackEvent::FallbackSave { .. } => Some(Modality::FallbackSave),
            FeedbackEvent::FallbackLoad => Some(Modality::FallbackLoad),
        }
    }
}

/// The complete feedback for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFeedback {
    pub preference: Preference,
    #[serde(default)]
    pub guidance_target: Option<Target>,
    #[serde(default)]
    pub correction_target: Option<Target>,
    #[serde(default)]
    pub fallback_save_target: Option<Target>,
    /// Exploration level for the next sampling step.
    #[serde(default)]
    pub exploration_level: Level,
    /// Speed level for the next sampling step.
    #[serde(default)]
    pub speed_level: Level,
    #[serde(default)]
    pub demonstration: Option<Trajectory>,
    #[serde(default)]
    pub fallback_load: bool,
}

impl TrialFeedback {
    pub fn preference(choice: Preference) -> Self {
        Self {
            preference: choice,
            guidance_target: None,
            correction_target: None,
            fallback_save_target: None,
            exploration_level: Level::NEUTRAL,
            speed_level: Level::NEUTRAL,
            demonstration: None,
            fallback_load: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(g), Some(c)) = (self.guidance_target, self.correction_target) {
            if g == c {
                return Err(Error::Validation(
                    "guidance and correction target the same movement".into(),
                ));
            }
        }
        if let (Some(f), Some(c)) = (self.fallback_save_target, self.correction_target) {
            if f == c {
                return Err(Error::Validation(
                    "fallback save and correction target the same movement".into(),
                ));
            }
        }
        if self.demonstration.is_some() && self.fallback_load {
            return Err(Error::Validation(
                "demonstration and fallback load in the same trial".into(),
            ));
        }
        if let Some(demo) = &self.demonstration {
            demo.validate()?;
        }
        Ok(())
    }

    /// Expands the feedback into events. Slider events are emitted only when
    /// the level differs from the one in force during this trial.
    pub fn events(&self, current_exploration: Level, current_speed: Level) -> Vec<FeedbackEvent> {
        let mut out = vec![FeedbackEvent::Preference {
            choice: self.preference,
        }];
        if let Some(target) = self.guidance_target {
            out.push(FeedbackEvent::GuidanceMark { target });
        }
        if let Some(target) = self.correction_target {
            out.push(FeedbackEvent::CorrectionMark { target });
        }
        if let Some(target) = self.fallback_save_target {
            out.push(FeedbackEvent::FallbackSave { target });
        }
        if let Some(trajectory) = &self.demonstration {
            out.push(FeedbackEvent::Demonstration {
                trajectory: trajectory.clone(),
            });
        }
        if self.fallback_load {
            out.push(FeedbackEvent::FallbackLoad);
        }
        if self.exploration_level != current_exploration {
            out.push(FeedbackEvent::ExplorationLevel {
                level: self.exploration_level,
            });
        }
        if self.speed_level != current_speed {
            out.push(FeedbackEvent::SpeedLevel {
                level: self.speed_level,
            });
        }
        out
    }

    /// Rejects meta feedback when only preferences are allowed.
    pub fn check_mode(&self, mode: Mode, current_exploration: Level, current_speed: Level) -> Result<()> {
        if mode == Mode::FullModality {
            return Ok(());
        }
        match self
            .events(current_exploration, current_speed)
            .iter()
            .find_map(FeedbackEvent::modality)
        {
            Some(m) => Err(Error::Capability(format!(
                "{} is not available in preference-only mode",
                m.name()
            ))),
            None => Ok(()),
        }
    }
}

pub fn preference_rewards(choice: Preference, constants: &LearnerConstants) -> (f64, f64) {
    let r = constants.reward_pref;
    match choice {
        Preference::First => (r, -r),
        Preference::Second => (-r, r),
        Preference::Both => (r, r),
        Preference::None => (-r, -r),
    }
}

/// Turns one trial's feedback into the two rated samples.
pub fn build_samples(
    trial: &TrialFeedback,
    first: &WeightVector,
    second: &WeightVector,
    trial_index: usize,
    constants: &LearnerConstants,
) -> Result<[Sample; 2]> {
    trial.validate()?;
    let (ra, rb) = preference_rewards(trial.preference, constants);
    let mut samples = [
        Sample::plain(first.clone(), ra, trial_index),
        Sample::plain(second.clone(), rb, trial_index),
    ];
    let boost = |s: &mut Sample| {
        s.reward = constants.reward_meta;
        s.original_reward = constants.reward_meta;
        s.is_guidance = true;
    };
    if let Some(t) = trial.guidance_target {
        boost(&mut samples[t.index()]);
    }
    if let Some(t) = trial.fallback_save_target {
        boost(&mut samples[t.index()]);
    }
    if let Some(t) = trial.correction_target {
        let s = &mut samples[t.index()];
        s.reward = -constants.reward_meta;
        s.original_reward = -constants.reward_meta;
        s.is_correction = true;
    }
    Ok(samples)
}

/// Sampling spread for the next pair. The level scales the scheduled
/// sigma; the result never exceeds the previous trial's spread.
pub fn effective_sigma(dist_sigma: &[f64], level: Level, previous: Option<&[f64]>) -> Vec<f64> {
    let mult = EXPLORATION_MULTIPLIERS[(level.get() - 1) as usize];
    let candidate = dist_sigma.iter().map(|s| s * mult);
    match previous {
        Some(prev) => candidate.zip(prev).map(|(c, &p)| c.min(p)).collect(),
        None => candidate.collect(),
    }
}

pub fn speed_factor(level: Level) -> f64 {
    SPEED_FACTORS[(level.get() - 1) as usize]
}

/// Single-slot store for a saved movement.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FallbackSlot {
    pub weights: Option<WeightVector>,
}

impl FallbackSlot {
    /// Saves a movement, replacing any earlier one. The sample joining the
    /// history is flagged as guidance by [`build_samples`].
    pub fn save(&mut self, weights: &WeightVector) {
        self.weights = Some(weights.clone());
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_none()
    }
}

/// Restores the saved movement exactly as a demonstration would.
pub fn fallback_load(state: &LearnerState, slot: &FallbackSlot) -> Result<LearnerState> {
    let weights = slot.weights.as_ref().ok_or(Error::NoFallback)?;
    apply_demonstration(state, weights)
}

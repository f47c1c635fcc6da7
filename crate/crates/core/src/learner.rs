//! Sample-wise reward-weighted averaging (PIBB²).
//!
//! Every rated movement joins a history. On each update the existing
//! rewards decay, the full history is min-max normalized with an eliteness
//! factor, exponentiated, and the resulting weights average the history's
//! weight vectors into the new mean. Exploration shrinks geometrically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::promp::{PolicyDistribution, WeightVector};

/// One rated movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub weights: WeightVector,
    /// Current reward after any decay.
    pub reward: f64,
    pub original_reward: f64,
    pub is_guidance: bool,
    pub is_correction: bool,
    pub trial_index: usize,
}

impl Sample {
    pub fn plain(weights: WeightVector, reward: f64, trial_index: usize) -> Self {
        Self {
            weights,
            reward,
            original_reward: reward,
            is_guidance: false,
            is_correction: false,
            trial_index,
        }
    }

    /// Guidance and correction samples are normalized with the boosted
    /// eliteness factor.
    pub fn is_marked(&self) -> bool {
        self.is_guidance || self.is_correction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConstants {
    pub eliteness_h: f64,
    pub reward_decay: f64,
    pub covariance_decay: f64,
    pub guidance_decay: f64,
    pub guidance_eliteness_multiplier: f64,
    pub reward_pref: f64,
    pub reward_meta: f64,
}

impl Default for LearnerConstants {
    fn default() -> Self {
        Self {
            eliteness_h: 10.0,
            reward_decay: 0.9,
            covariance_decay: 0.973,
            guidance_decay: 0.5,
            guidance_eliteness_multiplier: 1.3,
            reward_pref: 100.0,
            reward_meta: 150.0,
        }
    }
}

impl LearnerConstants {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.eliteness_h > 0.0 && self.reward_pref > 0.0 && self.reward_meta > 0.0) {
            return Err(Error::Config("eliteness and rewards must be positive".into()));
        }
        if !(unit(self.reward_decay) && unit(self.covariance_decay) && unit(self.guidance_decay)) {
            return Err(Error::Config("decay factors must lie in (0, 1)".into()));
        }
        if self.guidance_eliteness_multiplier.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Config("guidance eliteness multiplier must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub dist: PolicyDistribution,
    pub history: Vec<Sample>,
    pub constants: LearnerConstants,
    pub update_count: u32,
}

impl LearnerState {
    pub fn new(dist: PolicyDistribution, constants: LearnerConstants) -> Self {
        Self {
            dist,
            history: Vec::new(),
            constants,
            update_count: 0,
        }
    }

    /// Exploration scale after `update_count` updates.
    pub fn scheduled_sigma(&self) -> f64 {
        self.dist.base_sigma * self.constants.covariance_decay.powi(self.update_count as i32)
    }
}

/// Decays the rewards already in `history`.
///
/// Everything except the most recent guidance sample is multiplied by the
/// reward decay; when the incoming samples carry guidance, the same samples
/// are additionally multiplied by the guidance decay.
pub fn decay_rewards(
    history: &[Sample],
    constants: &LearnerConstants,
    new_samples_contain_guidance: bool,
) -> Vec<Sample> {
    let spared = history.iter().rposition(|s| s.is_guidance);
    history
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut s = s.clone();
            if Some(i) != spared {
                s.reward *= constants.reward_decay;
                if new_samples_contain_guidance {
                    s.reward *= constants.guidance_decay;
                }
            }
            s
        })
        .collect()
}

/// Min-max normalization onto `[-h_i, 0]`, with `h_i` boosted for marked
/// samples. A zero reward range maps every sample to 0.
pub fn normalize_rewards(history: &[Sample], constants: &LearnerConstants) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let min = history.iter().map(|s| s.reward).fold(f64::INFINITY, f64::min);
    let max = history.iter().map(|s| s.reward).fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Ok(vec![0.0; history.len()]);
    }
    Ok(history
        .iter()
        .map(|s| {
            let h = if s.is_marked() {
                constants.eliteness_h * constants.guidance_eliteness_multiplier
            } else {
                constants.eliteness_h
            };
            -h * (1.0 - (s.reward - min) / range)
        })
        .collect())
}

/// Exponentiates normalized rewards and scales them to sum to one.
pub fn pibb2_weights(normalized: &[f64]) -> Result<Vec<f64>> {
    if normalized.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let exp: Vec<f64> = normalized.iter().map(|r| r.exp()).collect();
    let sum: f64 = exp.iter().sum();
    Ok(exp.into_iter().map(|e| e / sum).collect())
}

/// One sample-wise update with the one or two samples of a rated round.
pub fn update(state: &LearnerState, new_samples: &[Sample]) -> Result<LearnerState> {
    if new_samples.is_empty() || new_samples.len() > 2 {
        return Err(Error::Validation(format!(
            "an update takes one or two samples, got {}",
            new_samples.len()
        )));
    }
    let dim = state.dist.dim();
    for s in new_samples {
        s.weights.check_len(dim)?;
        if s.is_guidance && s.is_correction {
            return Err(Error::Validation("sample marked as both guidance and correction".into()));
        }
    }
    let guided = new_samples.iter().any(|s| s.is_guidance);
    let mut history = decay_rewards(&state.history, &state.constants, guided);
    history.extend(new_samples.iter().cloned());

    let normalized = normalize_rewards(&history, &state.constants)?;
    let weights = pibb2_weights(&normalized)?;
    let mut mean = vec![0.0; dim];
    for (s, w) in history.iter().zip(&weights) {
        for (m, v) in mean.iter_mut().zip(&s.weights.0) {
            *m += w * v;
        }
    }

    let update_count = state.update_count + 1;
    let mut next = LearnerState {
        dist: PolicyDistribution {
            mean: WeightVector(mean),
            sigma: Vec::new(),
            base_sigma: state.dist.base_sigma,
        },
        history,
        constants: state.constants.clone(),
        update_count,
    };
    next.dist.sigma = vec![next.scheduled_sigma(); dim];
    Ok(next)
}

/// Replaces the mean with demonstrated weights and forgets the history.
/// The exploration schedule is left where it was.
pub fn apply_demonstration(state: &LearnerState, demo_weights: &WeightVector) -> Result<LearnerState> {
    demo_weights.check_len(state.dist.dim())?;
    let mut next = state.clone();
    next.dist.mean = demo_weights.clone();
    next.history.clear();
    Ok(next)
}

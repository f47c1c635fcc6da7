//! Experiment configuration: one TOML file holding movement, learner,
//! course and teacher parameters. Every section is optional and falls back
//! to the defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::CourseConfig;
use crate::error::{Error, Result};
use crate::learner::LearnerConstants;
use crate::promp::BasisConfig;
use crate::teacher::TeacherConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionSettings {
    pub trials: usize,
    /// Initial exploration scale.
    pub base_sigma: f64,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            trials: crate::DEFAULT_TRIALS,
            base_sigma: 0.15,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub session: SessionSettings,
    pub promp: BasisConfig,
    pub learner: LearnerConstants,
    pub course: CourseConfig,
    pub teacher: TeacherConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.promp.validate()?;
        if self.promp.num_dof != 2 {
            return Err(Error::Config("the minigolf club path needs num_dof = 2".into()));
        }
        self.learner.validate()?;
        self.course.validate()?;
        self.teacher.validate()?;
        if self.session.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if !(self.session.base_sigma.is_finite() && self.session.base_sigma > 0.0) {
            return Err(Error::Config("base_sigma must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_file_overrides_one_value() {
        let cfg = ExperimentConfig::from_toml_str("[learner]\nreward_decay = 0.8\n").unwrap();
        assert_eq!(cfg.learner.reward_decay, 0.8);
        assert_eq!(cfg.learner.covariance_decay, 0.973);
        assert_eq!(cfg.session.trials, 40);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[course]\nrestitution = 1.5\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[promp]\nnum_basis = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[session\n").is_err());
    }
}

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::Modality;
use crate::session::SessionLog;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionMetrics {
    /// 1-based trial of the first hit.
    pub first_hit_trial: Option<usize>,
    pub total_hits: usize,
    /// A trial counts as a hit when either presented movement holes out.
    pub hits_per_trial: Vec<bool>,
    pub modality_counts: BTreeMap<Modality, usize>,
    /// Meta events per trial, for correlation with hits.
    pub modality_per_trial: Vec<BTreeMap<Modality, usize>>,
    pub trials: usize,
}

impl SessionMetrics {
    /// First-hit trial with hitless sessions counted as `trials + 1`.
    pub fn censored_first_hit(&self) -> usize {
        self.first_hit_trial.unwrap_or(self.trials + 1)
    }
}

pub fn extract_metrics(log: &SessionLog) -> Result<SessionMetrics> {
    let header = log.header()?;
    if !log.is_finished() {
        return Err(Error::MalformedLog("session did not finish".into()));
    }
    let trials = log.trials()?;
    if trials.len() != header.trials {
        return Err(Error::MalformedLog(format!(
            "{} of {} trials present",
            trials.len(),
            header.trials
        )));
    }
    let mut hits_per_trial = Vec::with_capacity(trials.len());
    let mut modality_counts = BTreeMap::new();
    let mut modality_per_trial = Vec::with_capacity(trials.len());
    for t in &trials {
        hits_per_trial.push(t.outcomes.outcomes.iter().any(|o| o.hit));
        let fb = t
            .feedback
            .ok_or_else(|| Error::MalformedLog(format!("trial {} has no feedback", t.trial_index)))?;
        let mut per = BTreeMap::new();
        for m in fb.events.iter().filter_map(|e| e.modality()) {
            *per.entry(m).or_insert(0) += 1;
            *modality_counts.entry(m).or_insert(0) += 1;
        }
        modality_per_trial.push(per);
    }
    Ok(SessionMetrics {
        first_hit_trial: hits_per_trial.iter().position(|&h| h).map(|i| i + 1),
        total_hits: hits_per_trial.iter().filter(|&&h| h).count(),
        hits_per_trial,
        modality_counts,
        modality_per_trial,
        trials: header.trials,
    })
}

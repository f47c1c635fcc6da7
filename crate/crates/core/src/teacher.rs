//! Scripted teachers standing in for human participants.
//!
//! The preference-only teacher compares the two outcomes by distance to
//! the hole. The full-modality teacher additionally marks guidance and
//! corrections, steers speed, lowers exploration after successes, and
//! saves/restores a fallback movement. It never demonstrates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{CourseConfig, EnvOutcome};
use crate::error::{Error, Result};
use crate::feedback::{Level, Mode, Preference, Target, TrialFeedback};
use crate::rng;

/// Trials inspected by the fallback-load rule.
pub const FALLBACK_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherConfig {
    pub mode: Mode,
    /// Preference noise scale in meters; 0 gives the oracle.
    pub noise_temperature: f64,
    pub both_threshold: f64,
    pub none_threshold: f64,
    pub guidance_margin: f64,
    pub correction_margin: f64,
    pub seed: u64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            mode: Mode::FullModality,
            noise_temperature: 0.0,
            both_threshold: 0.08,
            none_threshold: 0.6,
            guidance_margin: 0.05,
            correction_margin: 0.3,
            seed: 0,
        }
    }
}

impl TeacherConfig {
    /// Noise level used for "human-like" runs.
    pub const NOISY_TEMPERATURE: f64 = 0.05;

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_temperature >= 0.0 && self.noise_temperature.is_finite()) {
            return Err(Error::Config("noise_temperature must be non-negative".into()));
        }
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.both_threshold)
            && pos(self.none_threshold)
            && pos(self.guidance_margin)
            && pos(self.correction_margin))
        {
            return Err(Error::Config("teacher thresholds and margins must be positive".into()));
        }
        Ok(())
    }
}

/// What the teacher remembers about the session so far.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub best_distance: f64,
    pub hit_trials: u32,
    pub exploration_level: Level,
    pub speed_level: Level,
    pub has_fallback: bool,
    /// Per-trial (closest distance, any hit) since the last fallback load.
    pub recent: Vec<(f64, bool)>,
}

impl Default for SessionSummary {
    fn default() -> Self {
        Self {
            best_distance: f64::INFINITY,
            hit_trials: 0,
            exploration_level: Level::NEUTRAL,
            speed_level: Level::NEUTRAL,
            has_fallback: false,
            recent: Vec::new(),
        }
    }
}

fn distances(a: &EnvOutcome, b: &EnvOutcome) -> (f64, f64) {
    (a.distance_to_hole, b.distance_to_hole)
}

/// Picks the preferred movement. With `noise_temperature > 0` a strict
/// First/Second choice flips with probability `1 / (1 + exp(Δ/τ))`.
pub fn choose_preference(
    out_a: &EnvOutcome,
    out_b: &EnvOutcome,
    cfg: &TeacherConfig,
    best_distance: f64,
    rng: &mut ChaCha8Rng,
) -> Preference {
    let (da, db) = distances(out_a, out_b);
    if (out_a.hit && out_b.hit) || (da < cfg.both_threshold && db < cfg.both_threshold) {
        return Preference::Both;
    }
    if da > cfg.none_threshold && db > cfg.none_threshold && da >= best_distance && db >= best_distance {
        return Preference::None;
    }
    let choice = if db < da {
        Preference::Second
    } else {
        Preference::First
    };
    if cfg.noise_temperature > 0.0 {
        let flip = 1.0 / (1.0 + ((da - db).abs() / cfg.noise_temperature).exp());
        if rng.random::<f64>() < flip {
            return match choice {
                Preference::First => Preference::Second,
                _ => Preference::First,
            };
        }
    }
    choice
}

/// Adds the full-modality teacher's meta feedback to a preference.
pub fn meta_actions(
    out_a: &EnvOutcome,
    out_b: &EnvOutcome,
    preference: Preference,
    summary: &SessionSummary,
    cfg: &TeacherConfig,
    course: &CourseConfig,
) -> Result<TrialFeedback> {
    if cfg.mode != Mode::FullModality {
        return Err(Error::Capability("meta actions need full-modality mode".into()));
    }
    let outs = [out_a, out_b];
    let (da, db) = distances(out_a, out_b);
    let closer = if db < da { Target::Second } else { Target::First };
    let preferred = match preference {
        Preference::First => Some(Target::First),
        Preference::Second => Some(Target::Second),
        Preference::Both => Some(closer),
        Preference::None => None,
    };
    let best = summary.best_distance;
    let mut fb = TrialFeedback::preference(preference);

    if let Some(p) = preferred {
        if outs[p.index()].distance_to_hole < best - cfg.guidance_margin {
            fb.guidance_target = Some(p);
        }
    }

    if preference != Preference::Both && best.is_finite() {
        let candidates: Vec<Target> = [Target::First, Target::Second]
            .into_iter()
            .filter(|&t| Some(t) != preferred)
            .filter(|&t| outs[t.index()].distance_to_hole > best + cfg.correction_margin)
            .collect();
        fb.correction_target = candidates.into_iter().max_by(|x, y| {
            outs[x.index()]
                .distance_to_hole
                .total_cmp(&outs[y.index()].distance_to_hole)
        });
    }

    let new_best = outs[closer.index()].distance_to_hole < best;
    if new_best && fb.correction_target != Some(closer) {
        fb.fallback_save_target = Some(closer);
    }

    fb.speed_level = summary.speed_level;
    let judged = preferred.unwrap_or(closer);
    let shot = outs[judged.index()];
    if shot.contact_made && !shot.hit {
        let offset = shot.along_line_offset(course);
        if offset < -course.hole_radius {
            fb.speed_level = summary.speed_level.raised();
        } else if offset > course.hole_radius {
            fb.speed_level = summary.speed_level.lowered();
        }
    }

    let trial_hit = out_a.hit || out_b.hit;
    let hits = summary.hit_trials + u32::from(trial_hit);
    fb.exploration_level = match hits {
        0 => Level::NEUTRAL,
        1 | 2 => Level::new(2).expect("valid level"),
        _ => Level::MIN,
    };
    // Levels only ever go down under this rule.
    fb.exploration_level = fb.exploration_level.min(summary.exploration_level);

    if summary.has_fallback && fb.fallback_save_target.is_none() {
        let best_now = best.min(da).min(db);
        let mut window: Vec<(f64, bool)> = summary.recent.clone();
        window.push((da.min(db), trial_hit));
        if window.len() >= FALLBACK_WINDOW
            && window[window.len() - FALLBACK_WINDOW..]
                .iter()
                .all(|&(d, hit)| !hit && d >= 2.0 * best_now)
        {
            fb.fallback_load = true;
        }
    }

    Ok(fb)
}

/// A stateful scripted teacher for one session.
#[derive(Debug, Clone)]
pub struct ScriptedTeacher {
    cfg: TeacherConfig,
    course: CourseConfig,
    rng: ChaCha8Rng,
    summary: SessionSummary,
}

impl ScriptedTeacher {
    pub fn new(cfg: TeacherConfig, course: CourseConfig) -> Self {
        let rng = rng::chacha(cfg.seed);
        Self {
            cfg,
            course,
            rng,
            summary: SessionSummary::default(),
        }
    }

    pub fn summary(&self) -> &SessionSummary {
        &self.summary
    }

    pub fn config(&self) -> &TeacherConfig {
        &self.cfg
    }

    /// Produces this trial's feedback and updates the teacher's memory.
    pub fn decide(&mut self, out_a: &EnvOutcome, out_b: &EnvOutcome) -> TrialFeedback {
        let preference = choose_preference(out_a, out_b, &self.cfg, self.summary.best_distance, &mut self.rng);
        let fb = match self.cfg.mode {
            Mode::PreferenceOnly => TrialFeedback::preference(preference),
            Mode::FullModality => meta_actions(out_a, out_b, preference, &self.summary, &self.cfg, &self.course)
                .expect("full-modality mode checked"),
        };
        self.observe(out_a, out_b, &fb);
        fb
    }

    fn observe(&mut self, out_a: &EnvOutcome, out_b: &EnvOutcome, fb: &TrialFeedback) {
        let s = &mut self.summary;
        let closest = out_a.distance_to_hole.min(out_b.distance_to_hole);
        let hit = out_a.hit || out_b.hit;
        s.best_distance = s.best_distance.min(closest);
        s.hit_trials += u32::from(hit);
        s.exploration_level = fb.exploration_level;
        s.speed_level = fb.speed_level;
        if fb.fallback_save_target.is_some() {
            s.has_fallback = true;
        }
        if fb.fallback_load {
            s.recent.clear();
        } else {
            s.recent.push((closest, hit));
        }
    }
}

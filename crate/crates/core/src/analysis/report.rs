//! Two-group comparison report with CSV and plain-text output.
//!
//! Files written by [`GroupReport::write`]:
//!
//! * `summary.csv`: `group,sessions,sessions_with_hit,first_hit_mean,first_hit_sd,first_hit_censored_mean,first_hit_censored_sd,total_hits_mean,total_hits_sd`
//! * `hit_rate.csv`: `group,trial,hit_rate` (one row per group and trial)
//! * `tests.csv`: `metric,u,z,p_two_sided,p_a_greater,p_a_less,exact`
//! * `correlations.csv`: `group,modality,n,rho,p` (empty rho/p when undefined)
//! * `summary.txt`: the same numbers in prose form

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::Modality;
use crate::session::SessionLog;

use super::metrics::{extract_metrics, SessionMetrics};
use super::stats::{mann_whitney, spearman, MannWhitney, Spearman};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub sessions: usize,
    pub sessions_with_hit: usize,
    /// Over sessions that hit at least once.
    pub first_hit_mean: Option<f64>,
    pub first_hit_sd: Option<f64>,
    /// Hitless sessions counted as trials + 1.
    pub first_hit_censored_mean: f64,
    pub first_hit_censored_sd: f64,
    pub total_hits_mean: f64,
    pub total_hits_sd: f64,
    pub hit_rate: Vec<f64>,
    pub correlations: Vec<(Modality, Option<Spearman>, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub a: GroupSummary,
    pub b: GroupSummary,
    /// Mann-Whitney on censored first-hit trials, group A first.
    pub first_hit_test: MannWhitney,
    /// Mann-Whitney on total hits, group A first.
    pub total_hits_test: MannWhitney,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn summarize(label: &str, metrics: &[SessionMetrics]) -> GroupSummary {
    let trials = metrics.iter().map(|m| m.trials).max().unwrap_or(0);
    let firsts: Vec<f64> = metrics.iter().filter_map(|m| m.first_hit_trial).map(|v| v as f64).collect();
    let censored: Vec<f64> = metrics.iter().map(|m| m.censored_first_hit() as f64).collect();
    let totals: Vec<f64> = metrics.iter().map(|m| m.total_hits as f64).collect();
    let (fm, fsd) = if firsts.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_sd(&firsts);
        (Some(m), Some(s))
    };
    let (cm, csd) = mean_sd(&censored);
    let (tm, tsd) = mean_sd(&totals);
    let hit_rate = (0..trials)
        .map(|t| {
            let hits = metrics
                .iter()
                .filter(|m| m.hits_per_trial.get(t).copied().unwrap_or(false))
                .count();
            hits as f64 / metrics.len() as f64
        })
        .collect();

    // Per-trial modality usage against the trial's hit indicator, pooled
    // over sessions.
    let hits: Vec<f64> = metrics
        .iter()
        .flat_map(|m| m.hits_per_trial.iter().map(|&h| f64::from(u8::from(h))))
        .collect();
    let correlations = Modality::META
        .iter()
        .map(|&modality| {
            let usage: Vec<f64> = metrics
                .iter()
                .flat_map(|m| {
                    m.modality_per_trial
                        .iter()
                        .map(move |per| per.get(&modality).copied().unwrap_or(0) as f64)
                })
                .collect();
            (modality, spearman(&usage, &hits).ok(), usage.len())
        })
        .collect();

    GroupSummary {
        label: label.to_string(),
        sessions: metrics.len(),
        sessions_with_hit: firsts.len(),
        first_hit_mean: fm,
        first_hit_sd: fsd,
        first_hit_censored_mean: cm,
        first_hit_censored_sd: csd,
        total_hits_mean: tm,
        total_hits_sd: tsd,
        hit_rate,
        correlations,
    }
}

/// Compares two groups of finished session logs.
pub fn group_report(logs_a: &[SessionLog], logs_b: &[SessionLog]) -> Result<GroupReport> {
    group_report_labeled(("A", logs_a), ("B", logs_b))
}

pub fn group_report_labeled(a: (&str, &[SessionLog]), b: (&str, &[SessionLog])) -> Result<GroupReport> {
    if a.1.is_empty() || b.1.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let ma = a.1.iter().map(extract_metrics).collect::<Result<Vec<_>>>()?;
    let mb = b.1.iter().map(extract_metrics).collect::<Result<Vec<_>>>()?;
    let censored = |ms: &[SessionMetrics]| ms.iter().map(|m| m.censored_first_hit() as f64).collect::<Vec<_>>();
    let totals = |ms: &[SessionMetrics]| ms.iter().map(|m| m.total_hits as f64).collect::<Vec<_>>();
    Ok(GroupReport {
        first_hit_test: mann_whitney(&censored(&ma), &censored(&mb))?,
        total_hits_test: mann_whitney(&totals(&ma), &totals(&mb))?,
        a: summarize(a.0, &ma),
        b: summarize(b.0, &mb),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl GroupReport {
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "group",
            "sessions",
            "sessions_with_hit",
            "first_hit_mean",
            "first_hit_sd",
            "first_hit_censored_mean",
            "first_hit_censored_sd",
            "total_hits_mean",
            "total_hits_sd",
        ])
        .map_err(csv_err)?;
        for g in [&self.a, &self.b] {
            w.write_record([
                g.label.clone(),
                g.sessions.to_string(),
                g.sessions_with_hit.to_string(),
                opt(g.first_hit_mean),
                opt(g.first_hit_sd),
                g.first_hit_censored_mean.to_string(),
                g.first_hit_censored_sd.to_string(),
                g.total_hits_mean.to_string(),
                g.total_hits_sd.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }

    pub fn hit_rate_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "trial", "hit_rate"]).map_err(csv_err)?;
        for g in [&self.a, &self.b] {
            for (t, r) in g.hit_rate.iter().enumerate() {
                w.write_record([g.label.clone(), (t + 1).to_string(), r.to_string()])
                    .map_err(csv_err)?;
            }
        }
        finish(w)
    }

    pub fn tests_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "u", "z", "p_two_sided", "p_a_greater", "p_a_less", "exact"])
            .map_err(csv_err)?;
        for (name, t) in [("first_hit_trial", &self.first_hit_test), ("total_hits", &self.total_hits_test)] {
            w.write_record([
                name.to_string(),
                t.u.to_string(),
                t.z.to_string(),
                t.p_two_sided.to_string(),
                t.p_greater.to_string(),
                t.p_less.to_string(),
                t.exact.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }

    pub fn correlations_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "modality", "n", "rho", "p"]).map_err(csv_err)?;
        for g in [&self.a, &self.b] {
            for (m, s, n) in &g.correlations {
                w.write_record([
                    g.label.clone(),
                    m.name().to_string(),
                    n.to_string(),
                    opt(s.as_ref().map(|s| s.rho)),
                    opt(s.as_ref().map(|s| s.p)),
                ])
                .map_err(csv_err)?;
            }
        }
        finish(w)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for g in [&self.a, &self.b] {
            let _ = writeln!(s, "group {} ({} sessions, {} with a hit)", g.label, g.sessions, g.sessions_with_hit);
            match (g.first_hit_mean, g.first_hit_sd) {
                (Some(m), Some(sd)) => {
                    let _ = writeln!(s, "  first hit: M = {m:.2} (SD = {sd:.2}) over sessions with a hit");
                }
                _ => {
                    let _ = writeln!(s, "  first hit: none");
                }
            }
            let _ = writeln!(
                s,
                "  first hit, censored: M = {:.2} (SD = {:.2})",
                g.first_hit_censored_mean, g.first_hit_censored_sd
            );
            let _ = writeln!(s, "  total hits: M = {:.2} (SD = {:.2})", g.total_hits_mean, g.total_hits_sd);
            for (m, sp, _) in &g.correlations {
                if let Some(sp) = sp {
                    let _ = writeln!(s, "  {} vs hit: rho = {:.4}, p = {:.4}", m.name(), sp.rho, sp.p);
                }
            }
        }
        for (name, t) in [("first-hit trial", &self.first_hit_test), ("total hits", &self.total_hits_test)] {
            let _ = writeln!(
                s,
                "Mann-Whitney on {name} ({} vs {}): U = {}, Z = {:.4}, p = {:.4} (two-sided){}",
                self.a.label,
                self.b.label,
                t.u,
                t.z,
                t.p_two_sided,
                if t.exact { ", exact" } else { "" }
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let files = [
            ("summary.csv", self.summary_csv()?),
            ("hit_rate.csv", self.hit_rate_csv()?),
            ("tests.csv", self.tests_csv()?),
            ("correlations.csv", self.correlations_csv()?),
            ("summary.txt", self.summary_text()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

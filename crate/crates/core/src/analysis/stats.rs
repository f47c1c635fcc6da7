//! Rank statistics: Wilcoxon-Mann-Whitney and Spearman.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Pooled sizes up to this bound get an exact permutation p-value.
pub const EXACT_MAX_N: usize = 12;

const TIE_EPS: f64 = 1e-9;

/// Midranks (1-based), ties share the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of the tie groups in `values`.
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwMethod {
    /// Exact when `n_a + n_b <= EXACT_MAX_N`, normal approximation otherwise.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MannWhitney {
    /// U statistic of the first group: pairs where it is larger, ties count half.
    pub u: f64,
    /// Tie-corrected, continuity-corrected normal score. Positive when the
    /// first group tends to be larger.
    pub z: f64,
    pub p_two_sided: f64,
    /// P-value for "first group stochastically greater".
    pub p_greater: f64,
    /// P-value for "first group stochastically smaller".
    pub p_less: f64,
    pub exact: bool,
}

pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    mann_whitney_with(a, b, MwMethod::Auto)
}

pub fn mann_whitney_with(a: &[f64], b: &[f64], method: MwMethod) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let mean = (na * nb) as f64 / 2.0;

    let tie_term: f64 = tie_groups(&pooled)
        .into_iter()
        .map(|t| (t * t * t - t) as f64)
        .sum();
    let nf = n as f64;
    let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)).max(1.0));
    let sd = var.max(0.0).sqrt();
    let normal = Normal::standard();
    let dev = u - mean;

    let z = if sd > 0.0 {
        dev.signum() * (dev.abs() - 0.5).max(0.0) / sd
    } else {
        0.0
    };

    let exact = match method {
        MwMethod::Auto => n <= EXACT_MAX_N,
        MwMethod::Exact => true,
        MwMethod::Normal => false,
    };

    let (p_two_sided, p_greater, p_less) = if exact {
        exact_p(&ranks, na, u, mean)
    } else if sd == 0.0 {
        (1.0, 1.0, 1.0)
    } else {
        let two = 2.0 * (1.0 - normal.cdf(z.abs()));
        let greater = 1.0 - normal.cdf((dev - 0.5) / sd);
        let less = normal.cdf((dev + 0.5) / sd);
        (two.min(1.0), greater.min(1.0), less.min(1.0))
    };

    Ok(MannWhitney {
        u,
        z,
        p_two_sided,
        p_greater,
        p_less,
        exact,
    })
}

/// Exact permutation p-values given the pooled midranks: enumerates every
/// way to choose the first group's positions.
fn exact_p(ranks: &[f64], na: usize, u_obs: f64, mean: f64) -> (f64, f64, f64) {
    let n = ranks.len();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let dev_obs = (u_obs - mean).abs();
    let (mut total, mut ge, mut le, mut extreme) = (0u64, 0u64, 0u64, 0u64);
    let mut idx: Vec<usize> = (0..na).collect();
    loop {
        let u = idx.iter().map(|&i| ranks[i]).sum::<f64>() - offset;
        total += 1;
        if u >= u_obs - TIE_EPS {
            ge += 1;
        }
        if u <= u_obs + TIE_EPS {
            le += 1;
        }
        if (u - mean).abs() >= dev_obs - TIE_EPS {
            extreme += 1;
        }
        // Next combination in lexicographic order.
        let mut k = na;
        loop {
            if k == 0 {
                let t = total as f64;
                return ((extreme as f64 / t).min(1.0), ge as f64 / t, le as f64 / t);
            }
            k -= 1;
            if idx[k] < n - na + k {
                idx[k] += 1;
                for j in k + 1..na {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided p from a t distribution with n - 2 degrees of freedom.
    pub p: f64,
    pub n: usize,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::Validation("spearman needs at least 3 pairs".into()));
    }
    let rho = pearson(&midranks(x), &midranks(y)).ok_or(Error::UndefinedCorrelation)?;
    let n = x.len();
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0)
    };
    Ok(Spearman { rho, p, n })
}

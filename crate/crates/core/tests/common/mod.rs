//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use metateach::learner::{decay_rewards, update, LearnerConstants, LearnerState, Sample};
use metateach::promp::{PolicyDistribution, WeightVector};

pub const ALPHABET: [f64; 4] = [-150.0, -100.0, 100.0, 150.0];

pub fn sample_with(weights: WeightVector, original: f64, trial_index: usize) -> Sample {
    Sample {
        is_guidance: original == 150.0,
        is_correction: original == -150.0,
        ..Sample::plain(weights, original, trial_index)
    }
}

pub fn random_weights(rng: &mut ChaCha8Rng, dim: usize) -> WeightVector {
    WeightVector((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Grows a history round by round (one or two samples per round) with the
/// library's decay, and tracks the expected decayed rewards separately.
/// Returns the history and the oracle rewards in the same order.
pub fn decayed_history(rng: &mut ChaCha8Rng, size: usize, c: &LearnerConstants) -> (Vec<Sample>, Vec<f64>) {
    let mut history: Vec<Sample> = Vec::new();
    let mut expected: Vec<f64> = Vec::new();
    while history.len() < size {
        let n = if size - history.len() >= 2 && rng.random_bool(0.5) { 2 } else { 1 };
        let round: Vec<Sample> = (0..n)
            .map(|_| sample_with(random_weights(rng, 2), *ALPHABET.choose(rng).unwrap(), 0))
            .collect();
        let guided = round.iter().any(|s| s.is_guidance);
        // Only the most recent guidance sample keeps its reward.
        let mut spared = None;
        for (i, s) in history.iter().enumerate() {
            if s.is_guidance {
                spared = Some(i);
            }
        }
        for (i, r) in expected.iter_mut().enumerate() {
            if Some(i) != spared {
                *r *= c.reward_decay;
                if guided {
                    *r *= c.guidance_decay;
                }
            }
        }
        history = decay_rewards(&history, c, guided);
        for s in round {
            expected.push(s.original_reward);
            history.push(s);
        }
    }
    (history, expected)
}

/// Min-max normalization written as `-h * (max - r) / (max - min)`.
pub fn oracle_normalize(rewards: &[f64], marked: &[bool], c: &LearnerConstants) -> Vec<f64> {
    let mut sorted = rewards.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    rewards
        .iter()
        .zip(marked)
        .map(|(&r, &m)| {
            if hi == lo {
                return 0.0;
            }
            let h = if m { c.eliteness_h * c.guidance_eliteness_multiplier } else { c.eliteness_h };
            -h * (hi - r) / (hi - lo)
        })
        .collect()
}

pub fn oracle_weights(normalized: &[f64]) -> Vec<f64> {
    let exps: Vec<f64> = normalized.iter().map(|x| x.exp()).collect();
    let mut sorted = exps.clone();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Learner after `rounds` random rated rounds.
pub fn random_state(rng: &mut ChaCha8Rng, dim: usize, rounds: usize) -> LearnerState {
    let dist = PolicyDistribution::new(random_weights(rng, dim), 0.15).unwrap();
    let mut state = LearnerState::new(dist, LearnerConstants::default());
    for t in 0..rounds {
        let n = rng.random_range(1..=2);
        let round: Vec<Sample> = (0..n)
            .map(|_| sample_with(random_weights(rng, dim), *ALPHABET.choose(rng).unwrap(), t))
            .collect();
        state = update(&state, &round).unwrap();
    }
    state
}

/// Rank by counting: smaller values plus half the ties, 1-based.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Mann-Whitney p-values by enumerating every labelling of the pooled
/// values as a bitmask and counting pairwise wins directly. Returns
/// `(two_sided, greater, less)`.
pub fn brute_force_mw(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let na = a.len();
    // Twice U, as an integer: 2 per win, 1 per tie.
    let twice_u = |mask: u32| -> i64 {
        let mut s = 0;
        for i in 0..n {
            if mask & (1 << i) == 0 {
                continue;
            }
            for j in 0..n {
                if mask & (1 << j) != 0 {
                    continue;
                }
                s += match pooled[i].partial_cmp(&pooled[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
        s
    };
    let observed = twice_u((1u32 << na) - 1);
    let center = (na * (n - na)) as i64; // twice the mean of U
    let (mut total, mut ge, mut le, mut ext) = (0u64, 0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let u = twice_u(mask);
        total += 1;
        ge += u64::from(u >= observed);
        le += u64::from(u <= observed);
        ext += u64::from((u - center).abs() >= (observed - center).abs());
    }
    let t = total as f64;
    (ext as f64 / t, ge as f64 / t, le as f64 / t)
}

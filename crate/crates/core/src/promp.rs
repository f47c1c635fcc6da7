//! Probabilistic movement primitives.
//!
//! A movement is a weight vector over normalized Gaussian basis functions
//! laid out on the phase interval `[0, 1]`. Weights are stored dof-major:
//! entry `d * num_basis + b` drives basis `b` of degree of freedom `d`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Activation of adjacent basis functions at each other's centers.
pub const ADJACENT_OVERLAP: f64 = 0.55;
/// Ridge strength used when fitting demonstrations.
pub const FIT_RIDGE: f64 = 1e-6;
/// Refinement solves after the first ridge solve in [`fit_weights`].
pub const FIT_REFINEMENTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasisConfig {
    pub num_basis: usize,
    pub num_dof: usize,
    /// Gaussian bandwidth in phase units.
    pub width: f64,
    /// Nominal movement time in seconds.
    pub duration: f64,
    pub num_timesteps: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self::with_overlap(8, 2, 2.0, 100)
    }
}

impl BasisConfig {
    /// Builds a config whose bandwidth makes neighbouring Gaussians reach
    /// [`ADJACENT_OVERLAP`] at each other's centers.
    pub fn with_overlap(num_basis: usize, num_dof: usize, duration: f64, num_timesteps: usize) -> Self {
        let spacing = 1.0 / (num_basis.max(2) - 1) as f64;
        let width = spacing / (2.0 * (1.0 / ADJACENT_OVERLAP).ln()).sqrt();
        Self {
            num_basis,
            num_dof,
            width,
            duration,
            num_timesteps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_basis < 2 {
            return Err(Error::Config("num_basis must be at least 2".into()));
        }
        if self.num_dof < 1 {
            return Err(Error::Config("num_dof must be at least 1".into()));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::Config("width must be positive".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if self.num_timesteps < 2 {
            return Err(Error::Config("num_timesteps must be at least 2".into()));
        }
        Ok(())
    }

    /// Length of a weight vector for this config.
    pub fn weight_len(&self) -> usize {
        self.num_basis * self.num_dof
    }

    pub fn centers(&self) -> Vec<f64> {
        let n = self.num_basis;
        (0..n).map(|b| b as f64 / (n - 1) as f64).collect()
    }

    /// Normalized activations of every basis at `phase`.
    pub fn activations(&self, phase: f64) -> Vec<f64> {
        let mut act: Vec<f64> = self
            .centers()
            .into_iter()
            .map(|c| {
                let d = phase - c;
                (-d * d / (2.0 * self.width * self.width)).exp()
            })
            .collect();
        let sum: f64 = act.iter().sum();
        for a in &mut act {
            *a /= sum;
        }
        act
    }

    /// Nominal timestamps at speed factor 1.
    pub fn nominal_timestamps(&self) -> Vec<f64> {
        let last = (self.num_timesteps - 1) as f64;
        (0..self.num_timesteps)
            .map(|r| self.duration * r as f64 / last)
            .collect()
    }
}

/// ProMP weights for one movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.0.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: self.0.len(),
            });
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("weight vector has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Diagonal Gaussian over weight space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    pub mean: WeightVector,
    pub sigma: Vec<f64>,
    pub base_sigma: f64,
}

impl PolicyDistribution {
    pub fn new(mean: WeightVector, base_sigma: f64) -> Result<Self> {
        if !(base_sigma.is_finite() && base_sigma > 0.0) {
            return Err(Error::Config("base_sigma must be positive".into()));
        }
        let sigma = vec![base_sigma; mean.len()];
        Ok(Self {
            mean,
            sigma,
            base_sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A timed club-head path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub timestamps: Vec<f64>,
    /// One row per timestamp, one column per degree of freedom.
    pub positions: Vec<Vec<f64>>,
    pub speed_factor: f64,
}

impl Trajectory {
    pub fn num_dof(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.timestamps.len() != self.positions.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} timestamps for {} position rows",
                self.timestamps.len(),
                self.positions.len()
            )));
        }
        if self.timestamps.len() < 2 {
            return Err(Error::InvalidTrajectory("needs at least two points".into()));
        }
        if !(self.speed_factor.is_finite() && self.speed_factor > 0.0) {
            return Err(Error::InvalidTrajectory("speed factor must be positive".into()));
        }
        if self.timestamps.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidTrajectory("timestamps not strictly increasing".into()));
        }
        let dof = self.num_dof();
        if dof == 0 || self.positions.iter().any(|r| r.len() != dof) {
            return Err(Error::InvalidTrajectory("ragged position rows".into()));
        }
        if self
            .positions
            .iter()
            .flatten()
            .chain(self.timestamps.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidTrajectory("non-finite values".into()));
        }
        Ok(())
    }

    /// Builds a trajectory from drawn `[t, x, y]` points, resampled by linear
    /// interpolation onto `num_timesteps` evenly spaced instants of the
    /// stroke's own time span. Timestamps are shifted to start at zero.
    pub fn from_points(points: &[[f64; 3]], num_timesteps: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidTrajectory("needs at least two points".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrajectory("non-finite values".into()));
        }
        if points.windows(2).any(|w| w[1][0].partial_cmp(&w[0][0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidTrajectory("point times not strictly increasing".into()));
        }
        if num_timesteps < 2 {
            return Err(Error::InvalidTrajectory("needs at least two timesteps".into()));
        }
        let t0 = points[0][0];
        let span = points[points.len() - 1][0] - t0;
        let mut timestamps = Vec::with_capacity(num_timesteps);
        let mut positions = Vec::with_capacity(num_timesteps);
        let mut seg = 0;
        for r in 0..num_timesteps {
            let t = span * r as f64 / (num_timesteps - 1) as f64;
            while seg + 2 < points.len() && points[seg + 1][0] - t0 < t {
                seg += 1;
            }
            let (a, b) = (points[seg], points[seg + 1]);
            let s = ((t - (a[0] - t0)) / (b[0] - a[0])).clamp(0.0, 1.0);
            timestamps.push(t);
            positions.push(vec![a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]);
        }
        Ok(Self {
            timestamps,
            positions,
            speed_factor: 1.0,
        })
    }
}

/// Basis activations, one row per timestep at phase `r / (num_timesteps - 1)`.
pub fn basis_matrix(config: &BasisConfig) -> DMatrix<f64> {
    let t = config.num_timesteps;
    let phases: Vec<f64> = (0..t).map(|r| r as f64 / (t - 1) as f64).collect();
    basis_at(config, &phases)
}

fn basis_at(config: &BasisConfig, phases: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(phases.len(), config.num_basis);
    for (r, &z) in phases.iter().enumerate() {
        for (b, a) in config.activations(z).into_iter().enumerate() {
            m[(r, b)] = a;
        }
    }
    m
}

pub fn generate_trajectory(
    weights: &WeightVector,
    config: &BasisConfig,
    speed_factor: f64,
) -> Result<Trajectory> {
    weights.check_len(config.weight_len())?;
    if !(speed_factor.is_finite() && speed_factor > 0.0) {
        return Err(Error::Validation("speed factor must be positive".into()));
    }
    let basis = basis_matrix(config);
    let nb = config.num_basis;
    let positions = (0..config.num_timesteps)
        .map(|r| {
            (0..config.num_dof)
                .map(|d| {
                    (0..nb)
                        .map(|b| basis[(r, b)] * weights.0[d * nb + b])
                        .sum()
                })
                .collect()
        })
        .collect();
    let timestamps = config
        .nominal_timestamps()
        .into_iter()
        .map(|t| t / speed_factor)
        .collect();
    Ok(Trajectory {
        timestamps,
        positions,
        speed_factor,
    })
}

/// Draws one weight vector from `dist`; the draw is a pure function of `seed`.
pub fn sample_weights(dist: &PolicyDistribution, seed: u64) -> WeightVector {
    let mut rng = rng::chacha(seed);
    WeightVector(
        dist.mean
            .0
            .iter()
            .zip(&dist.sigma)
            .map(|(&m, &s)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + s * z
            })
            .collect(),
    )
}

/// Ridge least-squares fit of weights to a trajectory. The trajectory's
/// timestamps are mapped linearly onto phase `[0, 1]`, so the fit is
/// independent of its speed factor.
pub fn fit_weights(trajectory: &Trajectory, config: &BasisConfig) -> Result<WeightVector> {
    trajectory.validate()?;
    if trajectory.num_dof() != config.num_dof {
        return Err(Error::Dimension {
            expected: config.num_dof,
            actual: trajectory.num_dof(),
        });
    }
    let n = trajectory.timestamps.len();
    if n < config.num_basis {
        return Err(Error::Underdetermined {
            timesteps: n,
            basis: config.num_basis,
        });
    }
    let t0 = trajectory.timestamps[0];
    let span = trajectory.timestamps[n - 1] - t0;
    let phases: Vec<f64> = trajectory
        .timestamps
        .iter()
        .map(|t| (t - t0) / span)
        .collect();
    let phi = basis_at(config, &phases);
    let normal = phi.transpose() * &phi;
    let gram = &normal + DMatrix::identity(config.num_basis, config.num_basis) * FIT_RIDGE;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Validation("normal equations not positive definite".into()))?;
    let mut out = Vec::with_capacity(config.weight_len());
    for d in 0..config.num_dof {
        let y = DVector::from_iterator(n, trajectory.positions.iter().map(|row| row[d]));
        let rhs = phi.transpose() * y;
        let mut w = chol.solve(&rhs);
        // Iterated Tikhonov: each pass shrinks the ridge bias on a direction
        // with Gram eigenvalue e by lambda / (e + lambda); null directions stay 0.
        for _ in 0..FIT_REFINEMENTS {
            let residual = &rhs - &normal * &w;
            w += chol.solve(&residual);
        }
        out.extend(w.iter().copied());
    }
    Ok(WeightVector(out))
}

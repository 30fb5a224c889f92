//! Tactile frames, the sensor noise channel, and evaluation metrics.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng;

/// Upper end of a taxel's measurable range in newtons.
pub const FORCE_MAX: f64 = 0.02;

/// A square grid of taxel forces in newtons, row-major.
///
/// Simulated and sensor frames stay within `[0, FORCE_MAX]`. Reconstructed
/// frames are only guaranteed non-negative, so the range is not enforced by
/// the constructor; see [`TactileFrame::in_range`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TactileFrame {
    side: usize,
    forces: Vec<f64>,
    pub timestamp_ms: u64,
}

impl TactileFrame {
    pub fn new(side: usize, forces: Vec<f64>, timestamp_ms: u64) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidParameter("frame side must be >= 1".into()));
        }
        check_len(side * side, forces.len())?;
        if forces.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            side,
            forces,
            timestamp_ms,
        })
    }

    pub fn zeros(side: usize, timestamp_ms: u64) -> Self {
        assert!(side > 0, "frame side must be >= 1");
        Self {
            side,
            forces: vec![0.0; side * side],
            timestamp_ms,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.forces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forces.is_empty()
    }

    pub fn forces(&self) -> &[f64] {
        &self.forces
    }

    pub fn into_forces(self) -> Vec<f64> {
        self.forces
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.forces[row * self.side + col]
    }

    pub fn in_range(&self, force_max: f64) -> bool {
        self.forces.iter().all(|&f| (0.0..=force_max).contains(&f))
    }

    pub fn max_force(&self) -> f64 {
        self.forces.iter().copied().fold(0.0, f64::max)
    }
}

/// Additive Gaussian noise followed by clipping to the taxel range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoiseModel {
    pub sigma: f64,
    pub force_min: f64,
    pub force_max: f64,
    pub seed: u64,
}

impl Default for SensorNoiseModel {
    fn default() -> Self {
        Self {
            sigma: 0.001,
            force_min: 0.0,
            force_max: FORCE_MAX,
            seed: 0,
        }
    }
}

impl SensorNoiseModel {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.force_min < self.force_max) {
            return Err(Error::InvalidParameter(format!(
                "force_min {} must be below force_max {}",
                self.force_min, self.force_max
            )));
        }
        Ok(())
    }

    fn clip(&self, v: f64) -> f64 {
        v.clamp(self.force_min, self.force_max)
    }
}

/// Produce the sensor frame `clip(x + g)`.
///
/// Draws are keyed by `(model.seed, frame.timestamp_ms)`, so each time step
/// gets fresh noise and a frame's noise does not depend on which other
/// frames were processed before it.
pub fn add_sensor_noise(frame: &TactileFrame, model: &SensorNoiseModel) -> TactileFrame {
    debug_assert!(model.validate().is_ok());
    let mut rng = rng::rng_for(model.seed, &[frame.timestamp_ms]);
    let forces = frame
        .forces
        .iter()
        .map(|&f| {
            let g: f64 = StandardNormal.sample(&mut rng);
            model.clip(f + model.sigma * g)
        })
        .collect();
    TactileFrame {
        side: frame.side,
        forces,
        timestamp_ms: frame.timestamp_ms,
    }
}

pub fn mse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(truth.len(), estimate.len())?;
    if truth.is_empty() {
        return Err(Error::InvalidParameter("empty signal".into()));
    }
    let sum: f64 = truth.iter().zip(estimate).map(|(t, e)| (t - e) * (t - e)).sum();
    Ok(sum / truth.len() as f64)
}

/// Peak signal-to-noise ratio in dB with peak value `mu`.
///
/// A perfect reconstruction (zero MSE) returns `f64::INFINITY`.
pub fn psnr(estimate: &TactileFrame, truth: &TactileFrame, mu: f64) -> Result<f64> {
    if estimate.side != truth.side {
        return Err(Error::DimensionMismatch {
            expected: truth.side,
            actual: estimate.side,
        });
    }
    psnr_slices(&estimate.forces, &truth.forces, mu)
}

pub fn psnr_slices(estimate: &[f64], truth: &[f64], mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("psnr peak must be > 0, got {mu}")));
    }
    let mse = mse(estimate, truth)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (mu * mu / mse).log10())
}

/// Number of coefficients whose magnitude exceeds `tau`.
pub fn approx_sparsity(coeffs: &[f64], tau: f64) -> usize {
    coeffs.iter().filter(|c| c.abs() > tau).count()
}

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arm::ArmModel;
use crate::learning::gaussian;
use crate::{Error, Result};

/// Batch-level features the grid operator sees for one arm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContextVector {
    pub avg_power: f64,
    pub avg_core_hours: f64,
    pub frac_interactive: f64,
    /// `s / (N_s - 1)`.
    pub position: f64,
}

impl ContextVector {
    pub const DIM: usize = 4;

    pub fn to_array(&self) -> [f64; Self::DIM] {
        [self.avg_power, self.avg_core_hours, self.frac_interactive, self.position]
    }

    pub fn from_array(a: [f64; Self::DIM]) -> Self {
        Self { avg_power: a[0], avg_core_hours: a[1], frac_interactive: a[2], position: a[3] }
    }
}

/// Observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Probability that the decoded state is replaced by a uniformly drawn wrong one.
    pub p_state_flip: f64,
    /// Standard deviation of Gaussian noise on each context component.
    pub sigma_ctx: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_state_flip) {
            return Err(Error::config("p_state_flip must lie in [0, 1]"));
        }
        if !(self.sigma_ctx >= 0.0 && self.sigma_ctx.is_finite()) {
            return Err(Error::config("sigma_ctx must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Noise-free context of every state of one arm, normalized over the arm's
/// states once at build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextModel {
    pub exact: Vec<ContextVector>,
}

impl ContextModel {
    pub fn new(arm: &ArmModel) -> Self {
        let n = arm.n_states();
        let raw: Vec<[f64; 3]> = (0..n)
            .map(|s| {
                let batch = &arm.jobs[arm.batch(s)];
                let k = batch.len() as f64;
                [
                    batch.iter().map(|j| j.power).sum::<f64>() / k,
                    batch.iter().map(|j| j.core_hours).sum::<f64>() / k,
                    batch.iter().filter(|j| j.interactive).count() as f64 / k,
                ]
            })
            .collect();
        let mut cols = [[0.0; 2]; 2];
        for (c, range) in cols.iter_mut().enumerate() {
            let lo = raw.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
            let hi = raw.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
            *range = [lo, hi];
        }
        let norm = |v: f64, [lo, hi]: [f64; 2]| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        let exact = raw
            .iter()
            .enumerate()
            .map(|(s, r)| ContextVector {
                avg_power: norm(r[0], cols[0]),
                avg_core_hours: norm(r[1], cols[1]),
                // already a fraction, so it keeps its natural scale
                frac_interactive: r[2],
                position: s as f64 / (n - 1) as f64,
            })
            .collect();
        Self { exact }
    }

    pub fn n_states(&self) -> usize {
        self.exact.len()
    }

    /// Exact features plus Gaussian noise, clamped to `[0, 1]`.
    pub fn observe<R: Rng + ?Sized>(&self, state: usize, noise: &NoiseConfig, rng: &mut R) -> ContextVector {
        let mut a = self.exact[state].to_array();
        if noise.sigma_ctx > 0.0 {
            for x in a.iter_mut() {
                *x = (*x + gaussian(noise.sigma_ctx, rng)).clamp(0.0, 1.0);
            }
        }
        ContextVector::from_array(a)
    }
}

/// Context of `arm` at `state`; builds the normalization table on the fly.
pub fn make_context<R: Rng + ?Sized>(arm: &ArmModel, state: usize, noise: &NoiseConfig, rng: &mut R) -> ContextVector {
    ContextModel::new(arm).observe(state, noise, rng)
}

/// Invert the position feature, then flip to a uniformly drawn wrong state
/// with probability `p_state_flip`.
pub fn decode_state<R: Rng + ?Sized>(ctx: &ContextVector, n_states: usize, noise: &NoiseConfig, rng: &mut R) -> usize {
    flip_state(position_state(ctx, n_states), n_states, noise, rng)
}

/// State whose position feature is nearest to `ctx.position`.
pub fn position_state(ctx: &ContextVector, n_states: usize) -> usize {
    let top = (n_states - 1) as f64;
    libm::round(ctx.position.clamp(0.0, 1.0) * top) as usize
}

/// With probability `p_state_flip`, a uniformly drawn state other than `s`.
pub fn flip_state<R: Rng + ?Sized>(s: usize, n_states: usize, noise: &NoiseConfig, rng: &mut R) -> usize {
    if n_states > 1 && noise.p_state_flip > 0.0 && rng.random::<f64>() < noise.p_state_flip {
        let other = rng.random_range(0..n_states - 1);
        if other >= s {
            other + 1
        } else {
            other
        }
    } else {
        s
    }
}

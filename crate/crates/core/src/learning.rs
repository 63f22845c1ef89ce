//! Conjugate posteriors over unknown arm models.
//!
//! - transitions: one Dirichlet per `(state, action)` row, updated by counts;
//! - active rewards: one Gaussian per state with known observation noise;
//! - linear context model (State-Thompson): Bayesian linear regression with a
//!   Gaussian prior on the weights.
//!
//! Rewards and transitions are updated independently; passive rewards are
//! known to be zero and are never learned.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arm::ArmDynamics;
use crate::kernel::Kernel;
use crate::linalg::{cholesky_psd, dot};
use crate::{Error, Result};

/// Prior and noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    /// Dirichlet concentration of every transition entry.
    pub dirichlet_alpha: f64,
    pub reward_mean: f64,
    pub reward_var: f64,
    /// Known variance of a reward observation.
    pub reward_noise_var: f64,
    /// Prior variance of each context weight.
    pub context_weight_var: f64,
    pub context_noise_var: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            dirichlet_alpha: 1.0,
            reward_mean: 0.0,
            reward_var: 1.0,
            reward_noise_var: 0.25,
            context_weight_var: 1.0,
            context_noise_var: 0.25,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.dirichlet_alpha,
            self.reward_var,
            self.reward_noise_var,
            self.context_weight_var,
            self.context_noise_var,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !self.reward_mean.is_finite() {
            return Err(Error::config("prior concentrations and variances must be positive and finite"));
        }
        Ok(())
    }
}

/// Dirichlet concentrations for both actions of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPosterior {
    n_states: usize,
    /// `alpha[action][state * n + next]`, action 0 = passive.
    alpha: [Vec<f64>; 2],
}

impl TransitionPosterior {
    pub fn new(n_states: usize, prior_alpha: f64) -> Self {
        let row = vec![prior_alpha; n_states * n_states];
        Self { n_states, alpha: [row.clone(), row] }
    }

    /// Build from explicit concentrations (rows of `n_states` entries, all > 0).
    pub fn from_alpha(n_states: usize, passive: Vec<f64>, active: Vec<f64>) -> Result<Self> {
        for a in [&passive, &active] {
            if a.len() != n_states * n_states {
                return Err(Error::shape(format!("expected {} concentrations", n_states * n_states)));
            }
            if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::shape("Dirichlet concentrations must be positive"));
            }
        }
        Ok(Self { n_states, alpha: [passive, active] })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn alpha(&self, state: usize, active: bool) -> &[f64] {
        let n = self.n_states;
        &self.alpha[active as usize][state * n..(state + 1) * n]
    }

    pub fn observe(&mut self, state: usize, active: bool, next_state: usize) {
        let n = self.n_states;
        self.alpha[active as usize][state * n + next_state] += 1.0;
    }

    pub fn mean_row(&self, state: usize, active: bool) -> Vec<f64> {
        let a = self.alpha(state, active);
        let total: f64 = a.iter().sum();
        a.iter().map(|x| x / total).collect()
    }

    pub fn sample_kernel<R: Rng + ?Sized>(&self, active: bool, rng: &mut R) -> Kernel {
        let n = self.n_states;
        let mut data = Vec::with_capacity(n * n);
        for s in 0..n {
            data.extend(sample_dirichlet(self.alpha(s, active), rng));
        }
        Kernel::from_flat(n, data).expect("Dirichlet draws are row-stochastic")
    }
}

fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive concentration").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter_mut().for_each(|x| *x /= total);
    } else {
        // every gamma draw underflowed: fall back to the heaviest entry
        let k = (0..alpha.len()).max_by(|&a, &b| alpha[a].total_cmp(&alpha[b])).unwrap_or(0);
        draws.iter_mut().enumerate().for_each(|(i, x)| *x = (i == k) as u8 as f64);
    }
    draws
}

/// Gaussian belief about one state's active reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBelief {
    pub mean: f64,
    pub variance: f64,
    pub count: u64,
}

impl RewardBelief {
    pub fn std_dev(&self) -> f64 {
        libm::sqrt(self.variance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardPosterior {
    pub noise_var: f64,
    pub states: Vec<RewardBelief>,
}

impl RewardPosterior {
    pub fn new(n_states: usize, prior: &PriorConfig) -> Self {
        let belief = RewardBelief { mean: prior.reward_mean, variance: prior.reward_var, count: 0 };
        Self { noise_var: prior.reward_noise_var, states: vec![belief; n_states] }
    }

    pub fn observe(&mut self, state: usize, reward: f64) {
        let b = &mut self.states[state];
        let precision = 1.0 / b.variance + 1.0 / self.noise_var;
        b.mean = (b.mean / b.variance + reward / self.noise_var) / precision;
        b.variance = 1.0 / precision;
        b.count += 1;
    }

    pub fn belief(&self, state: usize) -> &RewardBelief {
        &self.states[state]
    }

    /// Gaussian draws clipped at zero, since active rewards are nonnegative.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.states
            .iter()
            .map(|b| {
                let z: f64 = StandardNormal.sample(rng);
                (b.mean + b.std_dev() * z).max(0.0)
            })
            .collect()
    }
}

/// Transition and reward beliefs of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmPosterior {
    pub transitions: TransitionPosterior,
    pub rewards: RewardPosterior,
}

impl ArmPosterior {
    pub fn new(n_states: usize, prior: &PriorConfig) -> Self {
        Self {
            transitions: TransitionPosterior::new(n_states, prior.dirichlet_alpha),
            rewards: RewardPosterior::new(n_states, prior),
        }
    }

    pub fn n_states(&self) -> usize {
        self.transitions.n_states()
    }

    /// Draw `(r~, P~1, P~0)`.
    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> ArmDynamics {
        let rewards = self.rewards.sample(rng);
        let p_active = self.transitions.sample_kernel(true, rng);
        let p_passive = self.transitions.sample_kernel(false, rng);
        ArmDynamics::new(rewards, p_active, p_passive).expect("sampled model is well formed")
    }

    /// Record one round: the reward only when the arm was active.
    pub fn observe(&mut self, state: usize, active: bool, reward: f64, next_state: usize) {
        self.transitions.observe(state, active, next_state);
        if active {
            self.rewards.observe(state, reward);
        }
    }
}

/// Beliefs over every arm of the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub arms: Vec<ArmPosterior>,
}

impl PosteriorState {
    pub fn new(state_counts: &[usize], prior: &PriorConfig) -> Self {
        Self { arms: state_counts.iter().map(|&n| ArmPosterior::new(n, prior)).collect() }
    }

    pub fn update_transition(&mut self, arm: usize, state: usize, active: bool, next_state: usize) {
        self.arms[arm].transitions.observe(state, active, next_state);
    }

    pub fn update_reward(&mut self, arm: usize, state: usize, reward: f64) {
        self.arms[arm].rewards.observe(state, reward);
    }

    pub fn sample_arm_model<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> ArmDynamics {
        self.arms[arm].sample_model(rng)
    }
}

/// Bayesian linear regression `r = x . theta + eps` for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPosterior {
    pub mean: Vec<f64>,
    /// Row-major `dim x dim` covariance of the weights.
    pub covariance: Vec<f64>,
    pub noise_var: f64,
}

impl ContextPosterior {
    pub fn new(dim: usize, prior: &PriorConfig) -> Self {
        let mut covariance = vec![0.0; dim * dim];
        for i in 0..dim {
            covariance[i * dim + i] = prior.context_weight_var;
        }
        Self { mean: vec![0.0; dim], covariance, noise_var: prior.context_noise_var }
    }

    /// A posterior that has collapsed onto `weights`.
    pub fn point_mass(weights: Vec<f64>, noise_var: f64) -> Self {
        let dim = weights.len();
        Self { mean: weights, covariance: vec![0.0; dim * dim], noise_var }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!("context has {} features, posterior expects {}", x.len(), self.dim())));
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.covariance[i * d + i]).sum()
    }

    /// Rank-one conjugate update.
    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.check_dim(x)?;
        let d = self.dim();
        let sx: Vec<f64> = (0..d).map(|i| dot(&self.covariance[i * d..(i + 1) * d], x)).collect();
        let denom = self.noise_var + dot(x, &sx);
        let resid = reward - dot(x, &self.mean);
        for i in 0..d {
            self.mean[i] += sx[i] * resid / denom;
            for j in 0..d {
                self.covariance[i * d + j] -= sx[i] * sx[j] / denom;
            }
        }
        // keep exact symmetry
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (self.covariance[i * d + j] + self.covariance[j * d + i]);
                self.covariance[i * d + j] = avg;
                self.covariance[j * d + i] = avg;
            }
        }
        Ok(())
    }

    pub fn sample_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let l = cholesky_psd(&self.covariance, d);
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        (0..d).map(|i| self.mean[i] + dot(&l[i * d..i * d + i + 1], &z[..=i])).collect()
    }

    /// Thompson score `x . theta~`.
    pub fn sample_score<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        self.check_dim(x)?;
        Ok(dot(x, &self.sample_weights(rng)))
    }
}

/// Zero-mean Gaussian noise helper used by observation models.
pub fn gaussian<R: Rng + ?Sized>(sd: f64, rng: &mut R) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("finite sd").sample(rng)
}

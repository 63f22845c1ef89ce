//! Exponential weights over three expert policies.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{local_ucb, top_k, Feedback, GlobalStats, MixParams, Observation, Policy, PolicyDecision, PolicyKind, TwCore};
use crate::{Error, Result};

/// Log-weights more than this far below the leader are clamped so that every
/// normalized weight stays strictly positive.
const LOG_WEIGHT_FLOOR: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exp4Params {
    /// Learning rate.
    pub eta: f64,
    /// Uniform exploration mixed into the arm distribution.
    pub gamma: f64,
}

impl Default for Exp4Params {
    fn default() -> Self {
        Self { eta: 0.1, gamma: 0.05 }
    }
}

impl Exp4Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("exp4 eta must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("exp4 gamma must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expert {
    GlobalUcb,
    LocalUcb,
    Tw,
}

impl Expert {
    pub const ALL: [Expert; 3] = [Expert::GlobalUcb, Expert::LocalUcb, Expert::Tw];
}

/// Expert weights kept in the log domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp4State {
    log_weights: Vec<f64>,
    params: Exp4Params,
}

impl Exp4State {
    pub fn new(n_experts: usize, params: Exp4Params) -> Self {
        Self { log_weights: vec![0.0; n_experts], params }
    }

    /// Start from explicit positive weights (normalized on read).
    pub fn with_weights(weights: &[f64], params: Exp4Params) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::config("expert weights must be positive and finite"));
        }
        Ok(Self { log_weights: weights.iter().map(|w| libm::log(*w)).collect(), params })
    }

    pub fn params(&self) -> &Exp4Params {
        &self.params
    }

    /// Normalized expert weights.
    pub fn weights(&self) -> Vec<f64> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self.log_weights.iter().map(|l| libm::exp(l - max)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Mixture distribution over `n_arms`; each recommendation is spread
    /// uniformly over its chosen set.
    pub fn mixture(&self, recommendations: &[Vec<usize>], n_arms: usize) -> Vec<f64> {
        let gamma = self.params.gamma;
        let mut p = vec![gamma / n_arms as f64; n_arms];
        for (w, rec) in self.weights().iter().zip(recommendations) {
            if rec.is_empty() {
                // An empty recommendation puts its mass on the uniform part.
                for pi in p.iter_mut() {
                    *pi += (1.0 - gamma) * w / n_arms as f64;
                }
                continue;
            }
            let share = (1.0 - gamma) * w / rec.len() as f64;
            for &arm in rec {
                p[arm] += share;
            }
        }
        p
    }

    /// Top-`budget` arms by mixture probability, ties to the lower index.
    pub fn select(&self, recommendations: &[Vec<usize>], n_arms: usize, budget: usize) -> PolicyDecision {
        PolicyDecision::from_scores(self.mixture(recommendations, n_arms), budget)
    }

    /// Multiply each expert's weight by `exp(eta * y_e)`, where `y_e` is the
    /// importance-weighted reward its recommendation would have earned.
    /// A selected arm's propensity is `min(1, budget * p_i)`.
    pub fn update(&mut self, recommendations: &[Vec<usize>], probs: &[f64], selected: &[usize], rewards: &[f64]) {
        let budget = selected.len() as f64;
        let mut estimate = vec![0.0; probs.len()];
        for &arm in selected {
            let propensity = (budget * probs[arm]).min(1.0);
            if propensity > 0.0 {
                estimate[arm] = rewards[arm] / propensity;
            }
        }
        for (lw, rec) in self.log_weights.iter_mut().zip(recommendations) {
            if rec.is_empty() {
                continue;
            }
            let gain: f64 = rec.iter().map(|&a| estimate[a]).sum::<f64>() / rec.len() as f64;
            *lw += self.params.eta * gain;
        }
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for lw in self.log_weights.iter_mut() {
            *lw = (*lw - max).max(-LOG_WEIGHT_FLOOR);
        }
    }
}

/// EXP4 with Global UCB, Local UCB and TW as experts.
#[derive(Debug, Clone)]
pub struct Exp4Policy {
    core: TwCore,
    stats: GlobalStats,
    mix: MixParams,
    state: Exp4State,
    pending: Option<(Vec<Vec<usize>>, Vec<f64>)>,
}

impl Exp4Policy {
    pub fn new(core: TwCore, mix: MixParams, params: Exp4Params) -> Self {
        let n = core.posteriors().arms.len();
        Self { core, stats: GlobalStats::new(n), mix, state: Exp4State::new(Expert::ALL.len(), params), pending: None }
    }

    pub fn state(&self) -> &Exp4State {
        &self.state
    }

    /// Each expert's top-`budget` arm set, in `Expert::ALL` order.
    pub fn recommendations(&mut self, obs: &Observation<'_>, budget: usize) -> Vec<Vec<usize>> {
        let t = obs.round as f64;
        let n = obs.states.len();
        let global: Vec<f64> = (0..n).map(|i| self.stats.global_ucb(i, t, &self.mix)).collect();
        let local: Vec<f64> = (0..n)
            .map(|i| local_ucb(&self.core.posteriors().arms[i].rewards.belief(obs.states[i]), &self.mix))
            .collect();
        self.core.refresh(obs.round);
        let tw = self.core.indices(obs.states);
        vec![top_k(&global, budget), top_k(&local, budget), top_k(&tw, budget)]
    }
}

impl Policy for Exp4Policy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Exp4
    }

    fn select(&mut self, obs: &Observation<'_>, budget: usize) -> PolicyDecision {
        let recs = self.recommendations(obs, budget);
        let decision = self.state.select(&recs, obs.states.len(), budget);
        self.pending = Some((recs, decision.scores.clone()));
        decision
    }

    fn update(&mut self, fb: &Feedback<'_>) {
        if let Some((recs, probs)) = self.pending.take() {
            let selected: Vec<usize> = (0..fb.active.len()).filter(|&i| fb.active[i]).collect();
            self.state.update(&recs, &probs, &selected, fb.rewards);
        }
        self.stats.record(fb);
        self.core.update(fb);
    }
}

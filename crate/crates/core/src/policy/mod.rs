//! Arm-selection policies.
//!
//! Every policy sees, each round, the decoded state and context vector of
//! every arm, picks at most `budget` arms, and then receives the realized
//! rewards and the next decoded states.

mod exp4;
mod oracle;
mod st;
mod tw;

pub use exp4::{Exp4Params, Exp4Policy, Exp4State, Expert};
pub use oracle::OracleWhittle;
pub use st::StateThompson;
pub use tw::{GreedyMode, ThompsonWhittle, TrustMixed, TwCore};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::learning::RewardBelief;
use crate::sim::ContextVector;
use crate::{Error, Result};

/// What a policy can see before choosing.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    /// 1-based round number.
    pub round: u64,
    pub states: &'a [usize],
    pub contexts: &'a [ContextVector],
}

/// What a policy learns after the chosen arms were activated.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    pub round: u64,
    pub states: &'a [usize],
    pub contexts: &'a [ContextVector],
    pub active: &'a [bool],
    /// Realized reward per arm (zero for passive arms).
    pub rewards: &'a [f64],
    pub next_states: &'a [usize],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyDecision {
    /// Chosen arms in rank order.
    pub selected: Vec<usize>,
    /// Per-arm score used for the ranking.
    pub scores: Vec<f64>,
}

impl PolicyDecision {
    pub fn from_scores(scores: Vec<f64>, budget: usize) -> Self {
        let selected = top_k(&scores, budget);
        Self { selected, scores }
    }
}

pub trait Policy {
    fn kind(&self) -> PolicyKind;
    fn select(&mut self, obs: &Observation<'_>, budget: usize) -> PolicyDecision;
    fn update(&mut self, feedback: &Feedback<'_>);
}

/// Indices of the `k` largest scores; ties go to the lower arm index and NaN
/// ranks last.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    top_k_by(scores.len(), k, |a, b| cmp_desc(scores[a], scores[b]))
}

pub(crate) fn top_k_by<F>(n: usize, k: usize, mut cmp: F) -> Vec<usize>
where
    F: FnMut(usize, usize) -> core::cmp::Ordering,
{
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(a, b).then(a.cmp(&b)));
    order.truncate(k.min(n));
    order
}

pub(crate) fn cmp_desc(a: f64, b: f64) -> core::cmp::Ordering {
    let key = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
    key(b).total_cmp(&key(a))
}

/// Min-max normalize into `[0, 1]`; all-equal inputs map to 0.5.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return alloc::vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / range).collect()
}

/// Trust-mixing schedule and UCB constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixParams {
    /// Rounds until the greedy weight reaches zero.
    pub t_mix: f64,
    /// Rounds until the global UCB weight reaches zero.
    pub t_g: f64,
    pub c_g: f64,
    pub c_l: f64,
    pub n_0: f64,
    /// Whittle indices are recomputed every `n_up` rounds.
    pub n_up: u64,
}

impl Default for MixParams {
    fn default() -> Self {
        Self { t_mix: 200.0, t_g: 100.0, c_g: 1.0, c_l: 1.0, n_0: 1.0, n_up: 10 }
    }
}

impl MixParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_mix > 0.0 && self.t_g > 0.0) {
            return Err(Error::config("t_mix and t_g must be positive"));
        }
        if !(self.c_g >= 0.0 && self.c_l >= 0.0) {
            return Err(Error::config("c_g and c_l must be nonnegative"));
        }
        if !(self.n_0 > 0.0) || self.n_up == 0 {
            return Err(Error::config("n_0 must be positive and n_up at least 1"));
        }
        Ok(())
    }

    /// `tau_t = max(0, 1 - t / T_mix)`.
    pub fn trust(&self, t: f64) -> f64 {
        (1.0 - t / self.t_mix).max(0.0)
    }

    /// `w_t = max(0, 1 - t / T_g)`.
    pub fn global_weight(&self, t: f64) -> f64 {
        (1.0 - t / self.t_g).max(0.0)
    }

    /// Algorithm rounds `1, 1 + n_up, 1 + 2 n_up, ...` refresh the indices.
    pub fn is_refresh_round(&self, round: u64) -> bool {
        self.n_up == 1 || round % self.n_up == 1
    }
}

/// Empirical activation statistics of every arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub reward_sum: Vec<f64>,
    pub pulls: Vec<u64>,
}

impl GlobalStats {
    pub fn new(n_arms: usize) -> Self {
        Self { reward_sum: alloc::vec![0.0; n_arms], pulls: alloc::vec![0; n_arms] }
    }

    pub fn mean(&self, arm: usize) -> f64 {
        if self.pulls[arm] == 0 {
            0.0
        } else {
            self.reward_sum[arm] / self.pulls[arm] as f64
        }
    }

    pub fn record(&mut self, feedback: &Feedback<'_>) {
        for (i, &on) in feedback.active.iter().enumerate() {
            if on {
                self.reward_sum[i] += feedback.rewards[i];
                self.pulls[i] += 1;
            }
        }
    }

    pub fn global_ucb(&self, arm: usize, t: f64, params: &MixParams) -> f64 {
        self.mean(arm) + params.c_g * libm::sqrt(libm::log(t + 2.0) / (self.pulls[arm] as f64 + params.n_0))
    }
}

pub fn local_ucb(belief: &RewardBelief, params: &MixParams) -> f64 {
    belief.mean + params.c_l * belief.std_dev()
}

/// Greedy score blending a global UCB (arm history) and a local UCB (state
/// reward posterior) with weight `w_t` on the global part.
pub fn greedy_score(global_mean: f64, pulls: u64, local: &RewardBelief, t: f64, params: &MixParams) -> f64 {
    greedy_score_weighted(global_mean, pulls, local, t, params, params.global_weight(t))
}

pub fn greedy_score_weighted(
    global_mean: f64,
    pulls: u64,
    local: &RewardBelief,
    t: f64,
    params: &MixParams,
    w: f64,
) -> f64 {
    let global = global_mean + params.c_g * libm::sqrt(libm::log(t + 2.0) / (pulls as f64 + params.n_0));
    w * global + (1.0 - w) * local_ucb(local, params)
}

/// Named policies available to experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Oracle,
    St,
    Tw,
    Tmtw,
    Exp4,
    GlobalUcbTw,
    LocalUcbTw,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Oracle,
        PolicyKind::St,
        PolicyKind::Tw,
        PolicyKind::Tmtw,
        PolicyKind::Exp4,
        PolicyKind::GlobalUcbTw,
        PolicyKind::LocalUcbTw,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Oracle => "oracle",
            PolicyKind::St => "st",
            PolicyKind::Tw => "tw",
            PolicyKind::Tmtw => "tmtw",
            PolicyKind::Exp4 => "exp4",
            PolicyKind::GlobalUcbTw => "global_ucb_tw",
            PolicyKind::LocalUcbTw => "local_ucb_tw",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Oracle => "Oracle Whittle",
            PolicyKind::St => "ST",
            PolicyKind::Tw => "TW",
            PolicyKind::Tmtw => "Local + Global + TW",
            PolicyKind::Exp4 => "EXP4",
            PolicyKind::GlobalUcbTw => "Global UCB + TW",
            PolicyKind::LocalUcbTw => "Local UCB + TW",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(alloc::format!("unknown policy '{s}' (expected one of {})", policy_name_list())))
    }
}

/// Every tunable of every policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySettings {
    pub index: crate::whittle::IndexConfig,
    pub prior: crate::learning::PriorConfig,
    pub mix: MixParams,
    pub exp4: Exp4Params,
}

impl PolicySettings {
    pub fn validate(&self) -> Result<()> {
        self.index.validate()?;
        self.prior.validate()?;
        self.mix.validate()?;
        self.exp4.validate()
    }
}

fn policy_name_list() -> String {
    let names: Vec<&str> = PolicyKind::ALL.iter().map(PolicyKind::as_str).collect();
    names.join(", ")
}

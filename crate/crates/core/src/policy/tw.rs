//! Thompson-Whittle and its trust-mixed extension.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    cmp_desc, greedy_score_weighted, min_max_normalize, top_k_by, Feedback, GlobalStats, MixParams, Observation,
    Policy, PolicyDecision, PolicyKind,
};
use crate::learning::{PosteriorState, PriorConfig};
use crate::rng::StreamRng;
use crate::whittle::{compute_indices, IndexConfig, WhittleTable};

/// Posterior over every arm plus the cached Whittle indices of the last
/// posterior sample.
#[derive(Debug, Clone)]
pub struct TwCore {
    posteriors: PosteriorState,
    cache: Vec<Option<WhittleTable>>,
    index: IndexConfig,
    n_up: u64,
    rng: StreamRng,
    refreshes: u64,
    fallbacks: u64,
}

impl TwCore {
    pub fn new(state_counts: &[usize], prior: &PriorConfig, index: IndexConfig, n_up: u64, rng: StreamRng) -> Self {
        Self::from_posteriors(PosteriorState::new(state_counts, prior), index, n_up, rng)
    }

    pub fn from_posteriors(posteriors: PosteriorState, index: IndexConfig, n_up: u64, rng: StreamRng) -> Self {
        let n = posteriors.arms.len();
        Self { posteriors, cache: vec![None; n], index, n_up: n_up.max(1), rng, refreshes: 0, fallbacks: 0 }
    }

    pub fn posteriors(&self) -> &PosteriorState {
        &self.posteriors
    }

    /// Number of rounds on which indices were recomputed.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    /// Number of sampled arm models that failed the indexability check.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    /// Resample and re-solve every arm on refresh rounds (or when no indices exist yet).
    pub fn refresh(&mut self, round: u64) {
        let due = self.n_up == 1 || round % self.n_up == 1 || self.cache.iter().any(Option::is_none);
        if !due {
            return;
        }
        self.refreshes += 1;
        for arm in 0..self.cache.len() {
            let model = self.posteriors.sample_arm_model(arm, &mut self.rng);
            let table = compute_indices(&model, &self.index, true).expect("sampled models are well formed");
            if !table.indexable {
                self.fallbacks += 1;
            }
            self.cache[arm] = Some(table);
        }
    }

    /// Sampled Whittle index of every arm at its observed state.
    pub fn indices(&self, states: &[usize]) -> Vec<f64> {
        self.cache
            .iter()
            .zip(states)
            .map(|(t, &s)| t.as_ref().map_or(f64::NAN, |t| t.index(s)))
            .collect()
    }

    pub fn update(&mut self, fb: &Feedback<'_>) {
        for (arm, post) in self.posteriors.arms.iter_mut().enumerate() {
            post.observe(fb.states[arm], fb.active[arm], fb.rewards[arm], fb.next_states[arm]);
        }
    }
}

/// Activate the arms with the largest sampled Whittle indices.
#[derive(Debug, Clone)]
pub struct ThompsonWhittle {
    core: TwCore,
}

impl ThompsonWhittle {
    pub fn new(core: TwCore) -> Self {
        Self { core }
    }

    pub fn core(&self) -> &TwCore {
        &self.core
    }
}

impl Policy for ThompsonWhittle {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Tw
    }

    fn select(&mut self, obs: &Observation<'_>, budget: usize) -> PolicyDecision {
        self.core.refresh(obs.round);
        PolicyDecision::from_scores(self.core.indices(obs.states), budget)
    }

    fn update(&mut self, fb: &Feedback<'_>) {
        self.core.update(fb);
    }
}

/// Which UCB terms feed the greedy score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyMode {
    /// Global weight follows the `w_t` schedule.
    Mixed,
    GlobalOnly,
    LocalOnly,
}

/// Thompson-Whittle blended with a greedy UCB score whose trust decays to zero.
#[derive(Debug, Clone)]
pub struct TrustMixed {
    core: TwCore,
    stats: GlobalStats,
    params: MixParams,
    mode: GreedyMode,
}

impl TrustMixed {
    pub fn new(core: TwCore, params: MixParams, mode: GreedyMode) -> Self {
        let n = core.cache.len();
        Self { core, stats: GlobalStats::new(n), params, mode }
    }

    pub fn core(&self) -> &TwCore {
        &self.core
    }

    /// Raw greedy scores `G_i(t)` of every arm.
    pub fn greedy_scores(&self, round: u64, states: &[usize]) -> Vec<f64> {
        let t = round as f64;
        let w = match self.mode {
            GreedyMode::Mixed => self.params.global_weight(t),
            GreedyMode::GlobalOnly => 1.0,
            GreedyMode::LocalOnly => 0.0,
        };
        (0..states.len())
            .map(|i| {
                let local = self.core.posteriors.arms[i].rewards.belief(states[i]);
                greedy_score_weighted(self.stats.mean(i), self.stats.pulls[i], local, t, &self.params, w)
            })
            .collect()
    }
}

/// `S = (1 - tau) W^ + tau G^` ranked descending; ties fall back to the raw
/// Whittle index, then to the arm index.
pub fn blend_and_rank(whittle: &[f64], greedy: &[f64], tau: f64, budget: usize) -> PolicyDecision {
    let w_hat = min_max_normalize(whittle);
    let g_hat = min_max_normalize(greedy);
    let scores: Vec<f64> = w_hat.iter().zip(&g_hat).map(|(w, g)| (1.0 - tau) * w + tau * g).collect();
    let selected =
        top_k_by(scores.len(), budget, |a, b| cmp_desc(scores[a], scores[b]).then(cmp_desc(whittle[a], whittle[b])));
    PolicyDecision { selected, scores }
}

impl Policy for TrustMixed {
    fn kind(&self) -> PolicyKind {
        match self.mode {
            GreedyMode::Mixed => PolicyKind::Tmtw,
            GreedyMode::GlobalOnly => PolicyKind::GlobalUcbTw,
            GreedyMode::LocalOnly => PolicyKind::LocalUcbTw,
        }
    }

    fn select(&mut self, obs: &Observation<'_>, budget: usize) -> PolicyDecision {
        self.core.refresh(obs.round);
        let whittle = self.core.indices(obs.states);
        let greedy = self.greedy_scores(obs.round, obs.states);
        blend_and_rank(&whittle, &greedy, self.params.trust(obs.round as f64), budget)
    }

    fn update(&mut self, fb: &Feedback<'_>) {
        self.stats.record(fb);
        self.core.update(fb);
    }
}

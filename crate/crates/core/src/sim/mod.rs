//! The grid-request loop.
//!
//! Each round every arm emits a (possibly noisy) context, the policy picks at
//! most `budget` arms from the decoded states, activated arms step with their
//! active kernel and pay their state reward, passive arms drift, and the
//! policy learns from what it saw. All environment randomness is drawn from
//! streams keyed by `(arm, round[, action])`, so two policies run on the same
//! seed face identical draws.

mod context;
mod summary;

pub use context::{decode_state, flip_state, make_context, position_state, ContextModel, ContextVector, NoiseConfig};
pub use summary::{summarize, Summary};

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmDynamics, ArmModel};
use crate::learning::PosteriorState;
use crate::policy::{
    Exp4Policy, Feedback, GreedyMode, Observation, OracleWhittle, Policy, PolicyDecision, PolicyKind, PolicySettings,
    StateThompson, ThompsonWhittle, TrustMixed, TwCore,
};
use crate::rng::{self, Stream};
use crate::whittle::{compute_indices_with_report, IndexConfig, WhittleTable};
use crate::{Error, Result};

/// Monotonic nanosecond clock used to time policy decisions.
pub trait Clock {
    fn now_nanos(&self) -> u64;
}

/// Clock for builds without a time source; every duration reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_nanos(&self) -> u64 {
        0
    }
}

/// Ground-truth arms plus everything derived from them once per run.
#[derive(Debug, Clone)]
pub struct Environment {
    pub arms: Vec<ArmModel>,
    pub contexts: Vec<ContextModel>,
    /// Arm dynamics with rewards multiplied by `reward_scale`; these are what
    /// the simulation pays out and what the oracle indexes.
    pub dynamics: Vec<ArmDynamics>,
    pub oracle: Vec<WhittleTable>,
    pub reward_scale: f64,
}

impl Environment {
    /// Fails with [`Error::NotIndexable`] if any ground-truth arm is not indexable.
    pub fn new(arms: Vec<ArmModel>, reward_scale: f64, index: &IndexConfig) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::config("environment needs at least one arm"));
        }
        if !(reward_scale > 0.0 && reward_scale.is_finite()) {
            return Err(Error::config("reward_scale must be positive"));
        }
        let dynamics: Vec<ArmDynamics> = arms.iter().map(|a| a.dynamics.scaled(reward_scale)).collect();
        let mut oracle = Vec::with_capacity(arms.len());
        for (arm, dyn_) in arms.iter().zip(&dynamics) {
            let (table, report) = compute_indices_with_report(dyn_, index, true)?;
            if !report.indexable {
                let why = report.violation.map(|v| format!("{v}")).unwrap_or_default();
                return Err(Error::NotIndexable(format!("arm {}: {why}", arm.arm_id)));
            }
            oracle.push(table);
        }
        let contexts = arms.iter().map(ContextModel::new).collect();
        Ok(Self { arms, contexts, dynamics, oracle, reward_scale })
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn state_counts(&self) -> Vec<usize> {
        self.arms.iter().map(ArmModel::n_states).collect()
    }

    fn initial_states(&self, seed: u64) -> Vec<usize> {
        (0..self.n_arms())
            .map(|i| rng::stream(seed, Stream::InitialState, &[i as u64]).random_range(0..self.arms[i].n_states()))
            .collect()
    }

    fn observe(&self, seed: u64, round: u64, true_states: &[usize], noise: &NoiseConfig) -> (Vec<ContextVector>, Vec<usize>) {
        let mut contexts = Vec::with_capacity(true_states.len());
        let mut decoded = Vec::with_capacity(true_states.len());
        for (i, &s) in true_states.iter().enumerate() {
            // A flipped observation is the full context of the wrong state,
            // so feature-based and state-based learners see the same error.
            let n_states = self.arms[i].n_states();
            let mut flip_rng = rng::stream(seed, Stream::StateFlip, &[i as u64, round]);
            let shown = flip_state(s, n_states, noise, &mut flip_rng);
            let mut ctx_rng = rng::stream(seed, Stream::Context, &[i as u64, round]);
            let ctx = self.contexts[i].observe(shown, noise, &mut ctx_rng);
            decoded.push(position_state(&ctx, n_states));
            contexts.push(ctx);
        }
        (contexts, decoded)
    }

    /// One environment transition of arm `i`; the stream depends only on
    /// `(arm, round, action)`.
    fn step(&self, seed: u64, round: u64, arm: usize, state: usize, active: bool) -> (usize, f64) {
        let mut r = rng::stream(seed, Stream::Step, &[arm as u64, round, active as u64]);
        let d = &self.dynamics[arm];
        if active {
            (d.p_active.sample(state, &mut r), d.rewards[state])
        } else {
            (d.p_passive.sample(state, &mut r), 0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub rounds: u64,
    /// Constant per-round activation budget `N_t`.
    pub budget: usize,
    pub noise: NoiseConfig,
    pub seed: u64,
}

/// What happened in one round of one policy's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round: u64,
    /// Activated arms, ascending.
    pub selected: Vec<usize>,
    /// Reward of every arm (zero when passive).
    pub rewards: Vec<f64>,
    pub total: f64,
    pub scores: Vec<f64>,
    /// True states at the start of the round.
    pub states: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub policy: PolicyKind,
    pub seed: u64,
    pub rounds: Vec<RoundOutcome>,
    /// Time spent inside `select` and `update`.
    pub policy_nanos: u64,
}

impl EpisodeTrace {
    pub fn total_reward(&self) -> f64 {
        self.rounds.iter().map(|r| r.total).sum()
    }

    pub fn policy_nanos_per_round(&self) -> f64 {
        self.policy_nanos as f64 / self.rounds.len().max(1) as f64
    }
}

/// Run one policy. `observer` sees every round's observation, decision and
/// feedback, which lets a shadow policy be driven by the same history.
pub fn simulate_with_observer<F>(
    env: &Environment,
    policy: &mut dyn Policy,
    cfg: &EpisodeConfig,
    clock: &dyn Clock,
    mut observer: F,
) -> Result<EpisodeTrace>
where
    F: FnMut(&Observation<'_>, &PolicyDecision, &Feedback<'_>),
{
    cfg.noise.validate()?;
    let n = env.n_arms();
    if cfg.budget > n {
        return Err(Error::config(format!("budget {} exceeds {n} arms", cfg.budget)));
    }
    let mut states = env.initial_states(cfg.seed);
    let (mut contexts, mut decoded) = env.observe(cfg.seed, 1, &states, &cfg.noise);
    let mut rounds = Vec::with_capacity(cfg.rounds as usize);
    let mut policy_nanos = 0u64;

    for t in 1..=cfg.rounds {
        let obs = Observation { round: t, states: &decoded, contexts: &contexts };
        let start = clock.now_nanos();
        let decision = policy.select(&obs, cfg.budget);
        policy_nanos += clock.now_nanos().saturating_sub(start);
        check_decision(&decision, n, cfg.budget)?;

        let mut active = vec![false; n];
        for &i in &decision.selected {
            active[i] = true;
        }
        let mut rewards = vec![0.0; n];
        let mut next = vec![0; n];
        for i in 0..n {
            let (s, r) = env.step(cfg.seed, t, i, states[i], active[i]);
            next[i] = s;
            rewards[i] = r;
        }
        let (next_contexts, next_decoded) = env.observe(cfg.seed, t + 1, &next, &cfg.noise);
        let fb = Feedback {
            round: t,
            states: &decoded,
            contexts: &contexts,
            active: &active,
            rewards: &rewards,
            next_states: &next_decoded,
        };
        let start = clock.now_nanos();
        policy.update(&fb);
        policy_nanos += clock.now_nanos().saturating_sub(start);
        observer(&obs, &decision, &fb);

        let mut selected = decision.selected;
        selected.sort_unstable();
        rounds.push(RoundOutcome {
            round: t,
            selected,
            total: rewards.iter().sum(),
            rewards,
            scores: decision.scores,
            states: core::mem::replace(&mut states, next),
        });
        contexts = next_contexts;
        decoded = next_decoded;
    }
    Ok(EpisodeTrace { policy: policy.kind(), seed: cfg.seed, rounds, policy_nanos })
}

pub fn simulate(env: &Environment, policy: &mut dyn Policy, cfg: &EpisodeConfig, clock: &dyn Clock) -> Result<EpisodeTrace> {
    simulate_with_observer(env, policy, cfg, clock, |_, _, _| {})
}

fn check_decision(d: &PolicyDecision, n: usize, budget: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if d.selected.len() > budget {
        return Err(Error::shape(format!("policy selected {} arms with budget {budget}", d.selected.len())));
    }
    for &i in &d.selected {
        if i >= n || seen[i] {
            return Err(Error::shape(format!("invalid or repeated arm {i} in decision")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Instantiate a policy for `env`. Policies that sample draw from a stream
/// keyed by the seed, and TW-based policies share one key so that they see
/// identical posterior samples.
pub fn build_policy(kind: PolicyKind, env: &Environment, settings: &PolicySettings, seed: u64) -> Result<Box<dyn Policy>> {
    settings.validate()?;
    let tw_core = || {
        let post = PosteriorState::new(&env.state_counts(), &settings.prior);
        TwCore::from_posteriors(post, settings.index, settings.mix.n_up, rng::stream(seed, Stream::Policy, &[0]))
    };
    let policy: Box<dyn Policy> = match kind {
        PolicyKind::Oracle => Box::new(OracleWhittle::new(env.oracle.clone())),
        PolicyKind::St => {
            Box::new(StateThompson::new(env.n_arms(), &settings.prior, rng::stream(seed, Stream::Policy, &[1])))
        }
        PolicyKind::Tw => Box::new(ThompsonWhittle::new(tw_core())),
        PolicyKind::Tmtw => Box::new(TrustMixed::new(tw_core(), settings.mix, GreedyMode::Mixed)),
        PolicyKind::GlobalUcbTw => Box::new(TrustMixed::new(tw_core(), settings.mix, GreedyMode::GlobalOnly)),
        PolicyKind::LocalUcbTw => Box::new(TrustMixed::new(tw_core(), settings.mix, GreedyMode::LocalOnly)),
        PolicyKind::Exp4 => Box::new(Exp4Policy::new(tw_core(), settings.mix, settings.exp4)),
    };
    Ok(policy)
}

/// One round of one policy, paired with the oracle run on the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub policy: PolicyKind,
    pub seed: u64,
    pub selected: Vec<usize>,
    pub rewards: Vec<f64>,
    pub reward: f64,
    pub cum_reward: f64,
    pub running_avg: f64,
    pub oracle_cum: f64,
    /// `oracle_cum - cum_reward`.
    pub regret: f64,
}

/// Attach prefix sums and regret against `oracle`.
pub fn pair_with_oracle(trace: &EpisodeTrace, oracle: &EpisodeTrace) -> Result<Vec<RoundRecord>> {
    if trace.rounds.len() != oracle.rounds.len() || trace.seed != oracle.seed {
        return Err(Error::shape("policy and oracle runs must share seed and length"));
    }
    let mut cum = 0.0;
    let mut oracle_cum = 0.0;
    let records = trace
        .rounds
        .iter()
        .zip(&oracle.rounds)
        .map(|(r, o)| {
            cum += r.total;
            oracle_cum += o.total;
            RoundRecord {
                round: r.round,
                policy: trace.policy,
                seed: trace.seed,
                selected: r.selected.clone(),
                rewards: r.rewards.clone(),
                reward: r.total,
                cum_reward: cum,
                running_avg: cum / r.round as f64,
                oracle_cum,
                regret: oracle_cum - cum,
            }
        })
        .collect();
    Ok(records)
}

/// A policy's run with its records already paired against the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trace: EpisodeTrace,
    pub records: Vec<RoundRecord>,
}

/// Run every policy in `kinds` on one seed, plus the oracle they are scored against.
pub fn run_paired(
    env: &Environment,
    kinds: &[PolicyKind],
    settings: &PolicySettings,
    cfg: &EpisodeConfig,
    clock: &dyn Clock,
) -> Result<Vec<Episode>> {
    let mut oracle_policy = build_policy(PolicyKind::Oracle, env, settings, cfg.seed)?;
    let oracle = simulate(env, oracle_policy.as_mut(), cfg, clock)?;
    kinds
        .iter()
        .map(|&kind| {
            let trace = if kind == PolicyKind::Oracle {
                oracle.clone()
            } else {
                let mut policy = build_policy(kind, env, settings, cfg.seed)?;
                simulate(env, policy.as_mut(), cfg, clock)?
            };
            let records = pair_with_oracle(&trace, &oracle)?;
            Ok(Episode { trace, records })
        })
        .collect()
}

/// Run one policy and its paired oracle.
pub fn run_episode(
    env: &Environment,
    kind: PolicyKind,
    settings: &PolicySettings,
    cfg: &EpisodeConfig,
    clock: &dyn Clock,
) -> Result<Episode> {
    let mut v = run_paired(env, &[kind], settings, cfg, clock)?;
    Ok(v.remove(0))
}

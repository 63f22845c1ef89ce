//! Ground-truth restless arms built from a data center's cyclic job queue.
//!
//! State `s` is the queue position of batch `B_s` (jobs `s*N_j .. s*N_j+N_j`).
//! A passive arm runs `B_s` and moves to `s + 1`. An activated arm inspects the
//! next `N_f` jobs `W_s`, runs the `N_j` lowest-power ones `C_s`, pays a QoS
//! penalty for the interactive jobs of `B_s` it skipped, and advances by a
//! random number of batches drawn from the [`Kick`] distribution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;
use crate::workload::VmJob;
use crate::{Error, Result};

const WATTS_PER_KW: f64 = 1_000.0;

/// Prices turning saved energy and delayed jobs into dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Prices {
    /// Locational marginal price, $/kWh.
    pub lmp: f64,
    /// Multiplier on the QoS delay cost.
    pub delay_mult: f64,
}

impl Default for Prices {
    fn default() -> Self {
        Self { lmp: 0.03, delay_mult: 1.0 }
    }
}

/// Distribution of how many batches the queue advances under activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, f64)>", into = "Vec<(usize, f64)>")]
pub struct Kick {
    outcomes: Vec<(usize, f64)>,
}

impl Kick {
    pub fn new(outcomes: Vec<(usize, f64)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::config("kick distribution is empty"));
        }
        if outcomes.iter().any(|&(k, p)| k == 0 || !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::config("kick advances must be >= 1 with nonnegative probabilities"));
        }
        let total: f64 = outcomes.iter().map(|o| o.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("kick probabilities sum to {total}")));
        }
        Ok(Kick { outcomes })
    }

    /// Always advance exactly one batch, so activation leaves the dynamics unchanged.
    pub fn degenerate() -> Self {
        Kick { outcomes: vec![(1, 1.0)] }
    }

    pub fn outcomes(&self) -> &[(usize, f64)] {
        &self.outcomes
    }

    pub fn kernel(&self, n: usize) -> Kernel {
        let mut data = vec![0.0; n * n];
        for s in 0..n {
            for &(k, p) in &self.outcomes {
                data[s * n + (s + k) % n] += p;
            }
        }
        Kernel::from_flat(n, data).expect("kick kernel rows sum to one")
    }
}

impl Default for Kick {
    fn default() -> Self {
        Kick { outcomes: vec![(1, 0.7), (2, 0.3)] }
    }
}

impl TryFrom<Vec<(usize, f64)>> for Kick {
    type Error = Error;

    fn try_from(v: Vec<(usize, f64)>) -> Result<Self> {
        Kick::new(v)
    }
}

impl From<Kick> for Vec<(usize, f64)> {
    fn from(k: Kick) -> Self {
        k.outcomes
    }
}

/// Rewards and kernels of a single arm: everything the index solvers need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDynamics {
    /// Active reward per state. Passive reward is always zero.
    pub rewards: Vec<f64>,
    pub p_active: Kernel,
    pub p_passive: Kernel,
}

impl ArmDynamics {
    pub fn new(rewards: Vec<f64>, p_active: Kernel, p_passive: Kernel) -> Result<Self> {
        let n = rewards.len();
        if n == 0 || p_active.n() != n || p_passive.n() != n {
            return Err(Error::shape(format!(
                "{} rewards but kernels of size {} and {}",
                n,
                p_active.n(),
                p_passive.n()
            )));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::shape("non-finite reward"));
        }
        Ok(Self { rewards, p_active, p_passive })
    }

    pub fn n_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rewards: self.rewards.iter().map(|r| r * factor).collect(),
            ..self.clone()
        }
    }
}

/// Outcome of the lookahead rescheduling at one state (indices into `jobs`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rescheduling {
    pub batch: Vec<usize>,
    pub window: Vec<usize>,
    pub chosen: Vec<usize>,
    pub delayed: Vec<usize>,
}

/// One data center's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub arm_id: usize,
    pub jobs: Vec<VmJob>,
    pub batch_size: usize,
    pub lookahead: usize,
    pub prices: Prices,
    pub kick: Kick,
    pub dynamics: ArmDynamics,
}

impl ArmModel {
    pub fn n_states(&self) -> usize {
        self.dynamics.n_states()
    }

    pub fn rewards(&self) -> &[f64] {
        &self.dynamics.rewards
    }

    pub fn batch(&self, state: usize) -> core::ops::Range<usize> {
        state * self.batch_size..(state + 1) * self.batch_size
    }

    pub fn reschedule(&self, state: usize) -> Rescheduling {
        reschedule(&self.jobs, self.batch_size, self.lookahead, state)
    }

    pub fn active_reward(&self, state: usize) -> f64 {
        self.dynamics.rewards[state]
    }

    /// Advance one round. Passive arms earn nothing.
    pub fn step<R: Rng + ?Sized>(&self, state: usize, active: bool, rng: &mut R) -> (usize, f64) {
        if active {
            (self.dynamics.p_active.sample(state, rng), self.active_reward(state))
        } else {
            (self.dynamics.p_passive.sample(state, rng), 0.0)
        }
    }
}

/// Build an arm from its job queue. `jobs.len()` must be a multiple of
/// `batch_size`, with at least two states and `batch_size <= lookahead <= jobs.len()`.
pub fn build_arm(
    arm_id: usize,
    jobs: Vec<VmJob>,
    batch_size: usize,
    lookahead: usize,
    prices: Prices,
    kick: Kick,
) -> Result<ArmModel> {
    if batch_size == 0 || jobs.len() % batch_size != 0 {
        return Err(Error::shape(format!(
            "{} jobs cannot be split into batches of {batch_size}",
            jobs.len()
        )));
    }
    let n_states = jobs.len() / batch_size;
    if n_states < 2 {
        return Err(Error::shape(format!("arm needs at least 2 states, got {n_states}")));
    }
    if lookahead < batch_size || lookahead > jobs.len() {
        return Err(Error::shape(format!(
            "lookahead {lookahead} must lie in [{batch_size}, {}]",
            jobs.len()
        )));
    }
    if !(prices.lmp >= 0.0 && prices.delay_mult >= 0.0) {
        return Err(Error::config("prices must be nonnegative"));
    }
    let rewards = (0..n_states)
        .map(|s| state_reward(&jobs, batch_size, lookahead, &prices, s))
        .collect();
    let dynamics = ArmDynamics::new(rewards, kick.kernel(n_states), Kernel::cyclic_shift(n_states, 1))?;
    Ok(ArmModel { arm_id, jobs, batch_size, lookahead, prices, kick, dynamics })
}

/// Choose the `batch_size` lowest-power jobs among the next `lookahead` jobs
/// after the start of batch `state`. Ties keep queue order.
pub fn reschedule(jobs: &[VmJob], batch_size: usize, lookahead: usize, state: usize) -> Rescheduling {
    let m = jobs.len();
    let start = state * batch_size;
    let batch: Vec<usize> = (start..start + batch_size).collect();
    let window: Vec<usize> = (0..lookahead).map(|k| (start + k) % m).collect();

    let mut order: Vec<usize> = (0..window.len()).collect();
    // stable sort keeps queue order among equal powers
    order.sort_by(|&a, &b| jobs[window[a]].power.total_cmp(&jobs[window[b]].power));
    let mut picked: Vec<usize> = order[..batch_size].to_vec();
    picked.sort_unstable();
    let chosen: Vec<usize> = picked.into_iter().map(|k| window[k]).collect();

    let delayed = batch.iter().copied().filter(|j| !chosen.contains(j)).collect();
    Rescheduling { batch, window, chosen, delayed }
}

/// Clipped net benefit of rescheduling, in dollars. Energies in kWh.
pub fn net_benefit(p_def_kwh: f64, p_sel_kwh: f64, delay_cost: f64, prices: &Prices) -> f64 {
    (prices.lmp * (p_def_kwh - p_sel_kwh) - prices.delay_mult * delay_cost).max(0.0)
}

fn state_reward(jobs: &[VmJob], batch_size: usize, lookahead: usize, prices: &Prices, state: usize) -> f64 {
    let plan = reschedule(jobs, batch_size, lookahead, state);
    // one batch runs for one hour, so W sums convert to kWh by /1000
    let p_def: f64 = plan.batch.iter().map(|&j| jobs[j].power).sum::<f64>() / WATTS_PER_KW;
    let p_sel: f64 = plan.chosen.iter().map(|&j| jobs[j].power).sum::<f64>() / WATTS_PER_KW;
    let delay: f64 = plan
        .delayed
        .iter()
        .map(|&j| if jobs[j].interactive { jobs[j].qos_cost } else { 0.0 })
        .sum();
    net_benefit(p_def, p_sel, delay, prices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};
    use crate::workload::{generate_workload, CostModel, GeneratorParams};
    use alloc::string::ToString;

    fn job(power: f64, interactive: bool, qos: f64) -> VmJob {
        VmJob {
            id: power.to_string(),
            core_hours: 1.0,
            utilization: 0.5,
            interactive,
            power,
            qos_cost: qos,
        }
    }

    fn jobs_with_powers(p: &[f64]) -> Vec<VmJob> {
        p.iter().map(|&x| job(x, false, 0.0)).collect()
    }

    #[test]
    fn state_count_and_passive_kernel() {
        let arm = build_arm(0, jobs_with_powers(&[1.0; 6]), 2, 2, Prices::default(), Kick::default()).unwrap();
        assert_eq!(arm.n_states(), 3);
        assert_eq!(arm.dynamics.p_passive.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(arm.dynamics.p_passive.row(2), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_kick_makes_kernels_equal() {
        let arm = build_arm(0, jobs_with_powers(&[1.0; 6]), 2, 4, Prices::default(), Kick::degenerate()).unwrap();
        assert_eq!(arm.dynamics.p_active, arm.dynamics.p_passive);
    }

    #[test]
    fn shape_errors() {
        let e = build_arm(0, jobs_with_powers(&[1.0; 7]), 2, 2, Prices::default(), Kick::default());
        assert!(matches!(e, Err(Error::Shape(_))));
        let e = build_arm(0, jobs_with_powers(&[1.0; 6]), 2, 1, Prices::default(), Kick::default());
        assert!(matches!(e, Err(Error::Shape(_))));
        assert!(Kick::new(vec![(1, 0.5)]).is_err());
    }

    #[test]
    fn reschedule_takes_lowest_power() {
        let jobs = jobs_with_powers(&[5.0, 1.0, 9.0, 2.0]);
        let plan = reschedule(&jobs, 2, 4, 0);
        let powers: Vec<f64> = plan.chosen.iter().map(|&j| jobs[j].power).collect();
        assert_eq!(powers, vec![1.0, 2.0]);
        assert_eq!(plan.delayed, vec![0]);
    }

    #[test]
    fn reschedule_without_slack_keeps_batch() {
        let jobs = jobs_with_powers(&[5.0, 1.0, 9.0, 2.0]);
        let plan = reschedule(&jobs, 2, 2, 1);
        assert_eq!(plan.chosen, plan.batch);
        assert!(plan.delayed.is_empty());
    }

    #[test]
    fn reschedule_ties_keep_queue_order_and_wrap() {
        let jobs = jobs_with_powers(&[3.0; 6]);
        let plan = reschedule(&jobs, 2, 4, 2);
        assert_eq!(plan.window, vec![4, 5, 0, 1]);
        assert_eq!(plan.chosen, vec![4, 5]);
    }

    #[test]
    fn net_benefit_formula() {
        let p = Prices::default();
        assert!((net_benefit(100.0, 60.0, 0.0, &p) - 1.2).abs() < 1e-12);
        assert_eq!(net_benefit(50.0, 50.0, 0.0, &p), 0.0);
        // savings of 1.0 against a 5.0 penalty clip to zero
        assert_eq!(net_benefit(100.0 / 3.0, 0.0, 5.0, &p), 0.0);
    }

    #[test]
    fn reward_charges_only_delayed_interactive_jobs() {
        // batch 0 = {1000 W interactive (qos 0.01), 10 W}; lookahead adds {10 W, 10 W}
        let jobs = vec![job(1000.0, true, 0.01), job(10.0, false, 0.0), job(10.0, false, 0.0), job(10.0, false, 0.0)];
        let arm = build_arm(0, jobs, 2, 4, Prices::default(), Kick::default()).unwrap();
        let expected = 0.03 * (1.010 - 0.020) - 0.01;
        assert!((arm.active_reward(0) - expected).abs() < 1e-12);
    }

    #[test]
    fn no_lookahead_slack_means_zero_reward() {
        let jobs = generate_workload(20, 4, &GeneratorParams::default(), &CostModel::default()).unwrap();
        let arm = build_arm(0, jobs, 4, 4, Prices::default(), Kick::default()).unwrap();
        assert!(arm.rewards().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn passive_step_is_deterministic() {
        let arm = build_arm(0, jobs_with_powers(&[1.0; 10]), 2, 2, Prices::default(), Kick::default()).unwrap();
        let mut rng = rng::stream(1, Stream::Step, &[]);
        assert_eq!(arm.step(2, false, &mut rng), (3, 0.0));
        let arm = build_arm(0, jobs_with_powers(&[1.0; 10]), 2, 2, Prices::default(), Kick::degenerate()).unwrap();
        assert_eq!(arm.step(4, true, &mut rng).0, 0);
    }

    #[test]
    fn active_step_follows_kick() {
        let arm = build_arm(0, jobs_with_powers(&[1.0; 10]), 2, 2, Prices::default(), Kick::default()).unwrap();
        let mut rng = rng::stream(99, Stream::Step, &[]);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[arm.step(0, true, &mut rng).0] += 1;
        }
        assert!((counts[1] as f64 / n as f64 - 0.7).abs() < 0.01);
        assert!((counts[2] as f64 / n as f64 - 0.3).abs() < 0.01);
        assert_eq!(counts[0] + counts[3] + counts[4], 0);
    }
}

//! Exact dynamic programming over the product of several arms.
//!
//! The joint state space grows as the product of the arms' state counts, so
//! this is only usable on desk-sized systems. It serves as the ground truth
//! that index policies are measured against.

use alloc::vec;
use alloc::vec::Vec;

use super::ViConfig;
use crate::arm::ArmDynamics;
use crate::{Error, Result};

pub const JOINT_STATE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct JointSolution {
    /// State count of each arm; joint states are mixed-radix encoded with arm 0 fastest.
    pub radices: Vec<usize>,
    /// Optimal discounted value of every joint state.
    pub values: Vec<f64>,
    /// Optimal activation mask (bit `i` = arm `i` active) per joint state.
    pub policy: Vec<u64>,
}

impl JointSolution {
    pub fn encode(&self, states: &[usize]) -> usize {
        encode(&self.radices, states)
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        decode(&self.radices, index)
    }

    /// Value averaged over a uniform initial joint state.
    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn encode(radices: &[usize], states: &[usize]) -> usize {
    let mut idx = 0;
    let mut mul = 1;
    for (s, n) in states.iter().zip(radices) {
        idx += s * mul;
        mul *= n;
    }
    idx
}

fn decode(radices: &[usize], mut index: usize) -> Vec<usize> {
    radices
        .iter()
        .map(|&n| {
            let s = index % n;
            index /= n;
            s
        })
        .collect()
}

type SparseRow = Vec<(usize, f64)>;

struct Model {
    radices: Vec<usize>,
    total: usize,
    /// `rows[arm][action][state]`
    rows: Vec<[Vec<SparseRow>; 2]>,
    rewards: Vec<Vec<f64>>,
}

impl Model {
    fn new(arms: &[ArmDynamics]) -> Result<Self> {
        if arms.is_empty() || arms.len() > 63 {
            return Err(Error::config("joint solver needs between 1 and 63 arms"));
        }
        let radices: Vec<usize> = arms.iter().map(ArmDynamics::n_states).collect();
        let mut total: usize = 1;
        for &n in &radices {
            total = total.saturating_mul(n);
        }
        if total > JOINT_STATE_LIMIT {
            return Err(Error::JointTooLarge { states: total, limit: JOINT_STATE_LIMIT });
        }
        let sparse = |k: &crate::kernel::Kernel| -> Vec<SparseRow> {
            (0..k.n())
                .map(|s| k.row(s).iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect())
                .collect()
        };
        let rows = arms.iter().map(|a| [sparse(&a.p_passive), sparse(&a.p_active)]).collect();
        let rewards = arms.iter().map(|a| a.rewards.clone()).collect();
        Ok(Model { radices, total, rows, rewards })
    }

    /// `r(x, mask) + beta * E[V(x')]`.
    fn backup(&self, states: &[usize], mask: u64, beta: f64, v: &[f64]) -> f64 {
        let reward: f64 = (0..states.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| self.rewards[i][states[i]])
            .sum();
        reward + beta * self.expect(states, mask, 0, 0, 1, 1.0, v)
    }

    #[allow(clippy::too_many_arguments)]
    fn expect(&self, states: &[usize], mask: u64, arm: usize, idx: usize, mul: usize, prob: f64, v: &[f64]) -> f64 {
        if arm == states.len() {
            return prob * v[idx];
        }
        let action = (mask >> arm & 1) as usize;
        self.rows[arm][action][states[arm]]
            .iter()
            .map(|&(t, p)| self.expect(states, mask, arm + 1, idx + t * mul, mul * self.radices[arm], prob * p, v))
            .sum()
    }
}

fn feasible_masks(n_arms: usize, budget: usize) -> Vec<u64> {
    (0..1u64 << n_arms).filter(|m| m.count_ones() as usize <= budget).collect()
}

/// Value iteration over every budget-feasible activation set (including
/// activating fewer than `budget` arms).
pub fn solve_joint_mdp(arms: &[ArmDynamics], budget: usize, cfg: &ViConfig) -> Result<JointSolution> {
    cfg.validate()?;
    let model = Model::new(arms)?;
    let masks = feasible_masks(arms.len(), budget);
    let states: Vec<Vec<usize>> = (0..model.total).map(|x| decode(&model.radices, x)).collect();
    let mut v = vec![0.0; model.total];
    let mut policy = vec![0u64; model.total];
    let mut next = vec![0.0; model.total];
    for iter in 0.. {
        let mut residual: f64 = 0.0;
        for (x, st) in states.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for &m in &masks {
                let q = model.backup(st, m, cfg.beta, &v);
                if q > best {
                    best = q;
                    policy[x] = m;
                }
            }
            next[x] = best;
            residual = residual.max((best - v[x]).abs());
        }
        core::mem::swap(&mut v, &mut next);
        if residual <= cfg.tol {
            break;
        }
        if iter + 1 >= cfg.max_iter {
            return Err(Error::NotConverged { iterations: cfg.max_iter, residual });
        }
    }
    Ok(JointSolution { radices: model.radices, values: v, policy })
}

/// Discounted value of a stationary joint policy mapping arm states to an
/// activation mask.
pub fn evaluate_joint_policy<F>(arms: &[ArmDynamics], cfg: &ViConfig, policy: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize]) -> u64,
{
    cfg.validate()?;
    let model = Model::new(arms)?;
    let states: Vec<Vec<usize>> = (0..model.total).map(|x| decode(&model.radices, x)).collect();
    let actions: Vec<u64> = states.iter().map(|s| policy(s)).collect();
    let mut v = vec![0.0; model.total];
    let mut next = vec![0.0; model.total];
    for iter in 0.. {
        let mut residual: f64 = 0.0;
        for (x, st) in states.iter().enumerate() {
            next[x] = model.backup(st, actions[x], cfg.beta, &v);
            residual = residual.max((next[x] - v[x]).abs());
        }
        core::mem::swap(&mut v, &mut next);
        if residual <= cfg.tol {
            break;
        }
        if iter + 1 >= cfg.max_iter {
            return Err(Error::NotConverged { iterations: cfg.max_iter, residual });
        }
    }
    Ok(v)
}

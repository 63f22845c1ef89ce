//! Brute-force reference solvers for tests.
//!
//! Nothing here shares code with [`crate::whittle`]: subsidy MDPs are solved
//! exactly by policy iteration with dense linear solves, and indices are read
//! off a dense subsidy scan instead of a bisection.

use alloc::vec;
use alloc::vec::Vec;

use crate::arm::ArmDynamics;
use crate::linalg::solve_in_place;

/// Exact `(Q1, Q0)` of the subsidy MDP. `policy` (true = passive) seeds the
/// iteration and is left at the optimal policy.
pub fn exact_q(arm: &ArmDynamics, lambda: f64, beta: f64, policy: &mut Vec<bool>) -> (Vec<f64>, Vec<f64>) {
    let n = arm.n_states();
    policy.resize(n, false);
    let mut q1 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    for _ in 0..200 {
        let mut a = vec![0.0; n * n];
        let mut v = vec![0.0; n];
        for s in 0..n {
            let row = if policy[s] { arm.p_passive.row(s) } else { arm.p_active.row(s) };
            for t in 0..n {
                a[s * n + t] = -beta * row[t];
            }
            a[s * n + s] += 1.0;
            v[s] = if policy[s] { lambda } else { arm.rewards[s] };
        }
        solve_in_place(&mut a, &mut v, n).expect("I - beta P is nonsingular for beta < 1");
        for s in 0..n {
            let c1: f64 = arm.p_active.row(s).iter().zip(&v).map(|(p, x)| p * x).sum();
            let c0: f64 = arm.p_passive.row(s).iter().zip(&v).map(|(p, x)| p * x).sum();
            q1[s] = arm.rewards[s] + beta * c1;
            q0[s] = lambda + beta * c0;
        }
        let mut changed = false;
        for s in 0..n {
            let eps = 1e-12 * (1.0 + q1[s].abs());
            if policy[s] && q1[s] > q0[s] + eps {
                policy[s] = false;
                changed = true;
            } else if !policy[s] && q0[s] > q1[s] + eps {
                policy[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (q1, q0)
}

/// For every state, the first subsidy on `lo, lo + step, ...` (up to `hi`)
/// at which passivity is optimal; `None` if it never is.
pub fn dense_scan_indices(arm: &ArmDynamics, beta: f64, lo: f64, hi: f64, step: f64) -> Vec<Option<f64>> {
    let n = arm.n_states();
    let mut found: Vec<Option<f64>> = vec![None; n];
    let mut policy = vec![false; n];
    let steps = ((hi - lo) / step).ceil() as usize;
    for k in 0..=steps {
        let lambda = lo + step * k as f64;
        let (q1, q0) = exact_q(arm, lambda, beta, &mut policy);
        for s in 0..n {
            if found[s].is_none() && q0[s] >= q1[s] - 1e-10 {
                found[s] = Some(lambda);
            }
        }
        if found.iter().all(Option::is_some) {
            break;
        }
    }
    found
}

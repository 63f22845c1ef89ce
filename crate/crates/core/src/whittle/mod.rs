//! Single-arm subsidy MDPs, numerical indexability checks and Whittle indices.
//!
//! For a subsidy `lambda` paid to the passive action, the subsidy MDP is
//!
//! ```text
//!   Q1(s) = r(s)   + beta * sum_s' P1(s, s') V(s')
//!   Q0(s) = lambda + beta * sum_s' P0(s, s') V(s')
//!   V(s)  = max(Q1(s), Q0(s))
//! ```
//!
//! and the passive-optimal set is `{s : Q0(s) >= Q1(s)}` (ties count as
//! passive). The Whittle index of `s` is the smallest subsidy putting `s` in
//! that set. Indices are located by scanning a subsidy grid, which also checks
//! that passive sets grow monotonically from empty to full, and then bisecting
//! inside the bracketing grid cell.

mod joint;

pub use joint::{evaluate_joint_policy, solve_joint_mdp, JointSolution, JOINT_STATE_LIMIT};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::arm::ArmDynamics;
use crate::kernel::Kernel;
use crate::{Error, Result};

/// Value-iteration settings shared by every solver in this module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViConfig {
    /// Discount factor, strictly inside (0, 1).
    pub beta: f64,
    /// Stop once the sup-norm Bellman residual is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self { beta: 0.95, tol: 1e-8, max_iter: 100_000 }
    }
}

impl ViConfig {
    pub fn with_beta(beta: f64) -> Self {
        Self { beta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::config("value iteration needs tol > 0 and max_iter >= 1"));
        }
        Ok(())
    }
}

/// Solution of one subsidy MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsidySolution {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub q_active: Vec<f64>,
    pub q_passive: Vec<f64>,
    /// `passive_set[s]` is true when `q_passive[s] >= q_active[s]`.
    pub passive_set: Vec<bool>,
    pub iterations: usize,
    pub residual: f64,
}

impl SubsidySolution {
    pub fn is_passive(&self, s: usize) -> bool {
        self.passive_set[s]
    }

    pub fn passive_states(&self) -> Vec<usize> {
        (0..self.passive_set.len()).filter(|&s| self.passive_set[s]).collect()
    }
}

pub fn solve_subsidy_mdp(arm: &ArmDynamics, lambda: f64, cfg: &ViConfig) -> Result<SubsidySolution> {
    cfg.validate()?;
    solve_from(arm, lambda, cfg, None)
}

fn bellman(
    r: &[f64],
    p1: &Kernel,
    p0: &Kernel,
    lambda: f64,
    beta: f64,
    v: &[f64],
    q1: &mut [f64],
    q0: &mut [f64],
) {
    let n = r.len();
    let (a1, a0) = (p1.as_flat(), p0.as_flat());
    for s in 0..n {
        let (row1, row0) = (&a1[s * n..(s + 1) * n], &a0[s * n..(s + 1) * n]);
        let mut c1 = 0.0;
        let mut c0 = 0.0;
        for t in 0..n {
            c1 += row1[t] * v[t];
            c0 += row0[t] * v[t];
        }
        q1[s] = r[s] + beta * c1;
        q0[s] = lambda + beta * c0;
    }
}

/// Value iteration, optionally warm-started from a nearby solution.
fn solve_from(arm: &ArmDynamics, lambda: f64, cfg: &ViConfig, warm: Option<&[f64]>) -> Result<SubsidySolution> {
    let n = arm.n_states();
    let mut v = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => vec![0.0; n],
    };
    let mut q1 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < cfg.max_iter {
        bellman(&arm.rewards, &arm.p_active, &arm.p_passive, lambda, cfg.beta, &v, &mut q1, &mut q0);
        iterations += 1;
        residual = 0.0;
        for s in 0..n {
            let next = q1[s].max(q0[s]);
            residual = residual.max((next - v[s]).abs());
            v[s] = next;
        }
        if residual <= cfg.tol {
            break;
        }
    }
    if !(residual <= cfg.tol) {
        return Err(Error::NotConverged { iterations, residual });
    }
    bellman(&arm.rewards, &arm.p_active, &arm.p_passive, lambda, cfg.beta, &v, &mut q1, &mut q0);
    let values = q1.iter().zip(&q0).map(|(a, b)| a.max(*b)).collect();
    let passive_set = q1.iter().zip(&q0).map(|(a, b)| b >= a).collect();
    Ok(SubsidySolution { lambda, values, q_active: q1, q_passive: q0, passive_set, iterations, residual })
}

/// Strictly increasing list of subsidies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SubsidyGrid {
    points: Vec<f64>,
}

impl SubsidyGrid {
    pub const DEFAULT_POINTS: usize = 201;
    pub const DEFAULT_MARGIN: f64 = 1.0;

    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::config("subsidy grid needs at least two points"));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("subsidy grid must be finite and strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn linspace(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(max > min) {
            return Err(Error::config(format!("cannot build grid over [{min}, {max}] with {n} points")));
        }
        let step = (max - min) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|k| min + step * k as f64).collect();
        points[n - 1] = max;
        Self::new(points)
    }

    /// `[min r - margin, max r + margin]`.
    pub fn around_rewards(rewards: &[f64], margin: f64, n: usize) -> Result<Self> {
        let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::linspace(lo - margin, hi + margin, n)
    }

    pub fn default_for(rewards: &[f64]) -> Result<Self> {
        Self::around_rewards(rewards, Self::DEFAULT_MARGIN, Self::DEFAULT_POINTS)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

impl TryFrom<Vec<f64>> for SubsidyGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SubsidyGrid::new(v)
    }
}

impl From<SubsidyGrid> for Vec<f64> {
    fn from(g: SubsidyGrid) -> Self {
        g.points
    }
}

/// The first way an arm failed the numerical indexability check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// Some states are already passive at the smallest subsidy.
    PassiveAtMin { lambda: f64, states: Vec<usize> },
    /// Some states are still active at the largest subsidy.
    ActiveAtMax { lambda: f64, states: Vec<usize> },
    /// `state` left the passive set between two consecutive subsidies.
    Shrinks { state: usize, lambda_lo: f64, lambda_hi: f64 },
}

impl Violation {
    pub fn is_boundary(&self) -> bool {
        !matches!(self, Violation::Shrinks { .. })
    }
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Violation::PassiveAtMin { lambda, states } => {
                write!(f, "states {states:?} already passive at grid minimum {lambda}")
            }
            Violation::ActiveAtMax { lambda, states } => {
                write!(f, "states {states:?} still active at grid maximum {lambda}")
            }
            Violation::Shrinks { state, lambda_lo, lambda_hi } => {
                write!(f, "state {state} passive at {lambda_lo} but active at {lambda_hi}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexabilityReport {
    pub indexable: bool,
    pub violation: Option<Violation>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

struct GridScan {
    solutions: Vec<SubsidySolution>,
}

fn scan_grid(arm: &ArmDynamics, grid: &SubsidyGrid, cfg: &ViConfig) -> Result<GridScan> {
    let mut solutions: Vec<SubsidySolution> = Vec::with_capacity(grid.points.len());
    for &lambda in &grid.points {
        // V is affine in lambda while the policy is fixed, so extrapolating
        // the last two solutions is usually within tolerance already.
        let warm = match solutions.as_slice() {
            [.., a, b] => {
                let k = (lambda - b.lambda) / (b.lambda - a.lambda);
                Some(b.values.iter().zip(&a.values).map(|(vb, va)| vb + k * (vb - va)).collect::<Vec<_>>())
            }
            [b] => Some(b.values.clone()),
            [] => None,
        };
        solutions.push(solve_from(arm, lambda, cfg, warm.as_deref())?);
    }
    Ok(GridScan { solutions })
}

impl GridScan {
    fn first_violation(&self) -> Option<Violation> {
        let first = &self.solutions[0];
        let last = &self.solutions[self.solutions.len() - 1];
        let at_min = first.passive_states();
        if !at_min.is_empty() {
            return Some(Violation::PassiveAtMin { lambda: first.lambda, states: at_min });
        }
        let n = last.passive_set.len();
        let active_at_max: Vec<usize> = (0..n).filter(|&s| !last.passive_set[s]).collect();
        if !active_at_max.is_empty() {
            return Some(Violation::ActiveAtMax { lambda: last.lambda, states: active_at_max });
        }
        for w in self.solutions.windows(2) {
            if let Some(state) = (0..n).find(|&s| w[0].passive_set[s] && !w[1].passive_set[s]) {
                return Some(Violation::Shrinks { state, lambda_lo: w[0].lambda, lambda_hi: w[1].lambda });
            }
        }
        None
    }

    fn report(&self) -> IndexabilityReport {
        let violation = self.first_violation();
        IndexabilityReport {
            indexable: violation.is_none(),
            violation,
            lambda_min: self.solutions[0].lambda,
            lambda_max: self.solutions[self.solutions.len() - 1].lambda,
        }
    }
}

/// Passive sets must grow along the grid, starting empty and ending full.
pub fn check_indexability(arm: &ArmDynamics, grid: &SubsidyGrid, cfg: &ViConfig) -> Result<IndexabilityReport> {
    cfg.validate()?;
    Ok(scan_grid(arm, grid, cfg)?.report())
}

/// Whittle indices of every state of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhittleTable {
    pub indices: Vec<f64>,
    pub indexable: bool,
    pub grid: SubsidyGrid,
    pub beta: f64,
}

impl WhittleTable {
    #[inline]
    pub fn index(&self, state: usize) -> f64 {
        self.indices[state]
    }
}

pub fn whittle_index(
    arm: &ArmDynamics,
    grid: &SubsidyGrid,
    cfg: &ViConfig,
    bisect_tol: f64,
    allow_nonindexable: bool,
) -> Result<WhittleTable> {
    cfg.validate()?;
    if !(bisect_tol > 0.0) {
        return Err(Error::config("bisect_tol must be positive"));
    }
    let scan = scan_grid(arm, grid, cfg)?;
    let report = scan.report();
    if !report.indexable && !allow_nonindexable {
        let why = report.violation.map(|v| format!("{v}")).unwrap_or_default();
        return Err(Error::NotIndexable(why));
    }
    let indices = (0..arm.n_states())
        .map(|s| locate_index(arm, &scan, s, cfg, bisect_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(WhittleTable { indices, indexable: report.indexable, grid: grid.clone(), beta: cfg.beta })
}

/// Bisect inside the first grid cell where `state` becomes passive.
fn locate_index(arm: &ArmDynamics, scan: &GridScan, state: usize, cfg: &ViConfig, tol: f64) -> Result<f64> {
    let sols = &scan.solutions;
    let k = match sols.iter().position(|sol| sol.passive_set[state]) {
        Some(0) => return Ok(sols[0].lambda),
        Some(k) => k,
        None => return Ok(sols[sols.len() - 1].lambda),
    };
    let mut lo = sols[k - 1].lambda;
    let mut hi = sols[k].lambda;
    let mut v_lo = sols[k - 1].values.clone();
    let mut v_hi = sols[k].values.clone();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let warm: Vec<f64> = v_lo.iter().zip(&v_hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let sol = solve_from(arm, mid, cfg, Some(&warm))?;
        if sol.passive_set[state] {
            hi = mid;
            v_hi = sol.values;
        } else {
            lo = mid;
            v_lo = sol.values;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Index computation settings used by the simulation policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexConfig {
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub grid_points: usize,
    /// Initial grid margin around the reward range.
    pub margin: f64,
    pub bisect_tol: f64,
    /// How many times the margin may be quadrupled when the grid boundaries
    /// do not bracket every index.
    pub max_widenings: u32,
}

impl Default for IndexConfig {
    fn default() -> Self {
        let vi = ViConfig::default();
        Self {
            beta: vi.beta,
            tol: vi.tol,
            max_iter: vi.max_iter,
            grid_points: SubsidyGrid::DEFAULT_POINTS,
            margin: SubsidyGrid::DEFAULT_MARGIN,
            bisect_tol: 1e-7,
            max_widenings: 6,
        }
    }
}

impl IndexConfig {
    pub fn vi(&self) -> ViConfig {
        ViConfig { beta: self.beta, tol: self.tol, max_iter: self.max_iter }
    }

    pub fn validate(&self) -> Result<()> {
        self.vi().validate()?;
        if self.grid_points < 2 || !(self.margin > 0.0) || !(self.bisect_tol > 0.0) {
            return Err(Error::config("index config needs grid_points >= 2, margin > 0, bisect_tol > 0"));
        }
        Ok(())
    }
}

/// Indices on a reward-centred grid, widened until its ends bracket every
/// state. Monotonicity violations are reported through
/// [`WhittleTable::indexable`]; with `allow_nonindexable` false they are errors.
pub fn compute_indices(arm: &ArmDynamics, cfg: &IndexConfig, allow_nonindexable: bool) -> Result<WhittleTable> {
    let (table, _) = compute_indices_with_report(arm, cfg, allow_nonindexable)?;
    Ok(table)
}

pub fn compute_indices_with_report(
    arm: &ArmDynamics,
    cfg: &IndexConfig,
    allow_nonindexable: bool,
) -> Result<(WhittleTable, IndexabilityReport)> {
    cfg.validate()?;
    let vi = cfg.vi();
    let mut margin = cfg.margin;
    let mut widenings = 0;
    loop {
        let grid = SubsidyGrid::around_rewards(&arm.rewards, margin, cfg.grid_points)?;
        let scan = scan_grid(arm, &grid, &vi)?;
        let report = scan.report();
        let boundary = report.violation.as_ref().is_some_and(Violation::is_boundary);
        if boundary && widenings < cfg.max_widenings {
            margin *= 4.0;
            widenings += 1;
            continue;
        }
        if !report.indexable && !allow_nonindexable {
            let why = report.violation.as_ref().map(|v| format!("{v}")).unwrap_or_default();
            return Err(Error::NotIndexable(why));
        }
        let indices = (0..arm.n_states())
            .map(|s| locate_index(arm, &scan, s, &vi, cfg.bisect_tol))
            .collect::<Result<Vec<_>>>()?;
        let table = WhittleTable { indices, indexable: report.indexable, grid, beta: cfg.beta };
        return Ok((table, report));
    }
}

/// Grid-only report with the same widening rule as [`compute_indices`].
pub fn check_indexability_auto(arm: &ArmDynamics, cfg: &IndexConfig) -> Result<IndexabilityReport> {
    cfg.validate()?;
    let mut margin = cfg.margin;
    for widening in 0..=cfg.max_widenings {
        let grid = SubsidyGrid::around_rewards(&arm.rewards, margin, cfg.grid_points)?;
        let report = check_indexability(arm, &grid, &cfg.vi())?;
        let boundary = report.violation.as_ref().is_some_and(Violation::is_boundary);
        if !boundary || widening == cfg.max_widenings {
            return Ok(report);
        }
        margin *= 4.0;
    }
    unreachable!()
}

//! Indexability report for the ground-truth arms of a config.

use std::fmt::Write as _;

use dcrmab_core::whittle::compute_indices_with_report;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::runner::{build_arms, JobSource};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmCheck {
    pub seed: u64,
    pub arm: usize,
    pub n_states: usize,
    pub indexable: bool,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub violation: Option<String>,
    pub indices: Vec<f64>,
}

/// Check every arm of every configured seed, on the scaled rewards the
/// simulation pays out.
pub fn check_config(cfg: &RunConfig) -> Result<Vec<ArmCheck>> {
    cfg.validate()?;
    let jobs = JobSource::load(cfg)?;
    let mut out = Vec::new();
    for &seed in &cfg.run.seeds {
        for arm in build_arms(cfg, &jobs, seed)? {
            let dynamics = arm.dynamics.scaled(cfg.run.reward_scale);
            let (table, report) = compute_indices_with_report(&dynamics, &cfg.policy.index, true)?;
            out.push(ArmCheck {
                seed,
                arm: arm.arm_id,
                n_states: arm.n_states(),
                indexable: report.indexable,
                lambda_min: report.lambda_min,
                lambda_max: report.lambda_max,
                violation: report.violation.map(|v| v.to_string()),
                indices: table.indices,
            });
        }
    }
    Ok(out)
}

pub fn render(checks: &[ArmCheck]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6} {:>4} {:>7} {:>10} {:>24}  first violation", "seed", "arm", "states", "indexable", "lambda range");
    for c in checks {
        let range = format!("[{:.4}, {:.4}]", c.lambda_min, c.lambda_max);
        let _ = writeln!(
            s,
            "{:>6} {:>4} {:>7} {:>10} {:>24}  {}",
            c.seed,
            c.arm,
            c.n_states,
            if c.indexable { "yes" } else { "NO" },
            range,
            c.violation.as_deref().unwrap_or("-")
        );
    }
    let bad = checks.iter().filter(|c| !c.indexable).count();
    let _ = writeln!(s, "{} of {} arms indexable", checks.len() - bad, checks.len());
    s
}

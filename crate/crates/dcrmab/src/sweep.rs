//! One-dimensional sweeps over a base config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dcrmab_core::sim::Summary;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output::{self, write_file};
use crate::runner::{self, RunOutput};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_TIMING_CSV: &str = "sweep_timing.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDim {
    JobsPerDc,
    StateFlip,
    TMix,
    TG,
    /// `n_dc:budget` pairs.
    DcBudget,
}

impl SweepDim {
    pub const ALL: [SweepDim; 5] = [SweepDim::JobsPerDc, SweepDim::StateFlip, SweepDim::TMix, SweepDim::TG, SweepDim::DcBudget];

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepDim::JobsPerDc => "n_jobs_per_dc",
            SweepDim::StateFlip => "p_state_flip",
            SweepDim::TMix => "t_mix",
            SweepDim::TG => "t_g",
            SweepDim::DcBudget => "n_dc_budget",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Count(usize),
    Real(f64),
    Pair(usize, usize),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Count(n) => write!(f, "{n}"),
            SweepValue::Real(x) => write!(f, "{x}"),
            SweepValue::Pair(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

/// `dimension=v1,v2,...`, e.g. `p_state_flip=0,0.1,0.2` or `n_dc_budget=3:1,5:2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub dim: SweepDim,
    pub values: Vec<SweepValue>,
}

impl FromStr for SweepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: String| Error::Sweep { spec: s.to_string(), message };
        let (name, list) = s.split_once('=').ok_or_else(|| bad("expected dimension=v1,v2,...".into()))?;
        let dim = SweepDim::ALL.into_iter().find(|d| d.as_str() == name.trim()).ok_or_else(|| {
            let known: Vec<&str> = SweepDim::ALL.iter().map(SweepDim::as_str).collect();
            bad(format!("unknown dimension '{}' (expected one of {})", name.trim(), known.join(", ")))
        })?;
        let values = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                let parsed = match dim {
                    SweepDim::JobsPerDc => v.parse().ok().map(SweepValue::Count),
                    SweepDim::StateFlip | SweepDim::TMix | SweepDim::TG => v.parse().ok().map(SweepValue::Real),
                    SweepDim::DcBudget => v
                        .split_once(':')
                        .and_then(|(a, b)| Some(SweepValue::Pair(a.trim().parse().ok()?, b.trim().parse().ok()?))),
                };
                parsed.ok_or_else(|| bad(format!("cannot parse value '{v}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(bad("no values".into()));
        }
        Ok(SweepSpec { dim, values })
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.values.iter().map(ToString::to_string).collect();
        write!(f, "{}={}", self.dim.as_str(), vals.join(","))
    }
}

impl SweepSpec {
    /// `base` with one grid value applied, validated.
    pub fn apply(&self, base: &RunConfig, value: SweepValue) -> Result<RunConfig> {
        let mut cfg = base.clone();
        match (self.dim, value) {
            (SweepDim::JobsPerDc, SweepValue::Count(n)) => cfg.workload.n_jobs_per_dc = n,
            (SweepDim::StateFlip, SweepValue::Real(p)) => cfg.noise.p_state_flip = p,
            (SweepDim::TMix, SweepValue::Real(t)) => cfg.policy.mix.t_mix = t,
            (SweepDim::TG, SweepValue::Real(t)) => cfg.policy.mix.t_g = t,
            (SweepDim::DcBudget, SweepValue::Pair(n, b)) => {
                cfg.arms.n_dc = n;
                cfg.run.budget = b;
            }
            _ => unreachable!("values are parsed per dimension"),
        }
        cfg.validate().map_err(|e| Error::Sweep { spec: format!("{}={value}", self.dim.as_str()), message: e.to_string() })?;
        Ok(cfg)
    }

    pub fn point_dir(&self, value: SweepValue) -> String {
        format!("{}={}", self.dim.as_str(), value.to_string().replace(':', "x"))
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: SweepValue,
    pub output: RunOutput,
    pub summaries: Vec<Summary>,
}

/// Run every grid point; points run concurrently.
pub fn run_sweep(base: &RunConfig, spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    let configs = spec.values.iter().map(|&v| Ok((v, spec.apply(base, v)?))).collect::<Result<Vec<_>>>()?;
    configs
        .into_par_iter()
        .map(|(value, cfg)| {
            let output = runner::run(&cfg)?;
            let summaries = output.summaries()?;
            Ok(SweepPoint { value, output, summaries })
        })
        .collect()
}

/// Per-point run directories plus the merged `sweep.csv` and `sweep_timing.csv`.
pub fn write_sweep(dir: &Path, spec: &SweepSpec, points: &[SweepPoint]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for p in points {
        written.extend(output::write_run(&dir.join(spec.point_dir(p.value)), &p.output)?);
    }
    let dim = spec.dim.as_str();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut t = csv::Writer::from_writer(Vec::new());
    let wrap = |e| Error::csv(dir.join(SWEEP_CSV), e);
    w.write_record([dim, "policy", "runs", "avg_reward", "cum_reward", "percent_of_oracle"]).map_err(wrap)?;
    t.write_record([dim, "policy", "us_per_round"]).map_err(wrap)?;
    for p in points {
        for s in &p.summaries {
            w.write_record([
                p.value.to_string(),
                s.policy.to_string(),
                s.runs.to_string(),
                s.avg_reward.to_string(),
                s.cum_reward.to_string(),
                format!("{:.4}", s.percent_of_oracle),
            ])
            .map_err(wrap)?;
            let us = s.wall_time_s * 1e6 / s.rounds.max(1) as f64;
            t.write_record([p.value.to_string(), s.policy.to_string(), format!("{us:.3}")]).map_err(wrap)?;
        }
    }
    for (name, writer) in [(SWEEP_CSV, w), (SWEEP_TIMING_CSV, t)] {
        let path = dir.join(name);
        let bytes = writer.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

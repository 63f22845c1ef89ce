//! Builds environments from a config and runs every (seed, policy) pair.

use std::time::Instant;

use dcrmab_core::arm::{build_arm, ArmModel};
use dcrmab_core::policy::PolicyKind;
use dcrmab_core::rng::{derive_seed, Stream};
use dcrmab_core::sim::{run_paired, summarize, Clock, Environment, Episode, EpisodeConfig, Summary};
use dcrmab_core::workload::{generate_workload, VmJob};
use rayon::prelude::*;

use crate::config::{RunConfig, WorkloadSource};
use crate::error::{Error, Result};
use crate::trace::{ingest_trace, TraceSchema};

/// Wall clock for policy timing.
#[derive(Debug, Clone, Copy)]
pub struct StdClock {
    origin: Instant,
}

impl Default for StdClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for StdClock {
    fn now_nanos(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }
}

/// Jobs available to [`build_arms`]: generated per seed, or a fixed trace.
#[derive(Debug, Clone)]
pub enum JobSource {
    Generate,
    Trace(Vec<VmJob>),
}

impl JobSource {
    /// Reads the trace file when the config asks for one. Rows the
    /// ingester could not parse are reported on stderr, not fatal.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        match cfg.workload.source {
            WorkloadSource::Generate => Ok(JobSource::Generate),
            WorkloadSource::Ingest => {
                let path = cfg.workload.path.as_ref().ok_or_else(|| Error::invalid("workload.path", "missing"))?;
                let out = ingest_trace(path, &TraceSchema::default(), &cfg.workload.cost)?;
                for e in &out.row_errors {
                    eprintln!("warning: {}: {e}", path.display());
                }
                if out.dropped > 0 {
                    eprintln!("{}: {} rows removed by the filter", path.display(), out.dropped);
                }
                Ok(JobSource::Trace(out.jobs))
            }
        }
    }
}

/// Arm `i` of a generated workload draws its jobs from a seed derived from
/// `(workload seed, i)`; a trace is split into consecutive blocks.
pub fn build_arms(cfg: &RunConfig, jobs: &JobSource, seed: u64) -> Result<Vec<ArmModel>> {
    let m = cfg.workload.n_jobs_per_dc;
    let a = &cfg.arms;
    (0..a.n_dc)
        .map(|i| {
            let queue = match jobs {
                JobSource::Generate => {
                    let ws = cfg.workload.seed.unwrap_or(seed);
                    generate_workload(m, derive_seed(ws, Stream::Arm, &[i as u64]), &cfg.workload.generator, &cfg.workload.cost)?
                }
                JobSource::Trace(all) => {
                    let block = all.get(i * m..(i + 1) * m).ok_or_else(|| {
                        Error::invalid(
                            "workload.path",
                            format!("trace has {} usable jobs, {} data centers need {}", all.len(), a.n_dc, a.n_dc * m),
                        )
                    })?;
                    block.to_vec()
                }
            };
            Ok(build_arm(i, queue, a.batch_size, a.lookahead, a.prices, a.kick.clone())?)
        })
        .collect()
}

pub fn build_environment(cfg: &RunConfig, jobs: &JobSource, seed: u64) -> Result<Environment> {
    let arms = build_arms(cfg, jobs, seed)?;
    Ok(Environment::new(arms, cfg.run.reward_scale, &cfg.policy.index)?)
}

pub fn episode_config(cfg: &RunConfig, seed: u64) -> EpisodeConfig {
    EpisodeConfig { rounds: cfg.run.rounds, budget: cfg.run.budget, noise: cfg.noise, seed }
}

/// Every policy of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub episodes: Vec<Episode>,
}

impl SeedRun {
    pub fn episode(&self, kind: PolicyKind) -> Option<&Episode> {
        self.episodes.iter().find(|e| e.trace.policy == kind)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    /// In the order of `config.run.seeds`.
    pub runs: Vec<SeedRun>,
}

impl RunOutput {
    /// Mean summary per policy over seeds, in config order. Wall time is the
    /// time spent inside the policy.
    pub fn summaries(&self) -> Result<Vec<Summary>> {
        self.config
            .run
            .policies
            .iter()
            .map(|&kind| {
                let per_seed = self
                    .runs
                    .iter()
                    .map(|r| {
                        let ep = r.episode(kind).expect("every seed runs every policy");
                        summarize(&ep.records, self.config.run.window, ep.trace.policy_nanos as f64 * 1e-9)
                    })
                    .collect::<dcrmab_core::Result<Vec<_>>>()?;
                Ok(Summary::mean(&per_seed)?)
            })
            .collect()
    }
}

/// Run one seed: every configured policy against the same environment.
pub fn run_seed(cfg: &RunConfig, jobs: &JobSource, seed: u64) -> Result<SeedRun> {
    let env = build_environment(cfg, jobs, seed)?;
    let episodes = run_paired(&env, &cfg.run.policies, &cfg.policy, &episode_config(cfg, seed), &StdClock::default())?;
    Ok(SeedRun { seed, episodes })
}

/// Run all seeds in parallel; results come back in seed-list order.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let jobs = JobSource::load(cfg)?;
    let runs = cfg.run.seeds.par_iter().map(|&seed| run_seed(cfg, &jobs, seed)).collect::<Result<Vec<_>>>()?;
    Ok(RunOutput { config: cfg.clone(), runs })
}

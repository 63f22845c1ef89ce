//! Run configuration: a TOML file with one table per concern. Unknown keys
//! are rejected everywhere, and semantic errors name the offending key and,
//! when the file is at hand, its line.

use std::path::{Path, PathBuf};

use dcrmab_core::arm::{Kick, Prices};
use dcrmab_core::policy::{PolicyKind, PolicySettings};
use dcrmab_core::sim::NoiseConfig;
use dcrmab_core::workload::{CostModel, GeneratorParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadSource {
    #[default]
    Generate,
    Ingest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSection {
    pub source: WorkloadSource,
    /// Trace file for `source = "ingest"`, relative to the config file.
    pub path: Option<PathBuf>,
    /// Jobs per data center, `N_m`.
    pub n_jobs_per_dc: usize,
    /// Fixes the generated workload across run seeds; by default each run
    /// seed draws its own jobs.
    pub seed: Option<u64>,
    pub generator: GeneratorParams,
    pub cost: CostModel,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            source: WorkloadSource::Generate,
            path: None,
            n_jobs_per_dc: 40,
            seed: None,
            generator: GeneratorParams::default(),
            cost: CostModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmsSection {
    pub n_dc: usize,
    /// Jobs per batch, `N_j`.
    pub batch_size: usize,
    /// Jobs inspected under activation, `N_f`.
    pub lookahead: usize,
    pub kick: Kick,
    pub prices: Prices,
}

impl Default for ArmsSection {
    fn default() -> Self {
        Self { n_dc: 3, batch_size: 4, lookahead: 8, kick: Kick::default(), prices: Prices::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Arms activated per round, `N_t`.
    pub budget: usize,
    pub rounds: u64,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    /// Multiplier turning dollar rewards into simulation reward units.
    pub reward_scale: f64,
    /// Trailing window of the running-average series.
    pub window: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            budget: 1,
            rounds: 600,
            policies: vec![PolicyKind::Oracle, PolicyKind::St, PolicyKind::Tw, PolicyKind::Tmtw],
            seeds: (1..=5).collect(),
            reward_scale: DEFAULT_REWARD_SCALE,
            window: 600,
        }
    }
}

/// Dollar rewards of the default power model are a few hundredths of a cent;
/// this brings them to the order of the unit-variance reward prior.
pub const DEFAULT_REWARD_SCALE: f64 = 5_000.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub workload: WorkloadSection,
    pub arms: ArmsSection,
    pub run: RunSection,
    pub noise: NoiseConfig,
    pub policy: PolicySettings,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parse and validate. Errors carry the line of the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Invalid {
            field: "config".into(),
            message: e.message().to_string(),
            line: e.span().map(|s| line_of_offset(text, s.start)),
        })?;
        cfg.validate().map_err(|e| with_line(e, text))?;
        Ok(cfg)
    }

    /// Load a config file; a relative ingest path is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Invalid { field, message, line } => Error::Parse {
                path: path.to_path_buf(),
                message: Error::Invalid { field, message, line }.to_string(),
            },
            other => other,
        })?;
        if let (Some(p), Some(dir)) = (cfg.workload.path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn n_states(&self) -> usize {
        self.workload.n_jobs_per_dc / self.arms.batch_size.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.workload;
        let a = &self.arms;
        let r = &self.run;
        if w.source == WorkloadSource::Ingest && w.path.is_none() {
            return Err(Error::invalid("workload.path", "required when source = \"ingest\""));
        }
        if a.batch_size == 0 {
            return Err(Error::invalid("arms.batch_size", "must be at least 1"));
        }
        if w.n_jobs_per_dc % a.batch_size != 0 {
            return Err(Error::invalid(
                "workload.n_jobs_per_dc",
                format!("{} jobs cannot be split into batches of arms.batch_size = {}", w.n_jobs_per_dc, a.batch_size),
            ));
        }
        if self.n_states() < 2 {
            return Err(Error::invalid("workload.n_jobs_per_dc", "each data center needs at least 2 batches"));
        }
        if a.lookahead < a.batch_size || a.lookahead > w.n_jobs_per_dc {
            return Err(Error::invalid(
                "arms.lookahead",
                format!("must lie in [{}, {}]", a.batch_size, w.n_jobs_per_dc),
            ));
        }
        if a.n_dc == 0 {
            return Err(Error::invalid("arms.n_dc", "must be at least 1"));
        }
        if !(a.prices.lmp >= 0.0 && a.prices.delay_mult >= 0.0) {
            return Err(Error::invalid("arms.prices", "prices must be nonnegative"));
        }
        if r.budget > a.n_dc {
            return Err(Error::invalid("run.budget", format!("exceeds arms.n_dc = {}", a.n_dc)));
        }
        if r.rounds == 0 {
            return Err(Error::invalid("run.rounds", "must be at least 1"));
        }
        if r.policies.is_empty() {
            return Err(Error::invalid("run.policies", "list is empty"));
        }
        for (i, p) in r.policies.iter().enumerate() {
            if r.policies[..i].contains(p) {
                return Err(Error::invalid("run.policies", format!("'{p}' listed twice")));
            }
        }
        if r.seeds.is_empty() {
            return Err(Error::invalid("run.seeds", "list is empty"));
        }
        if !(r.reward_scale > 0.0 && r.reward_scale.is_finite()) {
            return Err(Error::invalid("run.reward_scale", "must be positive"));
        }
        if r.window == 0 {
            return Err(Error::invalid("run.window", "must be at least 1"));
        }
        let core = |field: &str, res: dcrmab_core::Result<()>| {
            res.map_err(|e| Error::invalid(field, e.to_string()))
        };
        core("workload.generator", w.generator.validate())?;
        core("workload.cost", w.cost.validate())?;
        core("noise", self.noise.validate())?;
        core("policy.index", self.policy.index.validate())?;
        core("policy.prior", self.policy.prior.validate())?;
        core("policy.mix", self.policy.mix.validate())?;
        core("policy.exp4", self.policy.exp4.validate())?;
        Ok(())
    }
}

/// Parse a seed list such as `1,2,5` or `1-5`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::invalid("--seeds", format!("cannot parse '{spec}'"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
                if hi < lo {
                    return Err(bad());
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn with_line(err: Error, text: &str) -> Error {
    match err {
        Error::Invalid { field, message, line: None } => {
            let line = find_key_line(text, &field);
            Error::Invalid { field, message, line }
        }
        other => other,
    }
}

/// Line of `table.key` (or of `[table]` when only a table is named).
pub fn find_key_line(text: &str, dotted: &str) -> Option<usize> {
    let (table, key) = match dotted.rsplit_once('.') {
        Some((t, k)) => (t, k),
        None => ("", dotted),
    };
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = header.trim().to_string();
            if current == dotted {
                return Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let err = RunConfig::from_toml("[run]\nrounds = 10\nbudgett = 1\n").unwrap_err();
        match err {
            Error::Invalid { line, message, .. } => {
                assert_eq!(line, Some(3));
                assert!(message.contains("budgett"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn divisibility_error_names_the_field() {
        let err = RunConfig::from_toml("[workload]\nn_jobs_per_dc = 41\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("workload.n_jobs_per_dc"), "{msg}");
        assert!(msg.starts_with("line 2"), "{msg}");
    }

    #[test]
    fn budget_above_arms_fails() {
        let err = RunConfig::from_toml("[arms]\nn_dc = 2\n[run]\nbudget = 3\n").unwrap_err();
        assert!(err.to_string().contains("run.budget"));
    }

    #[test]
    fn seeds_lists() {
        assert_eq!(parse_seeds("1,2,5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_seeds("3-5, 9").unwrap(), vec![3, 4, 5, 9]);
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("5-3").is_err());
    }

    #[test]
    fn policies_parse_by_name() {
        let cfg = RunConfig::from_toml("[run]\npolicies = [\"oracle\", \"exp4\", \"global_ucb_tw\"]\n").unwrap();
        assert_eq!(cfg.run.policies, vec![PolicyKind::Oracle, PolicyKind::Exp4, PolicyKind::GlobalUcbTw]);
        assert!(RunConfig::from_toml("[run]\npolicies = [\"magic\"]\n").is_err());
    }

    #[test]
    fn nested_policy_tables() {
        let cfg = RunConfig::from_toml("[policy.mix]\nt_mix = 400.0\n[policy.index]\nbeta = 0.9\n").unwrap();
        assert_eq!(cfg.policy.mix.t_mix, 400.0);
        assert_eq!(cfg.policy.index.beta, 0.9);
        let err = RunConfig::from_toml("[policy.index]\nbeta = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("policy.index"));
    }
}

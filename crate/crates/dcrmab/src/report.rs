//! Comparison tables and plot-ready series built from run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dcrmab_core::policy::PolicyKind;
use serde::Deserialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output::{write_file, CONFIG_SNAPSHOT, REQUIRED, ROUNDS_CSV, SUMMARY_CSV, TIMING_CSV};

pub const REPORT_DIR: &str = "report";
pub const TABLE1: &str = "table1.txt";
pub const TABLE2: &str = "table2.txt";
pub const RUNNING_AVG_CSV: &str = "running_avg.csv";

#[derive(Debug, Deserialize)]
struct RoundRow {
    round: u64,
    policy: PolicyKind,
    seed: u64,
    cum_reward: f64,
    running_avg: f64,
    regret: f64,
}

#[derive(Debug, Deserialize)]
struct TimingRow {
    policy: PolicyKind,
    policy_time_s: f64,
}

/// One policy's numbers in one run directory, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub policy: PolicyKind,
    pub seeds: usize,
    pub avg_reward: f64,
    /// Mean over seeds of the per-seed ratio against the paired oracle.
    pub percent_of_oracle: f64,
    pub sim_time_s: f64,
    /// Seed-averaged running average by round.
    pub running_avg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Path relative to the report root; `.` for the root itself.
    pub name: String,
    pub label: String,
    /// Sorted by average reward, best first.
    pub rows: Vec<PolicyRow>,
}

/// Run directories under `root`: the root itself if it holds a run, else
/// its immediate subdirectories that do, in name order.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(SUMMARY_CSV).exists() || root.join(ROUNDS_CSV).exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() && path.file_name().is_some_and(|n| n != REPORT_DIR) {
            if REQUIRED.iter().any(|f| path.join(f).exists()) {
                dirs.push(path);
            }
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::MissingArtifacts(REQUIRED.iter().map(|f| root.join(f)).collect()));
    }
    Ok(dirs)
}

pub fn load_run(root: &Path, dir: &Path) -> Result<RunReport> {
    let missing: Vec<PathBuf> = REQUIRED.iter().map(|f| dir.join(f)).filter(|p| !p.exists()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let cfg = RunConfig::load(&dir.join(CONFIG_SNAPSHOT))?;

    let path = dir.join(ROUNDS_CSV);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    // (policy, seed) -> (rounds, final cum, final oracle cum, running avg series)
    let mut runs: BTreeMap<(PolicyKind, u64), (u64, f64, f64, Vec<f64>)> = BTreeMap::new();
    for row in rdr.deserialize::<RoundRow>() {
        let r = row.map_err(|e| Error::csv(&path, e))?;
        let entry = runs.entry((r.policy, r.seed)).or_insert((0, 0.0, 0.0, Vec::new()));
        entry.0 = entry.0.max(r.round);
        entry.1 = r.cum_reward;
        entry.2 = r.cum_reward + r.regret;
        entry.3.push(r.running_avg);
    }

    let path = dir.join(TIMING_CSV);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    let mut times: BTreeMap<PolicyKind, Vec<f64>> = BTreeMap::new();
    for row in rdr.deserialize::<TimingRow>() {
        let r = row.map_err(|e| Error::csv(&path, e))?;
        times.entry(r.policy).or_default().push(r.policy_time_s);
    }

    let mut by_policy: BTreeMap<PolicyKind, Vec<&(u64, f64, f64, Vec<f64>)>> = BTreeMap::new();
    for ((policy, _), v) in &runs {
        by_policy.entry(*policy).or_default().push(v);
    }
    let mut rows: Vec<PolicyRow> = by_policy
        .into_iter()
        .map(|(policy, seeds)| {
            let k = seeds.len() as f64;
            let avg_reward = seeds.iter().map(|s| s.1 / s.0.max(1) as f64).sum::<f64>() / k;
            let percent_of_oracle = seeds.iter().map(|s| percent(s.1, s.2)).sum::<f64>() / k;
            let len = seeds.iter().map(|s| s.3.len()).min().unwrap_or(0);
            let running_avg = (0..len).map(|t| seeds.iter().map(|s| s.3[t]).sum::<f64>() / k).collect();
            let t = times.get(&policy).map_or(0.0, |v| v.iter().sum::<f64>() / v.len() as f64);
            PolicyRow { policy, seeds: seeds.len(), avg_reward, percent_of_oracle, sim_time_s: t, running_avg }
        })
        .collect();
    rows.sort_by(|a, b| b.avg_reward.total_cmp(&a.avg_reward).then(a.policy.cmp(&b.policy)));

    let name = dir.strip_prefix(root).ok().map(|p| p.display().to_string()).filter(|s| !s.is_empty());
    Ok(RunReport { name: name.unwrap_or_else(|| ".".into()), label: config_label(&cfg), rows })
}

fn percent(cum: f64, oracle: f64) -> f64 {
    if oracle != 0.0 {
        100.0 * cum / oracle
    } else if cum == 0.0 {
        100.0
    } else {
        f64::INFINITY
    }
}

pub fn config_label(cfg: &RunConfig) -> String {
    format!(
        "{} of {} DCs, {} jobs, N_j={}, flip={}",
        cfg.run.budget, cfg.arms.n_dc, cfg.workload.n_jobs_per_dc, cfg.arms.batch_size, cfg.noise.p_state_flip
    )
}

/// Configurations as rows, policies as columns, cells in percent of oracle.
pub fn table1(reports: &[RunReport]) -> String {
    let mut policies: Vec<PolicyKind> = reports.iter().flat_map(|r| r.rows.iter().map(|p| p.policy)).collect();
    policies.sort();
    policies.dedup();
    let width = reports.iter().map(|r| r.name.len() + r.label.len() + 3).max().unwrap_or(0).max(13);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "configuration");
    for p in &policies {
        let _ = write!(out, " {:>14}", p.as_str());
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<width$}", format!("{} ({})", r.name, r.label));
        for p in &policies {
            match r.rows.iter().find(|row| row.policy == *p) {
                Some(row) => {
                    let _ = write!(out, " {:>13.2}%", row.percent_of_oracle);
                }
                None => {
                    let _ = write!(out, " {:>14}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// One ranking per run directory, best average reward first.
pub fn table2(reports: &[RunReport]) -> String {
    let mut out = String::new();
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{} ({})", r.name, r.label);
        let _ = writeln!(out, "{:>4}  {:<20} {:>14} {:>16} {:>18}", "rank", "policy", "avg reward", "cum/oracle (%)", "avg sim time (s)");
        for (k, row) in r.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>4}  {:<20} {:>14.4} {:>16.2} {:>18.3}",
                k + 1,
                row.policy.label(),
                row.avg_reward,
                row.percent_of_oracle,
                row.sim_time_s
            );
        }
    }
    out
}

pub fn running_avg_csv(reports: &[RunReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e| Error::csv(RUNNING_AVG_CSV, e);
    w.write_record(["run", "policy", "round", "running_avg"]).map_err(wrap)?;
    for r in reports {
        for row in &r.rows {
            for (t, v) in row.running_avg.iter().enumerate() {
                w.write_record([r.name.clone(), row.policy.to_string(), (t + 1).to_string(), v.to_string()])
                    .map_err(wrap)?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::io(RUNNING_AVG_CSV, e.into_error()))
}

/// Read every run under `root` and write the tables and series to
/// `root/report/`. Returns the loaded reports.
pub fn write_report(root: &Path) -> Result<Vec<RunReport>> {
    let reports = find_runs(root)?.iter().map(|d| load_run(root, d)).collect::<Result<Vec<_>>>()?;
    let dir = root.join(REPORT_DIR);
    write_file(&dir.join(TABLE1), table1(&reports).as_bytes())?;
    write_file(&dir.join(TABLE2), table2(&reports).as_bytes())?;
    write_file(&dir.join(RUNNING_AVG_CSV), &running_avg_csv(&reports)?)?;
    Ok(reports)
}

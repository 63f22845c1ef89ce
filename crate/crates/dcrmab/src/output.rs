//! Run artifacts. Everything except `timing.csv` and the timing fields of
//! `summary.json` is a pure function of config and seeds.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dcrmab_core::sim::Summary;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::runner::RunOutput;

pub const ROUNDS_CSV: &str = "rounds.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SERIES_CSV: &str = "series.csv";
pub const TIMING_CSV: &str = "timing.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

/// Files every run directory must contain for `report`.
pub const REQUIRED: [&str; 4] = [CONFIG_SNAPSHOT, ROUNDS_CSV, SUMMARY_CSV, TIMING_CSV];

/// Files compared by the determinism checks.
pub const DETERMINISTIC: [&str; 4] = [ROUNDS_CSV, SUMMARY_CSV, SERIES_CSV, CONFIG_SNAPSHOT];

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_bytes<F>(path: &Path, header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    fill(&mut w).map_err(|e| Error::csv(path, e))?;
    w.into_inner().map_err(|e| Error::io(path, e.into_error()))
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    policy: &'a str,
    runs: usize,
    rounds: u64,
    avg_reward: f64,
    cum_reward: f64,
    oracle_cum: f64,
    percent_of_oracle: f64,
    policy_time_s: f64,
}

/// Write every artifact of `out` into `dir`; returns the paths written.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>> {
    let summaries = out.summaries()?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &bytes)?;
        written.push(path);
        Ok(())
    };

    let p = dir.join(ROUNDS_CSV);
    put(
        ROUNDS_CSV,
        csv_bytes(&p, &["round", "policy", "seed", "reward", "cum_reward", "running_avg", "regret"], |w| {
            for run in &out.runs {
                for ep in &run.episodes {
                    for r in &ep.records {
                        w.write_record([
                            r.round.to_string(),
                            r.policy.to_string(),
                            r.seed.to_string(),
                            r.reward.to_string(),
                            r.cum_reward.to_string(),
                            r.running_avg.to_string(),
                            r.regret.to_string(),
                        ])?;
                    }
                }
            }
            Ok(())
        })?,
    )?;

    let p = dir.join(SUMMARY_CSV);
    put(SUMMARY_CSV, summary_csv(&p, &summaries)?)?;

    let p = dir.join(SERIES_CSV);
    put(SERIES_CSV, series_csv(&p, &summaries)?)?;

    let p = dir.join(TIMING_CSV);
    put(
        TIMING_CSV,
        csv_bytes(&p, &["policy", "seed", "policy_time_s", "us_per_round"], |w| {
            for run in &out.runs {
                for ep in &run.episodes {
                    w.write_record([
                        ep.trace.policy.to_string(),
                        run.seed.to_string(),
                        format!("{:.6}", ep.trace.policy_nanos as f64 * 1e-9),
                        format!("{:.3}", ep.trace.policy_nanos_per_round() * 1e-3),
                    ])?;
                }
            }
            Ok(())
        })?,
    )?;

    let json: Vec<SummaryJson> = summaries
        .iter()
        .map(|s| SummaryJson {
            policy: s.policy.as_str(),
            runs: s.runs,
            rounds: s.rounds,
            avg_reward: s.avg_reward,
            cum_reward: s.cum_reward,
            oracle_cum: s.oracle_cum,
            percent_of_oracle: s.percent_of_oracle,
            policy_time_s: s.wall_time_s,
        })
        .collect();
    let mut text = serde_json::to_vec_pretty(&json).expect("summary serializes");
    text.push(b'\n');
    put(SUMMARY_JSON, text)?;

    put(CONFIG_SNAPSHOT, out.config.to_toml().into_bytes())?;
    Ok(written)
}

pub fn summary_csv(path: &Path, summaries: &[Summary]) -> Result<Vec<u8>> {
    csv_bytes(
        path,
        &["policy", "runs", "rounds", "avg_reward", "cum_reward", "oracle_cum", "percent_of_oracle"],
        |w| {
            for s in summaries {
                w.write_record([
                    s.policy.to_string(),
                    s.runs.to_string(),
                    s.rounds.to_string(),
                    s.avg_reward.to_string(),
                    s.cum_reward.to_string(),
                    s.oracle_cum.to_string(),
                    format!("{:.4}", s.percent_of_oracle),
                ])?;
            }
            Ok(())
        },
    )
}

/// Seed-averaged running-average reward, one column per policy.
pub fn series_csv(path: &Path, summaries: &[Summary]) -> Result<Vec<u8>> {
    let mut header = vec!["round"];
    header.extend(summaries.iter().map(|s| s.policy.as_str()));
    let len = summaries.iter().map(|s| s.running_avg.len()).max().unwrap_or(0);
    csv_bytes(path, &header, |w| {
        for t in 0..len {
            let mut row = vec![(t + 1).to_string()];
            row.extend(summaries.iter().map(|s| s.running_avg.get(t).map_or(String::new(), f64::to_string)));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// Print a short per-policy table.
pub fn print_summaries<W: Write>(mut w: W, summaries: &[Summary]) -> std::io::Result<()> {
    writeln!(w, "{:<14} {:>12} {:>14} {:>10} {:>12}", "policy", "avg reward", "cum reward", "oracle %", "policy s")?;
    for s in summaries {
        writeln!(
            w,
            "{:<14} {:>12.4} {:>14.2} {:>9.2}% {:>12.3}",
            s.policy.as_str(),
            s.avg_reward,
            s.cum_reward,
            s.percent_of_oracle,
            s.wall_time_s
        )?;
    }
    Ok(())
}

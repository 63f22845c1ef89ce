use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::RoundRecord;
use crate::policy::PolicyKind;
use crate::{Error, Result};

/// Headline numbers of one run, or the mean over several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: PolicyKind,
    pub runs: usize,
    pub rounds: u64,
    pub avg_reward: f64,
    pub cum_reward: f64,
    pub oracle_cum: f64,
    pub percent_of_oracle: f64,
    /// Trailing mean of the per-round reward over `window` rounds (fewer at
    /// the start).
    pub running_avg: Vec<f64>,
    pub wall_time_s: f64,
}

/// Summarize one run. The running-average series uses a trailing window;
/// a window at least as long as the run gives the cumulative average.
pub fn summarize(records: &[RoundRecord], window: usize, wall_time_s: f64) -> Result<Summary> {
    let last = records.last().ok_or(Error::EmptyRecords)?;
    let window = window.max(1);
    let mut running_avg = Vec::with_capacity(records.len());
    let mut acc = 0.0;
    for (t, r) in records.iter().enumerate() {
        acc += r.reward;
        if t >= window {
            acc -= records[t - window].reward;
        }
        running_avg.push(acc / (t + 1).min(window) as f64);
    }
    let rounds = records.len() as u64;
    let percent_of_oracle = if last.oracle_cum != 0.0 {
        100.0 * last.cum_reward / last.oracle_cum
    } else if last.cum_reward == 0.0 {
        100.0
    } else {
        f64::INFINITY
    };
    Ok(Summary {
        policy: last.policy,
        runs: 1,
        rounds,
        avg_reward: last.cum_reward / rounds as f64,
        cum_reward: last.cum_reward,
        oracle_cum: last.oracle_cum,
        percent_of_oracle,
        running_avg,
        wall_time_s,
    })
}

impl Summary {
    /// Field-wise mean of runs of the same policy and length.
    pub fn mean(summaries: &[Summary]) -> Result<Summary> {
        let first = summaries.first().ok_or(Error::EmptyRecords)?;
        if summaries.iter().any(|s| s.policy != first.policy || s.running_avg.len() != first.running_avg.len()) {
            return Err(Error::shape("summaries differ in policy or length"));
        }
        let k = summaries.len() as f64;
        let avg = |f: fn(&Summary) -> f64| summaries.iter().map(f).sum::<f64>() / k;
        let running_avg = (0..first.running_avg.len())
            .map(|t| summaries.iter().map(|s| s.running_avg[t]).sum::<f64>() / k)
            .collect();
        Ok(Summary {
            policy: first.policy,
            runs: summaries.iter().map(|s| s.runs).sum(),
            rounds: first.rounds,
            avg_reward: avg(|s| s.avg_reward),
            cum_reward: avg(|s| s.cum_reward),
            oracle_cum: avg(|s| s.oracle_cum),
            percent_of_oracle: avg(|s| s.percent_of_oracle),
            running_avg,
            wall_time_s: avg(|s| s.wall_time_s),
        })
    }
}

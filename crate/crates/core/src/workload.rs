//! VM jobs, their power draw and QoS cost, and synthetic trace generation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Beta, Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Jobs below either threshold are dropped from traces.
pub const MIN_CORE_HOURS: f64 = 1.0;
pub const MIN_UTILIZATION: f64 = 0.10;

/// Piecewise-linear device power model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerModelParams {
    /// Watts drawn at or below `u_min`.
    pub p_static: f64,
    /// Watts drawn at or above `u_max`.
    pub p_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub cores_per_device: f64,
}

impl Default for PowerModelParams {
    fn default() -> Self {
        Self {
            p_static: 100.0,
            p_max: 400.0,
            u_min: 0.1,
            u_max: 0.9,
            cores_per_device: 15_000.0,
        }
    }
}

impl PowerModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_static > 0.0 && self.p_max > self.p_static) {
            return Err(Error::config(format!(
                "power model needs p_max > p_static > 0 (got p_static={}, p_max={})",
                self.p_static, self.p_max
            )));
        }
        if !(self.u_min >= 0.0 && self.u_max > self.u_min && self.u_max <= 1.0) {
            return Err(Error::config(format!(
                "power model needs 0 <= u_min < u_max <= 1 (got u_min={}, u_max={})",
                self.u_min, self.u_max
            )));
        }
        if !(self.cores_per_device > 0.0) {
            return Err(Error::config("cores_per_device must be positive"));
        }
        Ok(())
    }

    /// Whole-device power at the given utilization, in watts.
    pub fn device_power(&self, utilization: f64) -> f64 {
        let u_dyn = utilization.clamp(self.u_min, self.u_max) - self.u_min;
        self.p_static + (self.p_max - self.p_static) / (self.u_max - self.u_min) * u_dyn
    }
}

/// Per-core-hour QoS cost by job class. Batch jobs are never penalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QosParams {
    /// Dollars per core-hour of delay for interactive jobs.
    pub q_interactive: f64,
}

impl Default for QosParams {
    fn default() -> Self {
        Self { q_interactive: 5e-7 }
    }
}

impl QosParams {
    pub const Q_BATCH: f64 = 0.0;

    pub fn validate(&self) -> Result<()> {
        if !(self.q_interactive >= 0.0 && self.q_interactive.is_finite()) {
            return Err(Error::config("q_interactive must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn rate(&self, interactive: bool) -> f64 {
        if interactive {
            self.q_interactive
        } else {
            Self::Q_BATCH
        }
    }
}

/// Power and QoS models used to derive job attributes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    pub power: PowerModelParams,
    pub qos: QosParams,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        self.power.validate()?;
        self.qos.validate()
    }
}

/// One VM trace record with its derived power (W) and QoS cost ($).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmJob {
    pub id: String,
    pub core_hours: f64,
    pub utilization: f64,
    pub interactive: bool,
    pub power: f64,
    pub qos_cost: f64,
}

impl VmJob {
    pub fn new(
        id: impl Into<String>,
        core_hours: f64,
        utilization: f64,
        interactive: bool,
        model: &CostModel,
    ) -> Result<Self> {
        let mut job = VmJob {
            id: id.into(),
            core_hours,
            utilization,
            interactive,
            power: 0.0,
            qos_cost: 0.0,
        };
        job.power = job_power(&job, &model.power)?;
        job.qos_cost = job_qos_cost(&job, &model.qos);
        Ok(job)
    }

    pub fn passes_filter(&self) -> bool {
        passes_filter(self.core_hours, self.utilization)
    }
}

pub fn passes_filter(core_hours: f64, utilization: f64) -> bool {
    core_hours >= MIN_CORE_HOURS && utilization >= MIN_UTILIZATION
}

/// Job-level power: device power scaled by the job's share of a device's
/// cores over a one-hour batch.
pub fn job_power(job: &VmJob, params: &PowerModelParams) -> Result<f64> {
    params.validate()?;
    if !(job.core_hours >= 0.0) || !(0.0..=1.0).contains(&job.utilization) {
        return Err(Error::config(format!(
            "job {} has core_hours={} utilization={}",
            job.id, job.core_hours, job.utilization
        )));
    }
    Ok(params.device_power(job.utilization) * job.core_hours / params.cores_per_device)
}

pub fn job_qos_cost(job: &VmJob, params: &QosParams) -> f64 {
    params.rate(job.interactive) * job.core_hours
}

/// Distribution parameters for the synthetic trace generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorParams {
    /// Mean of ln(core-hours).
    pub core_hours_log_mean: f64,
    /// Standard deviation of ln(core-hours).
    pub core_hours_log_sd: f64,
    /// Upper truncation of core-hours; the lower bound is the filter threshold.
    pub core_hours_max: f64,
    pub util_alpha: f64,
    pub util_beta: f64,
    pub interactive_rate: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            core_hours_log_mean: 3.7,
            core_hours_log_sd: 1.4,
            core_hours_max: 2_000.0,
            util_alpha: 2.0,
            util_beta: 5.0,
            interactive_rate: 0.3,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.core_hours_log_sd > 0.0 && self.core_hours_log_mean.is_finite()) {
            return Err(Error::config("core_hours_log_sd must be positive"));
        }
        if !(self.core_hours_max > MIN_CORE_HOURS) {
            return Err(Error::config("core_hours_max must exceed the 1 core-hour filter"));
        }
        if !(self.util_alpha > 0.0 && self.util_beta > 0.0) {
            return Err(Error::config("utilization Beta parameters must be positive"));
        }
        if !(0.0..=1.0).contains(&self.interactive_rate) {
            return Err(Error::config("interactive_rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Draw `n_jobs` filtered jobs. Pure in `(n_jobs, seed, params, model)`.
///
/// Core-hours are log-normal truncated to `[1, core_hours_max]` and
/// utilization is Beta truncated to `[0.1, 1]`, both by rejection.
pub fn generate_workload(
    n_jobs: usize,
    seed: u64,
    params: &GeneratorParams,
    model: &CostModel,
) -> Result<Vec<VmJob>> {
    if n_jobs == 0 {
        return Err(Error::EmptyWorkload);
    }
    params.validate()?;
    model.validate()?;
    let hours = LogNormal::new(params.core_hours_log_mean, params.core_hours_log_sd)
        .map_err(|e| Error::config(format!("{e}")))?;
    let util = Beta::new(params.util_alpha, params.util_beta)
        .map_err(|e| Error::config(format!("{e}")))?;
    let mut rng = rng::stream(seed, Stream::Workload, &[]);

    let mut jobs = Vec::with_capacity(n_jobs);
    for i in 0..n_jobs {
        let core_hours = loop {
            let h = hours.sample(&mut rng);
            if (MIN_CORE_HOURS..=params.core_hours_max).contains(&h) {
                break h;
            }
        };
        let utilization = loop {
            let u: f64 = util.sample(&mut rng);
            if u >= MIN_UTILIZATION {
                break u;
            }
        };
        let interactive = rng.random::<f64>() < params.interactive_rate;
        jobs.push(VmJob::new(format!("vm{i:05}"), core_hours, utilization, interactive, model)?);
    }
    Ok(jobs)
}

/// Keep jobs passing the trace filter; returns the kept jobs and the drop count.
pub fn filter_jobs(jobs: Vec<VmJob>) -> (Vec<VmJob>, usize) {
    let before = jobs.len();
    let kept: Vec<_> = jobs.into_iter().filter(VmJob::passes_filter).collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

//! Named experiment setups.

use dcrmab_core::policy::PolicyKind;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sweep::SweepSpec;

pub const PRESETS: [&str; 7] =
    ["table1_n3", "table1_n5", "table1_n8", "table1_n10", "table2_ablation", "fig4_jobs_sweep", "fig5_noise_sweep"];

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub config: RunConfig,
    /// Set for presets that describe a sweep rather than a single run.
    pub sweep: Option<SweepSpec>,
}

const TABLE1_POLICIES: [PolicyKind; 4] = [PolicyKind::Oracle, PolicyKind::St, PolicyKind::Tw, PolicyKind::Tmtw];

fn table1(n_dc: usize, budget: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.arms.n_dc = n_dc;
    cfg.run.budget = budget;
    cfg.run.rounds = 600;
    cfg.run.policies = TABLE1_POLICIES.to_vec();
    cfg
}

pub fn preset(name: &str) -> Result<Preset> {
    let (name, config, sweep) = match name {
        "table1_n3" => ("table1_n3", table1(3, 1), None),
        "table1_n5" => ("table1_n5", table1(5, 2), None),
        "table1_n8" => ("table1_n8", table1(8, 3), None),
        "table1_n10" => ("table1_n10", table1(10, 4), None),
        "table2_ablation" => {
            let mut cfg = table1(5, 2);
            cfg.run.rounds = 1000;
            cfg.run.window = 1000;
            cfg.run.policies = vec![
                PolicyKind::Oracle,
                PolicyKind::Tmtw,
                PolicyKind::GlobalUcbTw,
                PolicyKind::LocalUcbTw,
                PolicyKind::Tw,
                PolicyKind::Exp4,
                PolicyKind::St,
            ];
            ("table2_ablation", cfg, None)
        }
        "fig4_jobs_sweep" => ("fig4_jobs_sweep", table1(3, 1), Some("n_jobs_per_dc=20,40,60,80,100")),
        "fig5_noise_sweep" => ("fig5_noise_sweep", table1(3, 1), Some("p_state_flip=0,0.1,0.2,0.3,0.4")),
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_string(),
                known: PRESETS.join(", "),
            })
        }
    };
    let sweep = sweep.map(|s| s.parse().expect("preset sweep specs parse"));
    Ok(Preset { name, config, sweep })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESETS {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            p.config.validate().unwrap();
            if let Some(s) = &p.sweep {
                for &v in &s.values {
                    s.apply(&p.config, v).unwrap();
                }
            }
        }
        assert!(matches!(preset("table3"), Err(Error::UnknownPreset { .. })));
    }
}

//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured numbers. Criteria listed in `KNOWN_RED` are reported but do not
//! fail the process unless `DCRMAB_ACCEPTANCE_STRICT=1` is set; see the
//! README for what they measure and why they are red.

use std::collections::BTreeMap;
use std::time::Instant;

use dcrmab::config::RunConfig;
use dcrmab::output::{write_run, DETERMINISTIC};
use dcrmab::presets::preset;
use dcrmab::runner::{self, RunOutput};
use dcrmab::{check, runner::JobSource};
use dcrmab_core::arm::{build_arm, ArmDynamics, Kick, Prices};
use dcrmab_core::kernel::Kernel;
use dcrmab_core::policy::{top_k, PolicyKind};
use dcrmab_core::reference::dense_scan_indices;
use dcrmab_core::rng::{self, derive_seed, Stream};
use dcrmab_core::sim::{build_policy, simulate_with_observer, NoClock};
use dcrmab_core::whittle::{compute_indices, evaluate_joint_policy, solve_joint_mdp, IndexConfig};
use dcrmab_core::workload::{generate_workload, CostModel, GeneratorParams};
use rand::Rng;

/// Criteria that fail on the synthetic workload.
const KNOWN_RED: [u32; 2] = [8, 11];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Seeds for criteria stated as a mean over at least five seeds.
const MEAN_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

/// Shared runs, computed once.
struct Cache {
    n3: RunOutput,
}

fn table1(name: &str, seeds: impl IntoIterator<Item = u64>) -> RunConfig {
    let mut cfg = preset(name).unwrap().config;
    cfg.run.seeds = seeds.into_iter().collect();
    cfg
}

fn mean_total(out: &RunOutput, kind: PolicyKind) -> f64 {
    let totals: Vec<f64> = out.runs.iter().map(|r| r.episode(kind).unwrap().trace.total_reward()).collect();
    totals.iter().sum::<f64>() / totals.len() as f64
}

fn random_arm(n: usize, seed: u64) -> ArmDynamics {
    let mut r = rng::stream(seed, Stream::Arm, &[n as u64]);
    let kernel = |r: &mut rng::StreamRng| {
        let rows = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 0.01).collect();
                let total: f64 = w.iter().sum();
                w.iter().map(|x| x / total).collect()
            })
            .collect();
        Kernel::from_rows(rows).unwrap()
    };
    let rewards = (0..n).map(|_| 3.0 * r.random::<f64>()).collect();
    let p1 = kernel(&mut r);
    let p0 = kernel(&mut r);
    ArmDynamics::new(rewards, p1, p0).unwrap()
}

fn c1_solver_vs_dense_scan() -> Outcome {
    let start = Instant::now();
    let cfg = IndexConfig::default();
    let mut worst: f64 = 0.0;
    let mut unresolved = 0;
    for k in 0..50u64 {
        let arm = random_arm(3 + (k % 4) as usize, 1_000 + k);
        let table = compute_indices(&arm, &cfg, true).unwrap();
        let scan = dense_scan_indices(&arm, cfg.beta, table.grid.min(), table.grid.max(), 1e-4);
        for (w, o) in table.indices.iter().zip(&scan) {
            match o {
                Some(o) => worst = worst.max((w - o).abs()),
                None => unresolved += 1,
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-3 && unresolved == 0 && secs < 30.0,
        format!("max |W - scan| = {worst:.2e} over 50 arms, {unresolved} unresolved, {secs:.1}s"),
    )
}

fn c2_closed_form() -> Outcome {
    let cfg = IndexConfig::default();
    let mut worst: f64 = 0.0;
    for n in 3..=6 {
        let kernels = [Kernel::cyclic_shift(n, 1), random_arm(n, 77).p_active.clone()];
        for p in kernels {
            for c in [0.0, 0.5, 2.5, 40.0] {
                let arm = ArmDynamics::new(vec![c; n], p.clone(), p.clone()).unwrap();
                let t = compute_indices(&arm, &cfg, false).unwrap();
                worst = worst.max(t.indices.iter().map(|w| (w - c).abs()).fold(0.0, f64::max));
            }
        }
    }
    outcome(worst <= 1e-6, format!("max |W - c| = {worst:.2e} (c in {{0, 0.5, 2.5, 40}}, P1 = P0)"))
}

fn c3_indexability() -> Outcome {
    let mut arms = 0;
    let mut bad = Vec::new();
    let mut configs: Vec<RunConfig> =
        ["table1_n3", "table1_n5", "table1_n8", "table1_n10"].iter().map(|n| preset(n).unwrap().config).collect();
    for jobs in [20, 60, 80, 100] {
        let mut cfg = preset("table1_n3").unwrap().config;
        cfg.workload.n_jobs_per_dc = jobs;
        configs.push(cfg);
    }
    for cfg in &configs {
        for c in check::check_config(cfg).unwrap() {
            arms += 1;
            if !c.indexable {
                bad.push(format!("seed {} arm {}: {}", c.seed, c.arm, c.violation.unwrap_or_default()));
            }
        }
    }
    outcome(bad.is_empty(), format!("{} of {arms} generated arms indexable {}", arms - bad.len(), bad.join("; ")))
}

fn c4_joint_optimum() -> Outcome {
    const EPISODES: usize = 4_000;
    const HORIZON: usize = 400;
    let index = IndexConfig::default();
    let mut ratios = Vec::new();
    let mut exact = Vec::new();
    for seed in 1..=5u64 {
        let arms: Vec<ArmDynamics> = (0..2)
            .map(|i| {
                let jobs = generate_workload(
                    12,
                    derive_seed(seed, Stream::Arm, &[i]),
                    &GeneratorParams::default(),
                    &CostModel::default(),
                )
                .unwrap();
                build_arm(i as usize, jobs, 4, 8, Prices::default(), Kick::default())
                    .unwrap()
                    .dynamics
                    .scaled(dcrmab::config::DEFAULT_REWARD_SCALE)
            })
            .collect();
        let tables: Vec<_> = arms.iter().map(|a| compute_indices(a, &index, false).unwrap()).collect();
        let whittle = |s: &[usize]| -> u64 {
            let scores: Vec<f64> = tables.iter().zip(s).map(|(t, &x)| t.index(x)).collect();
            top_k(&scores, 1).iter().fold(0, |m, &i| m | 1 << i)
        };
        let joint = solve_joint_mdp(&arms, 1, &index.vi()).unwrap();

        let mut total = 0.0;
        for e in 0..EPISODES {
            let mut r = rng::stream(seed, Stream::Step, &[e as u64]);
            let mut s: Vec<usize> = arms.iter().map(|a| r.random_range(0..a.n_states())).collect();
            let mut discount = 1.0;
            for _ in 0..HORIZON {
                let mask = whittle(&s);
                for (i, a) in arms.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        total += discount * a.rewards[s[i]];
                        s[i] = a.p_active.sample(s[i], &mut r);
                    } else {
                        s[i] = a.p_passive.sample(s[i], &mut r);
                    }
                }
                discount *= index.beta;
            }
        }
        let simulated = total / EPISODES as f64;
        ratios.push(simulated / joint.mean_value());
        let v = evaluate_joint_policy(&arms, &index.vi(), whittle).unwrap();
        exact.push(v.iter().sum::<f64>() / v.len() as f64 / joint.mean_value());
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{:.2}%", 100.0 * r)).collect::<Vec<_>>().join(" ");
    outcome(min >= 0.95, format!("simulated/optimum {} (exact evaluation {})", fmt(&ratios), fmt(&exact)))
}

fn c5_ordering(cache: &Cache) -> Outcome {
    let n5 = runner::run(&table1("table1_n5", MEAN_SEEDS)).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, out) in [("3:1", &cache.n3), ("5:2", &n5)] {
        let m = |k| mean_total(out, k);
        let (o, tm, tw, st) = (m(PolicyKind::Oracle), m(PolicyKind::Tmtw), m(PolicyKind::Tw), m(PolicyKind::St));
        let ok = o >= tm && tm > tw && tw >= st && tw >= 0.8 * o;
        pass &= ok;
        parts.push(format!(
            "{label}: TM-TW {:.2}% TW {:.2}% ST {:.2}%",
            100.0 * tm / o,
            100.0 * tw / o,
            100.0 * st / o
        ));
    }
    outcome(pass, format!("{} seeds; {}", MEAN_SEEDS.count(), parts.join("; ")))
}

fn c6_early_phase(cache: &Cache) -> Outcome {
    let mut wins = 0;
    let mut parts = Vec::new();
    for run in cache.n3.runs.iter().filter(|r| r.seed <= 5) {
        let at = |k| run.episode(k).unwrap().records[149].running_avg;
        let (tm, tw) = (at(PolicyKind::Tmtw), at(PolicyKind::Tw));
        wins += usize::from(tm > tw);
        parts.push(format!("{:+.3}", tm - tw));
    }
    outcome(wins >= 4, format!("TM-TW ahead at round 150 in {wins}/5 seeds (diff {})", parts.join(" ")))
}

fn c7_trust_collapse() -> Outcome {
    let cfg = table1("table1_n3", 1..=3);
    let jobs = JobSource::load(&cfg).unwrap();
    let t_mix = cfg.policy.mix.t_mix as u64;
    let mut compared = 0;
    let mut mismatches = 0;
    for &seed in &cfg.run.seeds {
        let env = runner::build_environment(&cfg, &jobs, seed).unwrap();
        let mut ec = runner::episode_config(&cfg, seed);
        ec.rounds = t_mix + 200;
        let mut tmtw = build_policy(PolicyKind::Tmtw, &env, &cfg.policy, seed).unwrap();
        let mut shadow = build_policy(PolicyKind::Tw, &env, &cfg.policy, seed).unwrap();
        simulate_with_observer(&env, tmtw.as_mut(), &ec, &NoClock, |obs, decision, fb| {
            let mut mine = shadow.select(obs, ec.budget).selected;
            shadow.update(fb);
            if obs.round > t_mix {
                let mut theirs = decision.selected.clone();
                mine.sort_unstable();
                theirs.sort_unstable();
                compared += 1;
                mismatches += usize::from(mine != theirs);
            }
        })
        .unwrap();
    }
    outcome(
        mismatches == 0 && compared == 600,
        format!("{mismatches} mismatches over {compared} post-horizon rounds (3 seeds x 200)"),
    )
}

fn c8_noise(cache: &Cache) -> Outcome {
    let kinds = [PolicyKind::Tmtw, PolicyKind::Tw, PolicyKind::St, PolicyKind::Oracle];
    let mut series: BTreeMap<PolicyKind, Vec<f64>> = BTreeMap::new();
    for flip in [0.0, 0.1, 0.2, 0.3, 0.4] {
        let out = if flip == 0.0 {
            None
        } else {
            let mut cfg = table1("table1_n3", MEAN_SEEDS);
            cfg.noise.p_state_flip = flip;
            Some(runner::run(&cfg).unwrap())
        };
        let out = out.as_ref().unwrap_or(&cache.n3);
        for k in kinds {
            series.entry(k).or_default().push(mean_total(out, k));
        }
    }
    let drop = |k| {
        let s = &series[&k];
        (s[0] - s[4]) / s[0]
    };
    let (tm, tw, st) = (drop(PolicyKind::Tmtw), drop(PolicyKind::Tw), drop(PolicyKind::St));
    let curve = |k| series[&k].iter().map(|v| format!("{:.0}", v)).collect::<Vec<_>>().join("/");
    outcome(
        tm < tw && tm < st,
        format!(
            "drop 0 -> 0.4: TM-TW {:.1}% TW {:.1}% ST {:.1}% (oracle {:.1}%); TM-TW {} TW {} ST {}",
            100.0 * tm,
            100.0 * tw,
            100.0 * st,
            100.0 * drop(PolicyKind::Oracle),
            curve(PolicyKind::Tmtw),
            curve(PolicyKind::Tw),
            curve(PolicyKind::St)
        ),
    )
}

fn c9_scaling() -> Outcome {
    let sizes = [20usize, 40, 60, 80, 100];
    let mut tw_us = Vec::new();
    let mut tm_us = Vec::new();
    let mut oracle_us = Vec::new();
    for &jobs in &sizes {
        let mut cfg = table1("table1_n3", [1]);
        cfg.workload.n_jobs_per_dc = jobs;
        cfg.run.rounds = 100;
        cfg.run.policies = vec![PolicyKind::Oracle, PolicyKind::Tw, PolicyKind::Tmtw];
        let mut best = [f64::INFINITY; 3];
        for _ in 0..3 {
            let out = runner::run(&cfg).unwrap();
            for (b, k) in best.iter_mut().zip(cfg.run.policies.iter()) {
                let us = out.runs[0].episode(*k).unwrap().trace.policy_nanos_per_round() * 1e-3;
                *b = b.min(us);
            }
        }
        oracle_us.push(best[0]);
        tw_us.push(best[1]);
        tm_us.push(best[2]);
    }
    let ns: Vec<f64> = sizes.iter().map(|&m| (m / 4) as f64).collect();
    let slope = |y: &[f64]| {
        let xs: Vec<f64> = ns.iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    };
    let (s_tw, s_tm) = (slope(&tw_us), slope(&tm_us));
    let oracle_ratio = oracle_us.iter().copied().fold(0.0, f64::max) / oracle_us[0];
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join("/");
    outcome(
        s_tw >= 1.5 && s_tm >= 1.5 && oracle_ratio <= 2.0,
        format!(
            "log-log slope TW {s_tw:.2} TM-TW {s_tm:.2}; us/round TW {} oracle {} (max/first {oracle_ratio:.2})",
            fmt(&tw_us),
            fmt(&oracle_us)
        ),
    )
}

fn c10_horizons(cache: &Cache) -> Outcome {
    let mut cfg = table1("table1_n3", MEAN_SEEDS);
    cfg.run.policies = vec![PolicyKind::Tmtw];
    cfg.policy.mix.t_mix *= 2.0;
    cfg.policy.mix.t_g *= 2.0;
    let doubled = mean_total(&runner::run(&cfg).unwrap(), PolicyKind::Tmtw);
    let base = mean_total(&cache.n3, PolicyKind::Tmtw);
    let change = (doubled - base).abs() / base;
    outcome(change <= 0.05, format!("TM-TW mean reward {base:.1} -> {doubled:.1} ({:.2}% change)", 100.0 * change))
}

fn c11_exp4() -> Outcome {
    let mut cfg = preset("table2_ablation").unwrap().config;
    cfg.run.policies = vec![PolicyKind::Tmtw, PolicyKind::Exp4];
    let out = runner::run(&cfg).unwrap();
    let mut wins = 0;
    let mut parts = Vec::new();
    for run in &out.runs {
        let (tm, ex) = (
            run.episode(PolicyKind::Tmtw).unwrap().trace.total_reward(),
            run.episode(PolicyKind::Exp4).unwrap().trace.total_reward(),
        );
        wins += usize::from(tm > ex);
        parts.push(format!("{:+.1}", tm - ex));
    }
    outcome(
        wins >= 4,
        format!("TM-TW beats EXP4 over {} rounds in {wins}/5 seeds (diff {})", cfg.run.rounds, parts.join(" ")),
    )
}

fn c12_determinism() -> Outcome {
    let cfg = preset("table1_n3").unwrap().config;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_run(d.path(), &runner::run(&cfg).unwrap()).unwrap();
    }
    let differing: Vec<&str> = DETERMINISTIC
        .iter()
        .copied()
        .filter(|f| std::fs::read(dirs[0].path().join(f)).unwrap() != std::fs::read(dirs[1].path().join(f)).unwrap())
        .collect();
    outcome(
        differing.is_empty(),
        format!("table1_n3 rerun: {} of {} result files identical", DETERMINISTIC.len() - differing.len(), DETERMINISTIC.len()),
    )
}

fn main() {
    let strict = std::env::var("DCRMAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let started = Instant::now();
    let cache = Cache { n3: runner::run(&table1("table1_n3", MEAN_SEEDS)).unwrap() };

    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "whittle solver matches dense subsidy scan", Box::new(c1_solver_vs_dense_scan)),
        (2, "closed-form indices with P1 = P0", Box::new(c2_closed_form)),
        (3, "generated arms are indexable", Box::new(c3_indexability)),
        (4, "oracle whittle within 95% of joint optimum", Box::new(c4_joint_optimum)),
        (5, "policy ordering oracle >= TM-TW > TW >= ST", Box::new(|| c5_ordering(&cache))),
        (6, "TM-TW ahead of TW at round 150", Box::new(|| c6_early_phase(&cache))),
        (7, "TM-TW reduces to TW after the mix horizon", Box::new(c7_trust_collapse)),
        (8, "TM-TW has the smallest noise-induced drop", Box::new(|| c8_noise(&cache))),
        (9, "TW cost superlinear in state count, oracle flat", Box::new(c9_scaling)),
        (10, "doubling mix horizons moves TM-TW by <= 5%", Box::new(|| c10_horizons(&cache))),
        (11, "TM-TW beats EXP4 over 1000 rounds", Box::new(c11_exp4)),
        (12, "reruns produce identical result files", Box::new(c12_determinism)),
    ];

    let mut hard_failures = 0;
    let mut failures = 0;
    for (id, name, run) in &criteria {
        let t = Instant::now();
        let o = run();
        let known = KNOWN_RED.contains(id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} [{id:>2}] {name}: {} ({:.1}s)", o.detail, t.elapsed().as_secs_f64());
        if !o.pass {
            failures += 1;
            if !known || strict {
                hard_failures += 1;
            }
        }
    }
    println!(
        "{} of {} criteria pass ({:.0}s)",
        criteria.len() - failures,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if hard_failures > 0 {
        std::process::exit(1);
    }
}

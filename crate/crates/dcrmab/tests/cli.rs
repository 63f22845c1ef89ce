use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const MINIMAL: &str = r#"
[arms]
n_dc = 3

[run]
budget = 1
rounds = 60
seeds = [1, 2]
policies = ["oracle", "st", "tw", "tmtw"]
"#;

fn dcrmab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcrmab")).args(args).env_remove("DCRMAB_OUT").output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(config: &Path, out: &Path) {
    let o = dcrmab(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn minimal_run_writes_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", MINIMAL);
    let out = tmp.path().join("out");
    run_ok(&cfg, &out);
    for f in ["rounds.csv", "summary.csv", "series.csv", "timing.csv", "summary.json", "config.toml"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let rounds = std::fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert!(rounds.starts_with("round,policy,seed,reward,cum_reward,running_avg,regret\n"));
    assert_eq!(rounds.lines().count(), 1 + 60 * 2 * 4);
}

#[test]
fn indivisible_jobs_fail_naming_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[workload]\nn_jobs_per_dc = 42\n\n[arms]\nbatch_size = 4\n");
    let o = dcrmab(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("workload.n_jobs_per_dc"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unknown_key_fails_with_its_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "typo.toml", "[run]\nrounds = 10\n\n[noise]\np_state_flp = 0.1\n");
    let o = dcrmab(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("p_state_flp") && err.contains("line 5"), "{err}");
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&cfg, &a);
    run_ok(&cfg, &b);
    for f in dcrmab::output::DETERMINISTIC {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn snapshot_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&cfg, &a);
    run_ok(&a.join("config.toml"), &b);
    for f in dcrmab::output::DETERMINISTIC {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn seeds_flag_overrides_the_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", MINIMAL);
    let out = tmp.path().join("o");
    let o = dcrmab(&["run", "--config", cfg.to_str().unwrap(), "--seeds", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rounds = std::fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert!(rounds.lines().skip(1).all(|l| l.split(',').nth(2) == Some("7")));
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "mini.toml", MINIMAL);
    let o = Command::new(env!("CARGO_BIN_EXE_dcrmab"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--seeds", "1"])
        .env("DCRMAB_OUT", tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("root/mini/rounds.csv").exists());
}

#[test]
fn check_index_default_and_degenerate_kick() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[run]\nseeds = [1, 2, 3]\n");
    let o = dcrmab(&["check-index", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = stdout(&o);
    assert!(first.contains("9 of 9 arms indexable"), "{first}");
    let again = dcrmab(&["check-index", "--config", cfg.to_str().unwrap()]);
    assert_eq!(stdout(&again), first);

    let cfg = write_config(tmp.path(), "d.toml", "[arms]\nkick = [[1, 1.0]]\n[run]\nseeds = [4]\n");
    let o = dcrmab(&["check-index", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).contains("3 of 3 arms indexable"), "{}", stdout(&o));
}

#[test]
fn report_single_oracle_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "o.toml", "[run]\nrounds = 40\nseeds = [1]\npolicies = [\"oracle\"]\n");
    let out = tmp.path().join("o");
    run_ok(&cfg, &out);
    let o = dcrmab(&["report", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table2 = std::fs::read_to_string(out.join("report/table2.txt")).unwrap();
    let rows: Vec<&str> = table2.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].contains("Oracle Whittle") && rows[0].contains("100.00"), "{table2}");
}

#[test]
fn report_ranks_by_average_reward_and_is_idempotent() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "r.toml", "[run]\nrounds = 80\nseeds = [1, 2]\npolicies = [\"tw\", \"st\", \"tmtw\"]\n");
    let out = tmp.path().join("r");
    run_ok(&cfg, &out);
    let reports = dcrmab::report::write_report(&out).unwrap();
    let rows = &reports[0].rows;
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].avg_reward >= w[1].avg_reward));

    let read = |f: &str| std::fs::read(out.join("report").join(f)).unwrap();
    let before = [read("table1.txt"), read("table2.txt"), read("running_avg.csv")];
    dcrmab::report::write_report(&out).unwrap();
    assert_eq!(before, [read("table1.txt"), read("table2.txt"), read("running_avg.csv")]);
}

#[test]
fn report_lists_missing_artifacts() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("partial");
    std::fs::create_dir_all(&run).unwrap();
    std::fs::write(run.join("summary.csv"), "policy\n").unwrap();
    let o = dcrmab(&["report", run.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    for f in ["config.toml", "rounds.csv", "timing.csv"] {
        assert!(err.contains(f), "{err}");
    }
    assert!(!err.contains("summary.csv"), "{err}");
}

#[test]
fn jobs_sweep_has_one_row_per_point_and_policy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "[run]\nrounds = 20\nseeds = [1]\npolicies = [\"oracle\", \"st\", \"tw\"]\n",
    );
    let out = tmp.path().join("s");
    let o = dcrmab(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--spec",
        "n_jobs_per_dc=20,40,60,80,100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 5 * 3);
    for v in [20, 40, 60, 80, 100] {
        assert!(out.join(format!("n_jobs_per_dc={v}/rounds.csv")).exists());
    }
    let o = dcrmab(&["report", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table1 = std::fs::read_to_string(out.join("report/table1.txt")).unwrap();
    assert_eq!(table1.lines().count(), 1 + 5);
}

#[test]
fn oracle_reward_falls_with_noise() {
    let base = dcrmab::presets::preset("fig5_noise_sweep").unwrap();
    let mut cfg = base.config;
    cfg.run.policies = vec![dcrmab_core::policy::PolicyKind::Oracle];
    cfg.run.seeds = (1..=5).collect();
    let points = dcrmab::sweep::run_sweep(&cfg, base.sweep.as_ref().unwrap()).unwrap();
    let rewards: Vec<f64> = points.iter().map(|p| p.summaries[0].avg_reward).collect();
    assert_eq!(rewards.len(), 5);
    for w in rewards.windows(2) {
        assert!(w[1] <= w[0] * 1.02, "{rewards:?}");
    }
    assert!(rewards[4] < rewards[0]);
}

#[test]
fn generate_then_ingest() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("trace.csv");
    let o = dcrmab(&["generate-workload", "--n-jobs", "120", "--seed", "3", "--out", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = write_config(
        tmp.path(),
        "i.toml",
        "[workload]\nsource = \"ingest\"\npath = \"trace.csv\"\n[run]\nrounds = 30\nseeds = [1, 2]\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&cfg, &a);
    run_ok(&cfg, &b);
    assert_eq!(std::fs::read(a.join("rounds.csv")).unwrap(), std::fs::read(b.join("rounds.csv")).unwrap());

    let short = write_config(
        tmp.path(),
        "short.toml",
        "[workload]\nsource = \"ingest\"\npath = \"trace.csv\"\n[arms]\nn_dc = 4\n",
    );
    let o = dcrmab(&["run", "--config", short.to_str().unwrap(), "--out", tmp.path().join("c").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("120 usable jobs"), "{}", stderr(&o));
}

#[test]
fn presets_and_unknown_preset() {
    let o = dcrmab(&["run", "--preset", "table9"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("table1_n3"), "{}", stderr(&o));
    let o = dcrmab(&["sweep", "--preset", "table1_n3"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--spec"));
}

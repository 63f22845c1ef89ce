use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcrmab::config::{parse_seeds, RunConfig};
use dcrmab::error::Result;
use dcrmab::output::write_file;
use dcrmab::presets::preset;
use dcrmab::sweep::SweepSpec;
use dcrmab::{check, output, report, runner, sweep, trace};
use dcrmab_core::workload::generate_workload;

#[derive(Parser)]
#[command(name = "dcrmab", version, about = "Restless-bandit demand-response simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment, e.g. table1_n3 or fig5_noise_sweep.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override the seed list, e.g. `1-5` or `1,2,7`.
    #[arg(long, value_name = "LIST")]
    seeds: Option<String>,
}

#[derive(Args)]
struct OutDir {
    /// Output directory. Defaults to `$DCRMAB_OUT/<name>`, or `results/<name>`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured policy on every seed.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run a one-dimensional sweep, one run directory per grid point.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        out: OutDir,
        /// `dimension=v1,v2,...` over n_jobs_per_dc, p_state_flip, t_mix, t_g
        /// or n_dc_budget (pairs like `3:1`). Presets supply their own.
        #[arg(long, value_name = "SPEC")]
        spec: Option<String>,
    },
    /// Check indexability of the ground-truth arms.
    CheckIndex {
        #[command(flatten)]
        source: Source,
        /// Also write the report as JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Build comparison tables from a results directory.
    Report {
        /// A run directory or a directory of run directories.
        dir: PathBuf,
    },
    /// Write a synthetic trace file.
    GenerateWorkload {
        #[arg(long, default_value_t = 1000)]
        n_jobs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Generator and cost parameters come from this config's [workload] table.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Output file; stdout if absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

struct Loaded {
    name: String,
    config: RunConfig,
    sweep: Option<SweepSpec>,
}

fn load(source: &Source) -> Result<Loaded> {
    let mut loaded = match (&source.config, &source.preset) {
        (Some(path), _) => Loaded {
            name: path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned()),
            config: RunConfig::load(path)?,
            sweep: None,
        },
        (None, Some(name)) => {
            let p = preset(name)?;
            Loaded { name: p.name.to_string(), config: p.config, sweep: p.sweep }
        }
        (None, None) => Loaded { name: "default".into(), config: RunConfig::default(), sweep: None },
    };
    if let Some(list) = &source.seeds {
        loaded.config.run.seeds = parse_seeds(list)?;
    }
    loaded.config.validate()?;
    Ok(loaded)
}

fn out_dir(out: &OutDir, loaded: &Loaded) -> PathBuf {
    if let Some(dir) = &out.out {
        return dir.clone();
    }
    if let Some(dir) = &loaded.config.output.dir {
        return dir.clone();
    }
    let root = std::env::var_os("DCRMAB_OUT").map_or_else(|| PathBuf::from("results"), PathBuf::from);
    root.join(&loaded.name)
}

// stdout may be a closed pipe (`| head`); drop write errors instead of panicking.
macro_rules! say {
    ($($t:tt)*) => {{ writeln!(std::io::stdout().lock(), $($t)*).ok(); }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{ write!(std::io::stdout().lock(), $($t)*).ok(); }};
}

fn list(paths: &[PathBuf], root: &Path) {
    for p in paths {
        say!("  {}", p.strip_prefix(root).unwrap_or(p).display());
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { source, out } => {
            let loaded = load(&source)?;
            let dir = out_dir(&out, &loaded);
            let result = runner::run(&loaded.config)?;
            let written = output::write_run(&dir, &result)?;
            output::print_summaries(std::io::stdout().lock(), &result.summaries()?).ok();
            say!("wrote {}", dir.display());
            list(&written, &dir);
        }
        Command::Sweep { source, out, spec } => {
            let loaded = load(&source)?;
            let spec = match (spec, &loaded.sweep) {
                (Some(s), _) => s.parse()?,
                (None, Some(s)) => s.clone(),
                (None, None) => {
                    return Err(dcrmab::Error::invalid("--spec", "required unless the preset defines a sweep"))
                }
            };
            let dir = out_dir(&out, &loaded);
            let points = sweep::run_sweep(&loaded.config, &spec)?;
            sweep::write_sweep(&dir, &spec, &points)?;
            for p in &points {
                say!("{}={}", spec.dim.as_str(), p.value);
                output::print_summaries(std::io::stdout().lock(), &p.summaries).ok();
            }
            say!("wrote {}", dir.display());
        }
        Command::CheckIndex { source, json } => {
            let loaded = load(&source)?;
            let checks = check::check_config(&loaded.config)?;
            say_raw!("{}", check::render(&checks));
            if let Some(path) = json {
                let mut text = serde_json::to_vec_pretty(&checks).expect("report serializes");
                text.push(b'\n');
                write_file(&path, &text)?;
            }
        }
        Command::Report { dir } => {
            let reports = report::write_report(&dir)?;
            say_raw!("{}\n{}", report::table1(&reports), report::table2(&reports));
            say!("wrote {}", dir.join(report::REPORT_DIR).display());
        }
        Command::GenerateWorkload { n_jobs, seed, config, out } => {
            let cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let jobs = generate_workload(n_jobs, seed, &cfg.workload.generator, &cfg.workload.cost)?;
            let mut buf = Vec::new();
            trace::write_trace(&mut buf, &jobs)?;
            match out {
                Some(path) => write_file(&path, &buf)?,
                None => std::io::stdout().lock().write_all(&buf).map_err(|e| dcrmab::Error::Io { path: "<stdout>".into(), source: e })?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

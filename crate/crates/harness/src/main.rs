use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sgda_core::hardness::{build_minmax, stationary_witness};

use sgda_harness::certify::{certify, FospMode};
use sgda_harness::config::ExperimentConfig;
use sgda_harness::experiment::{problem_for, run_experiment, run_trial, summary_file, RunOptions};
use sgda_harness::kernel_check::kernel_check;
use sgda_harness::output::{read_matrix, read_summary, write_file};
use sgda_harness::plot::render_svg;
use sgda_harness::{dimacs, HarnessError, Result};

#[derive(Parser)]
#[command(name = "sgda", version, about = "Train one-layer generators with SGDA and check the results")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (key = value with [sections]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Record elapsed milliseconds in the wall_ms column.
    #[arg(long, global = true)]
    wall_clock: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of the config and write trajectories and a summary.
    Train,
    /// Like `train`, and also render the summary plot.
    Sweep,
    /// Certify stationarity and recovery of a trained generator.
    Certify {
        /// Generator matrix as CSV rows; trains the selected trial if absent.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Decide stationary-point existence for the min-max form of a 3-CNF.
    Hardness {
        /// DIMACS CNF file.
        cnf: PathBuf,
    },
    /// Compare Hermite kernels with Monte Carlo estimates.
    KernelCheck,
    /// Render a summary CSV as SVG.
    Plot {
        /// Summary CSV (default: <out>/summary.csv).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    let common = &cli.common;
    let cfg = load_config(common)?;
    let opts = RunOptions { threads: common.threads, wall_clock: common.wall_clock, write_trials: true };
    match cli.command {
        Command::Train | Command::Sweep => {
            let summary = run_experiment(&cfg, opts)?;
            let mut out = json!({
                "summary": summary_file(&cfg.out_dir),
                "cells": summary.rows.len(),
                "trials": summary.trials.len(),
                "failures": summary.failures.len(),
            });
            if matches!(cli.command, Command::Sweep) {
                let svg = cfg.out_dir.join("plot.svg");
                write_file(&svg, &render_svg(&summary.rows))?;
                out["plot"] = json!(svg);
            }
            Ok(out)
        }
        Command::Certify { matrix, d, n, trial } => {
            let d = d.unwrap_or(cfg.dims[0]);
            let n = n.unwrap_or(cfg.n_grid[0]);
            let problem = problem_for(&cfg, d, n, trial);
            let a = match matrix {
                Some(p) => read_matrix(&p)?,
                None => run_trial(&cfg, &problem, d, n, trial, false)?.trajectory.final_a,
            };
            let mode = if cfg.train.project { FospMode::Constrained } else { FospMode::Unconstrained };
            let report = certify(&a, &problem.truth, &cfg.activation, cfg.degree, mode, cfg.seed)?;
            let value = serde_json::to_value(&report).expect("report serializes");
            ensure_dir(&cfg.out_dir)?;
            let path = cfg.out_dir.join("certificate.json");
            write_file(&path, &format!("{}\n", serde_json::to_string_pretty(&value).expect("json")))?;
            Ok(value)
        }
        Command::Hardness { cnf } => {
            let sat = dimacs::read_dimacs(&cnf)?;
            let form = build_minmax(&sat);
            let witness = stationary_witness(&form)?;
            Ok(json!({
                "vars": sat.num_vars(),
                "clauses": sat.clauses().len(),
                "stationary_exists": witness.is_some(),
                "witness": witness,
            }))
        }
        Command::KernelCheck => {
            let rows = with_pool(common.threads, || kernel_check(&cfg.kernel_check, cfg.degree, cfg.seed))??;
            ensure_dir(&cfg.out_dir)?;
            let path = cfg.out_dir.join("kernel_check.json");
            write_file(&path, &format!("{}\n", serde_json::to_string_pretty(&rows).expect("json")))?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                return Err(HarnessError::Config(format!("{failed} of {} kernel cells outside tolerance; see {}", rows.len(), path.display())));
            }
            Ok(json!({ "cells": rows.len(), "failed": 0, "report": path }))
        }
        Command::Plot { summary } => {
            let src = summary.unwrap_or_else(|| summary_file(&cfg.out_dir));
            let rows = read_summary(&src)?;
            let dst = src.with_extension("svg");
            write_file(&dst, &render_svg(&rows))?;
            Ok(json!({ "plot": dst }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": e.to_string().trim() } }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use kpp_front::artifacts::{self, write_csv, Manifest};
use kpp_front::cell::{construct_global_solution, solve_terminal_value, CellNumerics};
use kpp_front::config::{ExperimentConfig, ExperimentKind, NumericsConfig, ReactionConfig};
use kpp_front::experiment::{global_csv, global_summary, levelsets_json, run_experiment, run_sweep};
use kpp_front::logistic::solve_profile_default;
use kpp_front::profiles::make_algebraic;
use kpp_front::spectral::{eigenpair_at_one, eigenpair_at_zero};
use kpp_front::KppError;

#[derive(Parser)]
#[command(name = "kpp", version, about = "Accelerating Fisher-KPP fronts")]
struct Cli {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "KPP_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReactionName {
    Fisher,
    PeriodicFisher,
}

#[derive(Clone, Copy, ValueEnum)]
enum State {
    Zero,
    One,
}

#[derive(Args)]
struct ReactionArgs {
    /// Overrides the config reaction; Fisher when neither is given.
    #[arg(long, value_enum)]
    reaction: Option<ReactionName>,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    period: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the line problem and store snapshots.
    Simulate,
    /// Level-set positions of a stored run.
    Levelsets {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        t: f64,
        /// Use window averages of this width.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Logistic profile level time and predicted position.
    Logistic {
        #[command(flatten)]
        reaction: ReactionArgs,
        #[arg(long)]
        m: f64,
        #[arg(long = "T")]
        horizon: f64,
        /// Algebraic tail exponent for the predicted position.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Principal periodic eigenpair of the linearization.
    Eigen {
        #[command(flatten)]
        reaction: ReactionArgs,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, value_enum, default_value = "zero")]
        at: State,
        /// Also write node values to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Terminal start level B(m, T).
    Bmt {
        #[command(flatten)]
        reaction: ReactionArgs,
        #[arg(long)]
        m: f64,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Entire-in-time solution through the cell means.
    Globalsol {
        #[command(flatten)]
        reaction: ReactionArgs,
        #[arg(long, default_value_t = 1e8)]
        n: f64,
        #[arg(long, default_value_t = 15.0)]
        t_max: f64,
    },
    /// Run a verification experiment.
    Verify {
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Run the config's sweep in parallel.
    Sweep,
}

fn load_config(path: Option<&Path>) -> Result<Option<ExperimentConfig>> {
    path.map(|p| ExperimentConfig::load(p).map_err(anyhow::Error::from))
        .transpose()
}

fn numerics(cfg: Option<&ExperimentConfig>) -> NumericsConfig {
    cfg.map(|c| c.numerics.clone()).unwrap_or_default()
}

fn cell_numerics(cfg: Option<&ExperimentConfig>) -> CellNumerics {
    numerics(cfg).cell()
}

fn reaction(args: &ReactionArgs, cfg: Option<&ExperimentConfig>) -> Result<kpp_front::reaction::Nonlinearity> {
    let rc = match (args.reaction, cfg) {
        (Some(ReactionName::Fisher), _) => ReactionConfig::Fisher,
        (Some(ReactionName::PeriodicFisher), _) => ReactionConfig::PeriodicFisher {
            amplitude: args.amplitude,
            period: args.period,
        },
        (None, Some(c)) => return Ok(c.build_reaction()?),
        (None, None) => ReactionConfig::Fisher,
    };
    Ok(rc.build(Path::new("."))?)
}

fn require_config(cli: &Cli) -> Result<ExperimentConfig> {
    match load_config(cli.config.as_deref())? {
        Some(c) => Ok(c),
        None => Err(KppError::Config("this subcommand needs --config".into()).into()),
    }
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>, fallback: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.as_ref().map(|o| c.base_dir.join(o))))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

/// Returns whether verification passed; errors map to exit codes in `main`.
fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Simulate => {
            let mut cfg = require_config(cli)?;
            cfg.experiment = ExperimentKind::Simulate;
            let dir = out_dir(cli, Some(&cfg), "run");
            let outcome = run_experiment(&cfg, &dir)?;
            if !cli.quiet {
                eprintln!("wrote {} files to {}", outcome.files.len() + 1, dir.display());
                print_json(&outcome.summary);
            }
            Ok(true)
        }
        Command::Levelsets { run, m, t, window } => {
            let loaded = artifacts::load_run(run)?;
            print_json(&levelsets_json(&loaded, *m, *t, *window)?);
            Ok(true)
        }
        Command::Logistic {
            reaction: r,
            m,
            horizon,
            alpha,
        } => {
            let cfg = load_config(cli.config.as_deref())?;
            let f = reaction(r, cfg.as_ref())?;
            let profile = solve_profile_default(&f)?;
            let tm = profile.level_time(*m)?;
            let u0 = match (alpha, cfg.as_ref().and_then(|c| c.initial_data.as_ref())) {
                (Some(a), _) => Some(make_algebraic(*a, 1.0)?),
                (None, Some(p)) => Some(p.build(&cfg.as_ref().unwrap().base_dir)?),
                (None, None) => None,
            };
            let position = match &u0 {
                Some(u0) => Some(profile.predict_level_position(u0, *m, *horizon)?),
                None => None,
            };
            print_json(&json!({
                "m": m,
                "T": horizon,
                "T_m": tm,
                "phi_at_start": profile.eval(tm - horizon),
                "predicted_position": position,
            }));
            Ok(true)
        }
        Command::Eigen {
            reaction: r,
            n,
            at,
            csv,
        } => {
            let cfg = load_config(cli.config.as_deref())?;
            let f = reaction(r, cfg.as_ref())?;
            let pair = match at {
                State::Zero => eigenpair_at_zero(&f, *n)?,
                State::One => eigenpair_at_one(&f, *n)?,
            };
            if let Some(path) = csv {
                let h = f.period() / pair.len() as f64;
                let rows: Vec<Vec<f64>> = pair
                    .eigenfunction
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| vec![i as f64 * h, v])
                    .collect();
                write_csv(path, &artifacts::columns(&["x", "psi"]), &rows)?;
            }
            print_json(&json!({
                "eigenvalue": pair.eigenvalue,
                "integral_of_psi": pair.integral(),
                "nodes": pair.len(),
                "residual": pair.residual(),
            }));
            Ok(true)
        }
        Command::Bmt {
            reaction: r,
            m,
            horizon,
            tol,
        } => {
            let cfg = load_config(cli.config.as_deref())?;
            let f = reaction(r, cfg.as_ref())?;
            let res = solve_terminal_value(&f, *m, *horizon, *tol, &cell_numerics(cfg.as_ref()))?;
            print_json(&json!({"B": res.b, "iterations": res.iterations, "terminal_mean": res.terminal_mean}));
            Ok(true)
        }
        Command::Globalsol { reaction: r, n, t_max } => {
            let cfg = load_config(cli.config.as_deref())?;
            let f = reaction(r, cfg.as_ref())?;
            let g = construct_global_solution(&f, *n, *t_max, &cell_numerics(cfg.as_ref()))?;
            let dir = out_dir(cli, None, "globalsol");
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut files = Vec::new();
            global_csv(&g, &dir, &mut files)?;
            let summary = global_summary(&g);
            let mut manifest = Manifest::new("globalsol", json!({"reaction": f.name(), "n": n, "t_max": t_max}));
            manifest.run = Some(summary.clone());
            manifest.write(&dir, &files)?;
            print_json(&summary);
            Ok(true)
        }
        Command::Verify { experiment } => {
            let mut cfg = require_config(cli)?;
            if let Some(name) = experiment {
                cfg.experiment = serde_json::from_value(json!(name))
                    .map_err(|_| KppError::Config(format!("unknown experiment '{name}'")))?;
            }
            if matches!(cfg.experiment, ExperimentKind::Simulate | ExperimentKind::Globalsol) {
                bail!(KppError::Config(format!(
                    "'{}' is not a verification experiment",
                    cfg.experiment.name()
                )));
            }
            let dir = out_dir(cli, Some(&cfg), cfg.experiment.name());
            let outcome = run_experiment(&cfg, &dir)?;
            if let Some(report) = &outcome.report {
                if !cli.quiet {
                    print!("{}", report.summary());
                }
                print_json(&serde_json::to_value(report)?);
            }
            Ok(outcome.passed())
        }
        Command::Sweep => {
            let cfg = require_config(cli)?;
            let dir = out_dir(cli, Some(&cfg), "sweep");
            let outcomes = run_sweep(&cfg, &dir)?;
            for o in &outcomes {
                if !cli.quiet {
                    println!("{} {}", if o.passed() { "PASS" } else { "FAIL" }, o.out_dir.display());
                }
            }
            Ok(outcomes.iter().all(|o| o.passed()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<KppError>() {
                Some(KppError::Config(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

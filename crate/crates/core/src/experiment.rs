//! End-to-end experiments: plan, simulate, extract, verify, and write artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::artifacts::{self, columns, write_csv, Manifest};
use crate::cell::{construct_global_solution, GlobalSolution};
use crate::config::{ExperimentConfig, ExperimentKind, ProfileConfig, ReactionConfig, SweepParameter};
use crate::error::{KppError, Result};
use crate::frontsim::{extract_level_set, plan_domain, simulate_front, window_averages, FrontGrid, FrontRun};
use crate::logistic::{solve_profile_default, LogisticProfile};
use crate::plot::{plot_svg, PlotStyle, Series};
use crate::profiles::InitialData;
use crate::reaction::Nonlinearity;
use crate::spectral::eigenpair_at_zero;
use crate::verify::{
    fit_decay_rate, flatness_discrepancy, verify_bmt_rate, verify_flatness, verify_homogeneous_levelsets,
    verify_mean_levelsets, verify_ratio_limit, verify_spreading_law, MeanCheckOptions, VerificationReport,
};

pub const REPORT_FILE: &str = "report.json";
/// Terminal-mean tolerance for ratio sequences, tight enough that the
/// bisection floor stays below the deviations being compared.
pub const RATIO_MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub experiment: String,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub report: Option<VerificationReport>,
    /// Headline numbers, also stored in the manifest.
    pub summary: Value,
}

impl ExperimentOutcome {
    /// Experiments without a verification step pass by construction.
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_none_or(|r| r.pass)
    }
}

/// Principal growth rate at 0: `f'(0)` for homogeneous reactions, the
/// eigenvalue otherwise.
pub fn growth_rate(f: &Nonlinearity, eigen_nodes: usize) -> Result<f64> {
    if f.is_homogeneous() {
        Ok(f.du_at_zero(0.0))
    } else {
        Ok(eigenpair_at_zero(f, eigen_nodes)?.eigenvalue)
    }
}

/// Grid from the config override or from [`plan_domain`].
pub fn front_grid(cfg: &ExperimentConfig, f: &Nonlinearity, u0: &InitialData, horizon: f64) -> Result<FrontGrid> {
    let n = &cfg.numerics;
    let dx = n.dx_for(f);
    match n.x_right {
        Some(x_right) => FrontGrid::new(n.x_left, x_right, dx),
        None => {
            let m_min = cfg.levels.iter().copied().fold(0.5, f64::min);
            plan_domain(u0, growth_rate(f, n.eigen_nodes)?, horizon, m_min, &n.plan(f))
        }
    }
}

fn simulate(cfg: &ExperimentConfig, f: &Nonlinearity, u0: &InitialData, horizon: f64) -> Result<FrontRun> {
    let grid = front_grid(cfg, f, u0, horizon)?;
    simulate_front(f, u0, horizon, &grid, &cfg.numerics.front())
}

fn global(cfg: &ExperimentConfig, f: &Nonlinearity) -> Result<GlobalSolution> {
    construct_global_solution(
        f,
        cfg.numerics.global_n,
        cfg.numerics.global_t_max,
        &cfg.numerics.cell(),
    )
}

fn write_svg(dir: &Path, name: &str, series: &[Series], style: &PlotStyle, files: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), plot_svg(series, style)?)?;
    files.push(name.to_string());
    Ok(())
}

fn write_report(dir: &Path, report: &VerificationReport, files: &mut Vec<String>) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| KppError::Io(e.to_string()))?;
    fs::write(dir.join(REPORT_FILE), text + "\n")?;
    files.push(REPORT_FILE.to_string());
    Ok(())
}

fn merge(theorem: &str, parts: Vec<VerificationReport>) -> VerificationReport {
    let mut out = parts[0].clone();
    out.theorem = theorem.to_string();
    for p in parts.into_iter().skip(1) {
        out.checks.extend(p.checks);
        out.parameters.extend(p.parameters);
        for h in p.provenance {
            if !out.provenance.contains(&h) {
                out.provenance.push(h);
            }
        }
    }
    let any_pass = out.checks.iter().any(|c| c.verdict == crate::verify::Verdict::Pass);
    let any_fail = out.checks.iter().any(|c| c.verdict == crate::verify::Verdict::Fail);
    out.pass = any_pass && !any_fail;
    out
}

/// Snapshot profiles at five times, clipped to where anything happens.
fn front_plot(run: &FrontRun, dir: &Path, files: &mut Vec<String>) -> Result<()> {
    let last = run.times.len() - 1;
    let picks: Vec<usize> = (0..5).map(|k| k * last / 4).collect();
    let reach = picks
        .iter()
        .filter_map(|&k| run.snapshots[k].iter().rposition(|&v| v > 1e-3))
        .max()
        .unwrap_or(run.nodes() - 1);
    let end = (reach + (reach / 4).max(8)).min(run.nodes() - 1);
    let step = (end / 2000).max(1);
    let series: Vec<Series> = picks
        .iter()
        .map(|&k| {
            let pts = (0..=end)
                .step_by(step)
                .map(|i| (run.grid.x(i), run.snapshots[k][i]))
                .collect();
            Series::line(&format!("t = {:.2}", run.times[k]), pts)
        })
        .collect();
    let style = PlotStyle {
        title: "front profiles".into(),
        x_label: "x".into(),
        y_label: "u".into(),
        ..Default::default()
    };
    write_svg(dir, "fronts.svg", &series, &style, files)
}

/// Rightmost level-set positions at every snapshot, with the logistic
/// prediction when the reaction is homogeneous.
fn levelset_artifacts(
    run: &FrontRun,
    levels: &[f64],
    profile: Option<&LogisticProfile>,
    dir: &Path,
    files: &mut Vec<String>,
) -> Result<()> {
    let mut rows = Vec::new();
    let mut measured: Vec<Vec<(f64, f64)>> = vec![Vec::new(); levels.len()];
    let mut predicted: Vec<Vec<(f64, f64)>> = vec![Vec::new(); levels.len()];
    for &t in run.times.iter().filter(|&&t| t > 0.0) {
        let mut row = vec![t];
        for (j, &m) in levels.iter().enumerate() {
            let x = extract_level_set(run, m, t)?.rightmost();
            row.push(x.unwrap_or(f64::NAN));
            if let Some(x) = x.filter(|&x| x > 0.0) {
                measured[j].push((t, x));
            }
            if let Some(p) = profile {
                if let Ok(x) = p.predict_level_position(&run.initial_data, m, t) {
                    if x > 0.0 {
                        predicted[j].push((t, x));
                    }
                }
            }
        }
        rows.push(row);
    }
    let mut cols = vec!["t".to_string()];
    cols.extend(levels.iter().map(|m| format!("x_m{m}")));
    write_csv(&dir.join("levelsets.csv"), &cols, &rows)?;
    files.push("levelsets.csv".into());
    let mut series = Vec::new();
    for (j, &m) in levels.iter().enumerate() {
        if !measured[j].is_empty() {
            series.push(Series::markers(
                &format!("measured m = {m}"),
                std::mem::take(&mut measured[j]),
            ));
        }
        if !predicted[j].is_empty() {
            series.push(Series::line(
                &format!("predicted m = {m}"),
                std::mem::take(&mut predicted[j]),
            ));
        }
    }
    if !series.is_empty() {
        let style = PlotStyle {
            title: "rightmost level-set position".into(),
            x_label: "t".into(),
            y_label: "x".into(),
            log_y: true,
            ..Default::default()
        };
        write_svg(dir, "levelsets.svg", &series, &style, files)?;
    }
    Ok(())
}

fn run_record(cfg: &ExperimentConfig, run: &FrontRun) -> Result<Value> {
    let profile = cfg
        .initial_data
        .as_ref()
        .ok_or_else(|| KppError::Config("missing [initial_data]".into()))?;
    serde_json::to_value(artifacts::run_record(run, &cfg.reaction, profile)).map_err(|e| KppError::Io(e.to_string()))
}

/// Writes `globalsol.csv` with columns `t, mean, min, max`.
pub fn global_csv(g: &GlobalSolution, dir: &Path, files: &mut Vec<String>) -> Result<()> {
    let rows: Vec<Vec<f64>> = g
        .times
        .iter()
        .zip(&g.snapshots)
        .zip(&g.means)
        .map(|((t, s), m)| {
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            vec![*t, *m, lo, hi]
        })
        .collect();
    write_csv(
        &dir.join("globalsol.csv"),
        &columns(&["t", "mean", "min", "max"]),
        &rows,
    )?;
    files.push("globalsol.csv".into());
    Ok(())
}

pub fn global_summary(g: &GlobalSolution) -> Value {
    json!({
        "alpha": g.alpha,
        "omega": g.omega,
        "f0": g.f0,
        "f1": g.f1,
        "n": g.n_start,
        "t_min": g.t_min(),
        "t_max": g.t_max(),
    })
}

/// Runs one experiment into `out_dir` and writes its manifest last.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let f = cfg.build_reaction()?;
    let mut files: Vec<String> = Vec::new();
    let mut report: Option<VerificationReport> = None;
    let mut run_value: Option<Value> = None;
    let summary: Value;
    match cfg.experiment {
        ExperimentKind::Simulate => {
            let u0 = cfg.build_profile()?;
            let horizon = cfg.horizon.unwrap_or_default();
            let run = simulate(cfg, &f, &u0, horizon)?;
            files.extend(artifacts::write_run_files(&run, out_dir)?);
            front_plot(&run, out_dir, &mut files)?;
            let profile = if f.is_homogeneous() {
                Some(solve_profile_default(&f)?)
            } else {
                None
            };
            levelset_artifacts(&run, &cfg.levels, profile.as_ref(), out_dir, &mut files)?;
            run_value = Some(run_record(cfg, &run)?);
            summary = json!({"nodes": run.nodes(), "snapshots": run.times.len(), "taint": run.taint});
        }
        ExperimentKind::HomLevelsets => {
            if !f.is_homogeneous() {
                return Err(KppError::Config("hom_levelsets needs a homogeneous reaction".into()));
            }
            let u0 = cfg.build_profile()?;
            let horizon = cfg.horizon.unwrap_or_default();
            let run = simulate(cfg, &f, &u0, horizon)?;
            let profile = solve_profile_default(&f)?;
            let brackets = verify_homogeneous_levelsets(&run, &profile, &cfg.levels, horizon, cfg.eps)?;
            let ratios = verify_spreading_law(&run, &cfg.levels, horizon, cfg.tolerance.unwrap_or(0.15))?;
            let merged = merge("homogeneous-levelsets", vec![brackets, ratios]);
            front_plot(&run, out_dir, &mut files)?;
            levelset_artifacts(&run, &cfg.levels, Some(&profile), out_dir, &mut files)?;
            write_report(out_dir, &merged, &mut files)?;
            run_value = Some(run_record(cfg, &run)?);
            summary = json!({"pass": merged.pass, "taint": run.taint, "x_right": run.grid.x_right});
            report = Some(merged);
        }
        ExperimentKind::MeanLevelsets => {
            let u0 = cfg.build_profile()?;
            let horizon = cfg.horizon.unwrap_or_default();
            let run = simulate(cfg, &f, &u0, horizon)?;
            let g = global(cfg, &f)?;
            let opts = MeanCheckOptions {
                cell: cfg.numerics.cell(),
                mean_tol: cfg.numerics.mean_tol,
                ..Default::default()
            };
            let r = verify_mean_levelsets(&run, &g, &cfg.levels, horizon, cfg.eps, &opts)?;
            let k = run.snapshot_index(horizon)?;
            let avg = window_averages(&run.snapshots[k], run.grid.x_left, run.grid.dx, f.period())?;
            let rows: Vec<Vec<f64>> = avg.iter().enumerate().map(|(i, a)| vec![run.grid.x(i), *a]).collect();
            write_csv(&out_dir.join("window_average.csv"), &columns(&["x", "average"]), &rows)?;
            files.push("window_average.csv".into());
            front_plot(&run, out_dir, &mut files)?;
            global_csv(&g, out_dir, &mut files)?;
            write_report(out_dir, &r, &mut files)?;
            run_value = Some(run_record(cfg, &run)?);
            summary = json!({"pass": r.pass, "global": global_summary(&g)});
            report = Some(r);
        }
        ExperimentKind::Flatness => {
            let u0 = cfg.build_profile()?;
            let t1 = cfg.horizons[0];
            let t2 = *cfg.horizons.last().unwrap();
            let run = simulate(cfg, &f, &u0, t2)?;
            let g = global(cfg, &f)?;
            let period = f.period();
            let cells = cfg.cells.unwrap_or((
                (u0.tail_start() / period).ceil() as i64,
                (run.grid.x_right / period).floor() as i64 - 1,
            ));
            let r = verify_flatness(&run, &g, (t1, t2), cells, cfg.tolerance.unwrap_or(0.05))?;
            let mut rows = Vec::new();
            for &t in &cfg.horizons {
                let scan = flatness_discrepancy(&run, &g, t, cells)?;
                rows.push(vec![t, scan.max_discrepancy, scan.worst_cell.unwrap_or(0) as f64]);
            }
            write_csv(
                &out_dir.join("flatness.csv"),
                &columns(&["T", "max_discrepancy", "worst_cell"]),
                &rows,
            )?;
            files.push("flatness.csv".into());
            front_plot(&run, out_dir, &mut files)?;
            write_report(out_dir, &r, &mut files)?;
            run_value = Some(run_record(cfg, &run)?);
            summary = json!({"pass": r.pass, "discrepancy": rows});
            report = Some(r);
        }
        ExperimentKind::BmtRate => {
            let m = cfg.levels[0];
            let (r, samples) = verify_bmt_rate(
                &f,
                m,
                &cfg.horizons,
                &cfg.numerics.cell(),
                cfg.numerics.eigen_nodes,
                cfg.tolerance.unwrap_or(0.02),
            )?;
            let rate = fit_decay_rate(&samples)?;
            let rows: Vec<Vec<f64>> = samples.iter().map(|&(t, b)| vec![t, b]).collect();
            write_csv(&out_dir.join("bmt.csv"), &columns(&["T", "B"]), &rows)?;
            files.push("bmt.csv".into());
            // fitted line through the centroid of the samples
            let n = samples.len() as f64;
            let mt = samples.iter().map(|s| s.0).sum::<f64>() / n;
            let ml = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
            let fitted: Vec<(f64, f64)> = samples
                .iter()
                .map(|&(t, _)| (t, (ml - rate * (t - mt)).exp()))
                .collect();
            let style = PlotStyle {
                title: format!("B(m = {m}, T) with fitted rate {rate:.4}"),
                x_label: "T".into(),
                y_label: "B".into(),
                log_y: true,
                ..Default::default()
            };
            write_svg(
                out_dir,
                "bmt.svg",
                &[Series::markers("B(m,T)", samples.clone()), Series::line("fit", fitted)],
                &style,
                &mut files,
            )?;
            write_report(out_dir, &r, &mut files)?;
            summary = json!({"pass": r.pass, "rate": rate, "samples": rows});
            report = Some(r);
        }
        ExperimentKind::RatioLimit => {
            let m = cfg.levels[0];
            let g = global(cfg, &f)?;
            let (r, ratios) = verify_ratio_limit(
                &f,
                &g,
                m,
                &cfg.horizons,
                &cfg.numerics.cell(),
                RATIO_MEAN_TOL,
                cfg.tolerance.unwrap_or(0.05),
            )?;
            let rows: Vec<Vec<f64>> = ratios.iter().map(|&(t, q)| vec![t, q]).collect();
            write_csv(&out_dir.join("ratios.csv"), &columns(&["T", "ratio"]), &rows)?;
            files.push("ratios.csv".into());
            write_report(out_dir, &r, &mut files)?;
            summary = json!({"pass": r.pass, "ratios": rows, "global": global_summary(&g)});
            report = Some(r);
        }
        ExperimentKind::Globalsol => {
            let g = global(cfg, &f)?;
            global_csv(&g, out_dir, &mut files)?;
            let pts: Vec<(f64, f64)> = g
                .times
                .iter()
                .zip(&g.means)
                .map(|(&t, &m)| (t, m))
                .step_by(10)
                .collect();
            let style = PlotStyle {
                title: "spatial mean of the global solution".into(),
                x_label: "t".into(),
                y_label: "mean".into(),
                log_y: true,
                ..Default::default()
            };
            write_svg(
                out_dir,
                "globalsol.svg",
                &[Series::line("mean", pts)],
                &style,
                &mut files,
            )?;
            summary = global_summary(&g);
        }
    }

    let config_value = serde_json::to_value(cfg).map_err(|e| KppError::Io(e.to_string()))?;
    let mut manifest = Manifest::new(cfg.experiment.name(), config_value);
    manifest.run = Some(json!({"record": run_value, "summary": summary}));
    if let Some(run) = run_value.clone() {
        // load_run reads the record directly
        manifest.run = Some(run);
        let path = out_dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n")?;
        files.push("summary.json".into());
    }
    manifest.pass = report.as_ref().map(|r| r.pass);
    manifest.write(out_dir, &files)?;
    Ok(ExperimentOutcome {
        experiment: cfg.experiment.name().to_string(),
        out_dir: out_dir.to_path_buf(),
        files,
        report,
        summary,
    })
}

fn label(value: f64) -> String {
    format!("{value}").replace('.', "p")
}

/// Applies one sweep value to a copy of the config.
pub fn apply_sweep(cfg: &ExperimentConfig, parameter: SweepParameter, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    c.sweep = None;
    match parameter {
        SweepParameter::Horizon => {
            c.horizon = Some(value);
        }
        SweepParameter::Alpha => match &mut c.initial_data {
            Some(ProfileConfig::Algebraic { alpha, .. }) | Some(ProfileConfig::LogAlgebraic { alpha, .. }) => {
                *alpha = value
            }
            _ => {
                return Err(KppError::Config(
                    "alpha sweep needs an algebraic initial profile".into(),
                ))
            }
        },
        SweepParameter::Amplitude => match &mut c.reaction {
            ReactionConfig::PeriodicFisher { amplitude, .. } => *amplitude = value,
            _ => {
                return Err(KppError::Config(
                    "amplitude sweep needs a periodic_fisher reaction".into(),
                ))
            }
        },
    }
    c.validate()?;
    Ok(c)
}

/// Runs every sweep point concurrently, each in its own subdirectory, then
/// writes one top-level manifest.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ExperimentOutcome>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| KppError::Config("config has no [sweep] table".into()))?;
    let name = match sweep.parameter {
        SweepParameter::Alpha => "alpha",
        SweepParameter::Horizon => "horizon",
        SweepParameter::Amplitude => "amplitude",
    };
    let configs = sweep
        .values
        .iter()
        .map(|&v| Ok((format!("{name}_{}", label(v)), apply_sweep(cfg, sweep.parameter, v)?)))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out_dir)?;
    let outcomes = configs
        .par_iter()
        .map(|(sub, c)| run_experiment(c, &out_dir.join(sub)))
        .collect::<Result<Vec<_>>>()?;
    let mut files = Vec::new();
    for (sub, _) in &configs {
        files.push(format!("{sub}/{}", artifacts::MANIFEST_FILE));
    }
    let mut manifest = Manifest::new(
        "sweep",
        serde_json::to_value(cfg).map_err(|e| KppError::Io(e.to_string()))?,
    );
    manifest.run = Some(json!(outcomes
        .iter()
        .zip(&configs)
        .map(|(o, (sub, _))| json!({"dir": sub, "pass": o.passed(), "summary": o.summary}))
        .collect::<Vec<_>>()));
    manifest.pass = Some(outcomes.iter().all(ExperimentOutcome::passed));
    manifest.write(out_dir, &files)?;
    Ok(outcomes)
}

/// Level-set positions at one snapshot of a saved run, as JSON.
pub fn levelsets_json(run: &FrontRun, m: f64, t: f64, window: Option<f64>) -> Result<Value> {
    let k = run.snapshot_index(t)?;
    let crossings = match window {
        Some(l) => crate::frontsim::extract_average_level_set(run, m, t, l)?,
        None => extract_level_set(run, m, t)?,
    };
    Ok(json!({
        "m": m,
        "t": run.times[k],
        "window": window,
        "all": crossings.is_all(),
        "positions": crossings.points(),
        "rightmost": crossings.rightmost(),
    }))
}

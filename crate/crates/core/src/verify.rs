//! Finite-horizon checks of the asymptotic front laws against simulations.
//!
//! The laws are limit statements. Each check here fixes explicit margins and
//! reports what it measured next to what it predicted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cell::{ratio_limit_check, terminal_start_level, terminal_start_levels, CellNumerics, GlobalSolution};
use crate::error::{out_of_range, KppError, Result};
use crate::frontsim::{extract_average_level_set, extract_level_set, window_averages, FrontRun};
use crate::logistic::LogisticProfile;
use crate::profiles::inverse_tail;
use crate::reaction::Nonlinearity;
use crate::spectral::eigenpair_at_zero;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The horizon is too short for the law to make a claim.
    PreAsymptotic,
    /// Evaluated exactly at the predicted point, where the law is silent.
    AtBoundary,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationCheck {
    pub label: String,
    pub predicted: Option<f64>,
    pub measured: Option<f64>,
    /// Bracket `[lo, hi]` for containment checks.
    pub bracket: Option<(f64, f64)>,
    /// Relative tolerance for ratio checks, absolute slack otherwise.
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
    pub note: String,
}

impl VerificationCheck {
    fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            predicted: None,
            measured: None,
            bracket: None,
            tolerance: None,
            verdict: Verdict::Skipped,
            note: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem: String,
    pub parameters: BTreeMap<String, Value>,
    pub checks: Vec<VerificationCheck>,
    /// True iff at least one check passed and none failed.
    pub pass: bool,
    /// Content hashes of the runs the report was computed from.
    pub provenance: Vec<String>,
}

impl VerificationReport {
    fn new(theorem: &str) -> Self {
        Self {
            theorem: theorem.to_string(),
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            pass: false,
            provenance: Vec::new(),
        }
    }

    fn param(&mut self, key: &str, value: Value) {
        self.parameters.insert(key.to_string(), value);
    }

    fn finish(mut self) -> Self {
        let any_pass = self.checks.iter().any(|c| c.verdict == Verdict::Pass);
        let any_fail = self.checks.iter().any(|c| c.verdict == Verdict::Fail);
        self.pass = any_pass && !any_fail;
        self
    }

    pub fn check(&self, label: &str) -> Option<&VerificationCheck> {
        self.checks.iter().find(|c| c.label == label)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = format!("{}: {}\n", self.theorem, if self.pass { "PASS" } else { "FAIL" });
        for c in &self.checks {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
            let bracket = c
                .bracket
                .map_or(String::new(), |(a, b)| format!(" in [{a:.4}, {b:.4}]"));
            out.push_str(&format!(
                "  {:<28} {:?} predicted {} measured {}{}{}\n",
                c.label,
                c.verdict,
                fmt(c.predicted),
                fmt(c.measured),
                bracket,
                if c.note.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", c.note)
                }
            ));
        }
        out
    }
}

fn check_margin_levels(m: f64, eps: f64) -> Result<()> {
    if !(m > 0.0 && m < 1.0) {
        return Err(out_of_range("m", m, "(0, 1)"));
    }
    if !(eps > 0.0 && m - eps > 0.0 && m + eps < 1.0) {
        return Err(out_of_range("eps", eps, format!("(0, min(m, 1-m)) for m = {m}")));
    }
    Ok(())
}

fn contains(bracket: (f64, f64), xs: &[f64]) -> bool {
    !xs.is_empty() && xs.iter().all(|&x| x >= bracket.0 && x <= bracket.1)
}

/// Containment of every level crossing in the logistic bracket
/// `[u0^{-1}(phi(T_{m+eps} - T)), u0^{-1}(phi(T_{m-eps} - T))]`.
pub fn verify_homogeneous_levelsets(
    run: &FrontRun,
    profile: &LogisticProfile,
    m_list: &[f64],
    horizon: f64,
    eps: f64,
) -> Result<VerificationReport> {
    run.require_clean(horizon)?;
    let u0 = &run.initial_data;
    let mut report = VerificationReport::new("homogeneous-levelsets");
    report.param("T", json!(horizon));
    report.param("eps", json!(eps));
    report.param("m", json!(m_list));
    report.param("reaction", json!(run.reaction.name()));
    report.provenance.push(run.content_hash());
    for &m in m_list {
        check_margin_levels(m, eps)?;
        let mut check = VerificationCheck::new(format!("bracket m={m}"));
        check.tolerance = Some(eps);
        let crossings = extract_level_set(run, m, horizon)?;
        check.measured = crossings.rightmost();
        check.predicted = profile.predict_level_position(u0, m, horizon).ok();
        let lo = inverse_tail(u0, profile.eval(profile.level_time(m + eps)? - horizon));
        let hi = inverse_tail(u0, profile.eval(profile.level_time(m - eps)? - horizon));
        match (lo, hi) {
            _ if horizon < 1.0 => {
                check.verdict = Verdict::PreAsymptotic;
                check.note = "front not yet formed".into();
            }
            (Ok(lo), Ok(hi)) => {
                check.bracket = Some((lo, hi));
                check.verdict = if contains((lo, hi), crossings.points()) {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
                if crossings.points().is_empty() {
                    check.note = "no crossing".into();
                }
            }
            _ => {
                check.verdict = Verdict::PreAsymptotic;
                check.note = "bracket level above the invertible tail".into();
            }
        }
        report.checks.push(check);
    }
    Ok(report.finish())
}

/// Ratio check of the rightmost crossing against `u0^{-1}(m/(1-m) e^{-f'(0) T})`.
pub fn verify_spreading_law(
    run: &FrontRun,
    m_list: &[f64],
    horizon: f64,
    tolerance: f64,
) -> Result<VerificationReport> {
    run.require_clean(horizon)?;
    if !run.reaction.is_homogeneous() {
        return Err(KppError::InvalidParameter(
            "the spreading law needs a homogeneous reaction".into(),
        ));
    }
    let u0 = &run.initial_data;
    let f0 = run.reaction.du_at_zero(0.0);
    let mut report = VerificationReport::new("spreading-law");
    report.param("T", json!(horizon));
    report.param("m", json!(m_list));
    report.param("tolerance", json!(tolerance));
    report.provenance.push(run.content_hash());
    for &m in m_list {
        if !(m > 0.0 && m < 1.0) {
            return Err(out_of_range("m", m, "(0, 1)"));
        }
        let mut check = VerificationCheck::new(format!("ratio m={m}"));
        check.tolerance = Some(tolerance);
        check.measured = extract_level_set(run, m, horizon)?.rightmost();
        match inverse_tail(u0, m / (1.0 - m) * (-f0 * horizon).exp()) {
            Ok(p) => {
                check.predicted = Some(p);
                check.verdict = match check.measured {
                    Some(x) if (x / p - 1.0).abs() <= tolerance => Verdict::Pass,
                    _ => Verdict::Fail,
                };
                if let Some(x) = check.measured {
                    check.note = format!("ratio {:.4}", x / p);
                }
            }
            Err(_) => {
                check.verdict = Verdict::PreAsymptotic;
                check.note = "predicted level above the invertible tail".into();
            }
        }
        report.checks.push(check);
    }
    Ok(report.finish())
}

/// Settings for [`verify_mean_levelsets`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCheckOptions {
    /// Margin `r T` around the predicted point.
    pub margin_rate: f64,
    pub cell: CellNumerics,
    pub mean_tol: f64,
}

impl Default for MeanCheckOptions {
    fn default() -> Self {
        Self {
            margin_rate: 2.0,
            cell: CellNumerics::default(),
            mean_tol: crate::cell::DEFAULT_MEAN_TOL,
        }
    }
}

/// Window-average bounds on either side of `u0^{-1}(B(m,T)) ± r T`, plus
/// containment of the rightmost average crossing in the bracket built from
/// the mean-crossing times of `global`.
pub fn verify_mean_levelsets(
    run: &FrontRun,
    global: &GlobalSolution,
    m_list: &[f64],
    horizon: f64,
    eps: f64,
    opts: &MeanCheckOptions,
) -> Result<VerificationReport> {
    run.require_clean(horizon)?;
    let u0 = &run.initial_data;
    let period = run.reaction.period();
    let k = run.snapshot_index(horizon)?;
    let averages = window_averages(&run.snapshots[k], run.grid.x_left, run.grid.dx, period)?;
    let margin = opts.margin_rate * horizon;
    let mut report = VerificationReport::new("mean-levelsets");
    report.param("T", json!(horizon));
    report.param("eps", json!(eps));
    report.param("m", json!(m_list));
    report.param("margin", json!(margin));
    report.param("L", json!(period));
    report.param("reaction", json!(run.reaction.name()));
    report.provenance.push(run.content_hash());
    for &m in m_list {
        check_margin_levels(m, eps)?;
        let b = terminal_start_level(&run.reaction, m, horizon, opts.mean_tol, &opts.cell)?;
        let position = inverse_tail(u0, b);
        let mut upper = VerificationCheck::new(format!("upper bound m={m}"));
        let mut lower = VerificationCheck::new(format!("lower bound m={m}"));
        upper.tolerance = Some(eps);
        lower.tolerance = Some(eps);
        match position {
            Err(_) => {
                for c in [&mut upper, &mut lower] {
                    c.verdict = Verdict::PreAsymptotic;
                    c.note = format!("B(m,T) = {b:e} above the invertible tail");
                }
            }
            Ok(x_star) => {
                upper.predicted = Some(x_star);
                lower.predicted = Some(x_star);
                let at = |i: usize| run.grid.x(i);
                let right: Vec<f64> = (0..averages.len())
                    .filter(|&i| at(i) >= x_star + margin)
                    .map(|i| averages[i])
                    .collect();
                let left: Vec<f64> = (0..averages.len())
                    .filter(|&i| at(i) <= x_star - margin)
                    .map(|i| averages[i])
                    .collect();
                let worst_right = right.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let worst_left = left.iter().copied().fold(f64::INFINITY, f64::min);
                upper.measured = (!right.is_empty()).then_some(worst_right);
                lower.measured = (!left.is_empty()).then_some(worst_left);
                if margin == 0.0 {
                    for c in [&mut upper, &mut lower] {
                        c.verdict = Verdict::AtBoundary;
                        c.note = "zero margin: no claim at the predicted point".into();
                    }
                } else {
                    upper.verdict = if right.is_empty() || worst_right <= m + eps {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    };
                    lower.verdict = if left.is_empty() || worst_left >= m - eps {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    };
                    if right.is_empty() {
                        upper.note = "no window inside the domain (vacuous)".into();
                    }
                    if left.is_empty() {
                        lower.note = "no window inside the domain (vacuous)".into();
                    }
                }
            }
        }
        report.checks.push(upper);
        report.checks.push(lower);

        let mut bracket = VerificationCheck::new(format!("mean bracket m={m}"));
        bracket.tolerance = Some(eps);
        let crossings = extract_average_level_set(run, m, horizon, period)?;
        bracket.measured = crossings.rightmost();
        bracket.predicted = position.ok();
        let level = |level: f64| -> Result<f64> {
            let t = global.mean_crossing_time(level)?;
            Ok(global.mean_at(t - horizon))
        };
        let ends = (
            level(m + eps).and_then(|v| inverse_tail(u0, v)),
            level(m - eps).and_then(|v| inverse_tail(u0, v)),
        );
        match ends {
            _ if horizon < 1.0 => {
                bracket.verdict = Verdict::PreAsymptotic;
                bracket.note = "front not yet formed".into();
            }
            (Ok(lo), Ok(hi)) => {
                bracket.bracket = Some((lo, hi));
                bracket.verdict = if contains((lo, hi), &crossings.rightmost().into_iter().collect::<Vec<_>>()) {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
            }
            _ => {
                bracket.verdict = Verdict::PreAsymptotic;
                bracket.note = "bracket level outside the invertible tail or the global solution".into();
            }
        }
        report.checks.push(bracket);
    }
    Ok(report.finish())
}

/// Cell-wise flatness discrepancy at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessScan {
    pub horizon: f64,
    pub max_discrepancy: f64,
    pub worst_cell: Option<i64>,
    pub scanned: Vec<i64>,
    pub skipped: Vec<(i64, String)>,
}

/// `max_n sup_{[nL, nL+L]} |u(T,x) - phi(T^{S_n} + T, x)|` with
/// `S_n = (∫psi0)² u0(nL)` and `T^{S}` the time the mean of `phi` equals `S`.
pub fn flatness_discrepancy(
    run: &FrontRun,
    global: &GlobalSolution,
    horizon: f64,
    cells: (i64, i64),
) -> Result<FlatnessScan> {
    run.require_clean(horizon)?;
    let k = run.snapshot_index(horizon)?;
    let u = &run.snapshots[k];
    let period = global.period;
    let weight = global.psi0.integral().powi(2);
    let grid = run.grid;
    let mut scan = FlatnessScan {
        horizon,
        max_discrepancy: 0.0,
        worst_cell: None,
        scanned: Vec::new(),
        skipped: Vec::new(),
    };
    for n in cells.0..=cells.1 {
        let a = n as f64 * period;
        let b = a + period;
        if a < grid.x_left || b > grid.x_right {
            scan.skipped.push((n, "cell outside the domain".into()));
            continue;
        }
        let s = weight * run.initial_data.eval(a);
        let t_s = match global.mean_crossing_time(s) {
            Ok(t) => t,
            Err(_) => {
                scan.skipped
                    .push((n, format!("S_n = {s:e} outside the mean range of the global solution")));
                continue;
            }
        };
        let phi = global.field_at(t_s + horizon);
        let i0 = ((a - grid.x_left) / grid.dx - 1e-9).ceil().max(0.0) as usize;
        let i1 = (((b - grid.x_left) / grid.dx + 1e-9).floor() as usize).min(u.len() - 1);
        let mut worst: f64 = 0.0;
        for (i, &value) in u.iter().enumerate().take(i1 + 1).skip(i0) {
            let x = grid.x(i);
            let reference = crate::cell::periodic_interp(&phi, period, x);
            worst = worst.max((value - reference).abs());
        }
        scan.scanned.push(n);
        if worst > scan.max_discrepancy || scan.worst_cell.is_none() {
            scan.max_discrepancy = worst.max(scan.max_discrepancy);
            scan.worst_cell = Some(n);
        }
    }
    Ok(scan)
}

/// Discrepancy must shrink from `T1` to `T2` and end below `threshold`.
pub fn verify_flatness(
    run: &FrontRun,
    global: &GlobalSolution,
    horizons: (f64, f64),
    cells: (i64, i64),
    threshold: f64,
) -> Result<VerificationReport> {
    let (t1, t2) = horizons;
    if !(t1 < t2) {
        return Err(KppError::InvalidParameter(format!("need T1 < T2, got {t1}, {t2}")));
    }
    let early = flatness_discrepancy(run, global, t1, cells)?;
    let late = flatness_discrepancy(run, global, t2, cells)?;
    let mut report = VerificationReport::new("flatness");
    report.param("T1", json!(t1));
    report.param("T2", json!(t2));
    report.param("cells", json!([cells.0, cells.1]));
    report.param("threshold", json!(threshold));
    report.param("scanned_T1", json!(early.scanned));
    report.param("scanned_T2", json!(late.scanned));
    report.provenance.push(run.content_hash());

    let mut trend = VerificationCheck::new("decrease T1 -> T2");
    trend.predicted = Some(early.max_discrepancy);
    trend.measured = Some(late.max_discrepancy);
    let mut small = VerificationCheck::new("threshold at T2");
    small.measured = Some(late.max_discrepancy);
    small.tolerance = Some(threshold);
    if late.scanned.is_empty() || early.scanned.is_empty() {
        trend.verdict = Verdict::Skipped;
        small.verdict = Verdict::Skipped;
        trend.note = "no cell could be scanned".into();
    } else {
        trend.verdict = if late.max_discrepancy < early.max_discrepancy || late.max_discrepancy <= 1e-12 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        small.verdict = if late.max_discrepancy <= threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        small.note = format!("worst cell {:?}, {} skipped", late.worst_cell, late.skipped.len());
    }
    report.checks.push(trend);
    report.checks.push(small);
    Ok(report.finish())
}

/// Minus the least-squares slope of `ln B` against `T`.
pub fn fit_decay_rate(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(KppError::InvalidParameter(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(KppError::InvalidParameter(
            "horizons must be strictly increasing".into(),
        ));
    }
    if let Some(&(t, b)) = samples.iter().find(|s| !(s.1 > 0.0)) {
        return Err(out_of_range("B", b, format!("(0, inf) at T = {t}")));
    }
    let n = samples.len() as f64;
    let mt = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mt) * (s.1.ln() - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// Fitted decay rate of `B(m, T)` against the principal eigenvalue `f0`.
pub fn verify_bmt_rate(
    f: &Nonlinearity,
    m: f64,
    horizons: &[f64],
    numerics: &CellNumerics,
    eigen_nodes: usize,
    tolerance: f64,
) -> Result<(VerificationReport, Vec<(f64, f64)>)> {
    let levels = terminal_start_levels(f, m, horizons, crate::cell::DEFAULT_MEAN_TOL, numerics)?;
    let samples: Vec<(f64, f64)> = horizons.iter().copied().zip(levels).collect();
    let rate = fit_decay_rate(&samples)?;
    let f0 = eigenpair_at_zero(f, eigen_nodes)?.eigenvalue;
    let mut report = VerificationReport::new("bmt-rate");
    report.param("m", json!(m));
    report.param("T", json!(horizons));
    report.param("reaction", json!(f.name()));
    let mut check = VerificationCheck::new("rate vs f0");
    check.predicted = Some(f0);
    check.measured = Some(rate);
    check.tolerance = Some(tolerance);
    check.verdict = if (rate / f0 - 1.0).abs() <= tolerance {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    report.checks.push(check);
    Ok((report.finish(), samples))
}

/// `|ratio - 1| <= tolerance` at the last horizon with deviations shrinking.
pub fn verify_ratio_limit(
    f: &Nonlinearity,
    global: &GlobalSolution,
    m: f64,
    horizons: &[f64],
    numerics: &CellNumerics,
    mean_tol: f64,
    tolerance: f64,
) -> Result<(VerificationReport, Vec<(f64, f64)>)> {
    let ratios = ratio_limit_check(f, global, m, horizons, mean_tol, numerics)?;
    let mut report = VerificationReport::new("ratio-limit");
    report.param("m", json!(m));
    report.param("T", json!(horizons));
    report.param("reaction", json!(f.name()));
    let deviations: Vec<f64> = ratios.iter().map(|r| (r.1 - 1.0).abs()).collect();
    let mut last = VerificationCheck::new("ratio at largest T");
    last.predicted = Some(1.0);
    last.measured = ratios.last().map(|r| r.1);
    last.tolerance = Some(tolerance);
    last.verdict = match deviations.last() {
        Some(&d) if d <= tolerance => Verdict::Pass,
        _ => Verdict::Fail,
    };
    let mut trend = VerificationCheck::new("deviations decrease");
    trend.measured = deviations.last().copied();
    trend.note = deviations
        .iter()
        .map(|d| format!("{d:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    trend.verdict = if deviations.windows(2).all(|w| w[1] < w[0]) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    report.checks.push(last);
    report.checks.push(trend);
    Ok((report.finish(), ratios))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_rate() {
        let samples: Vec<(f64, f64)> = [1.0f64, 2.0, 3.5, 5.0].iter().map(|&t| (t, (-2.0 * t).exp())).collect();
        assert!((fit_decay_rate(&samples).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_errors() {
        assert!(fit_decay_rate(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(fit_decay_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 0.1)]).is_err());
        assert!(fit_decay_rate(&[(1.0, 1.0), (1.0, 0.5), (3.0, 0.1)]).is_err());
    }

    #[test]
    fn verdict_aggregation() {
        let mut r = VerificationReport::new("x");
        let mut c = VerificationCheck::new("a");
        c.verdict = Verdict::AtBoundary;
        r.checks.push(c.clone());
        assert!(!r.clone().finish().pass);
        c.verdict = Verdict::Pass;
        r.checks.push(c.clone());
        assert!(r.clone().finish().pass);
        c.verdict = Verdict::Fail;
        r.checks.push(c);
        assert!(!r.finish().pass);
    }
}

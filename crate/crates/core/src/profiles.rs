//! Front-like, slowly decaying initial data `u0`, its tail inverse and the
//! admissibility checks on finite samples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, KppError, Result};
use crate::report::{CheckEntry, CheckStatus, ValidationReport};

/// Start of the exact tail for the built-in families.
pub const TAIL_START: f64 = 2.0;
const JOIN_START: f64 = 1.0;
const MAX_DOUBLINGS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProfileFamily {
    /// `x^{-alpha}`.
    Algebraic { alpha: f64 },
    /// `exp(-x^beta)`; admissible only for `beta < 1/2`.
    Stretched { beta: f64 },
    /// `x^{-alpha} (log x)^gamma`.
    LogAlgebraic { alpha: f64, gamma: f64 },
    /// Constant data (no tail); used for degenerate checks.
    Constant { value: f64 },
    /// Tabulated `(x, u0)` with log-linear interpolation and a power-law
    /// continuation past the last node.
    Table { xs: Vec<f64>, values: Vec<f64> },
}

/// Initial data: plateau for `x <= 1`, a monotone C¹ cubic join on `[1, 2]`
/// and the exact family tail for `x >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    family: ProfileFamily,
    plateau: f64,
    tail_start: f64,
    join: Option<HermiteJoin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct HermiteJoin {
    v0: f64,
    v1: f64,
    slope1: f64,
}

impl HermiteJoin {
    fn eval(&self, x: f64) -> f64 {
        let s = x - JOIN_START;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.v0 + h01 * self.v1 + h11 * self.slope1
    }
}

pub fn make_algebraic(alpha: f64, plateau: f64) -> Result<InitialData> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(KppError::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    InitialData::with_join(ProfileFamily::Algebraic { alpha }, plateau)
}

pub fn make_stretched(beta: f64, plateau: f64) -> Result<InitialData> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(KppError::InvalidParameter(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    InitialData::with_join(ProfileFamily::Stretched { beta }, plateau)
}

pub fn make_log_algebraic(alpha: f64, gamma: f64, plateau: f64) -> Result<InitialData> {
    if !(alpha > 0.0) {
        return Err(KppError::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    // d/dx log(tail) = (-alpha log x + gamma) / (x log x) < 0 for x >= 2
    if gamma >= alpha * TAIL_START.ln() {
        return Err(KppError::InvalidParameter(format!(
            "gamma must be below alpha·ln 2 = {} for a monotone tail",
            alpha * TAIL_START.ln()
        )));
    }
    InitialData::with_join(ProfileFamily::LogAlgebraic { alpha, gamma }, plateau)
}

pub fn make_constant(value: f64) -> Result<InitialData> {
    if !(0.0..=1.0).contains(&value) {
        return Err(out_of_range("constant level", value, "[0, 1]"));
    }
    Ok(InitialData {
        family: ProfileFamily::Constant { value },
        plateau: value,
        tail_start: f64::INFINITY,
        join: None,
    })
}

pub fn make_table(xs: Vec<f64>, values: Vec<f64>) -> Result<InitialData> {
    if xs.len() < 3 || xs.len() != values.len() {
        return Err(KppError::Config("profile table needs at least 3 (x, u0) rows".into()));
    }
    if !xs.windows(2).all(|w| w[0] < w[1]) {
        return Err(KppError::Config("profile table x must be strictly increasing".into()));
    }
    if values.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
        return Err(KppError::Config("profile table values must lie in (0, 1]".into()));
    }
    // tail begins at the first node from which values decrease strictly to the end
    let mut k = values.len() - 1;
    while k > 0 && values[k - 1] > values[k] {
        k -= 1;
    }
    if k + 1 >= values.len() {
        return Err(KppError::Config("profile table has no strictly decreasing tail".into()));
    }
    let plateau = values[0];
    let tail_start = xs[k];
    Ok(InitialData {
        family: ProfileFamily::Table { xs, values },
        plateau,
        tail_start,
        join: None,
    })
}

/// Reads `x,u0` rows (header and `#` lines skipped).
pub fn load_table(path: &Path) -> Result<InitialData> {
    let text = std::fs::read_to_string(path).map_err(|e| KppError::Io(format!("{}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        match (parts.next().map(str::parse::<f64>), parts.next().map(str::parse::<f64>)) {
            (Some(Ok(x)), Some(Ok(v))) => {
                xs.push(x);
                values.push(v);
            }
            _ if xs.is_empty() => continue,
            _ => return Err(KppError::Config(format!("unparsable profile row '{line}'"))),
        }
    }
    make_table(xs, values)
}

impl InitialData {
    fn with_join(family: ProfileFamily, plateau: f64) -> Result<Self> {
        if !(plateau > 0.0 && plateau <= 1.0) {
            return Err(out_of_range("plateau", plateau, "(0, 1]"));
        }
        let mut data = Self {
            family,
            plateau,
            tail_start: TAIL_START,
            join: None,
        };
        let v1 = data.tail_value(TAIL_START);
        let slope1 = data.tail_log_slope(TAIL_START) * v1;
        let drop = v1 - plateau;
        if drop >= 0.0 {
            return Err(KppError::InvalidParameter(format!(
                "plateau {plateau} must exceed the tail value {v1} at x = {TAIL_START}"
            )));
        }
        // Fritsch-Carlson monotonicity region with zero slope at the left end
        let beta = slope1 / drop;
        if !(0.0..=3.0).contains(&beta) {
            return Err(KppError::InvalidParameter(format!(
                "cubic join would not be monotone (slope ratio {beta})"
            )));
        }
        data.join = Some(HermiteJoin {
            v0: plateau,
            v1,
            slope1,
        });
        Ok(data)
    }

    pub fn family(&self) -> &ProfileFamily {
        &self.family
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    /// `liminf` as `x -> -inf`.
    pub fn left_level(&self) -> f64 {
        self.plateau
    }

    pub fn tail_start(&self) -> f64 {
        self.tail_start
    }

    /// Largest level accepted by [`inverse_tail`].
    pub fn tail_ceiling(&self) -> f64 {
        if self.tail_start.is_finite() {
            self.eval(self.tail_start)
        } else {
            0.0
        }
    }

    fn tail_ln(&self, x: f64) -> f64 {
        match &self.family {
            ProfileFamily::Algebraic { alpha } => -alpha * x.ln(),
            ProfileFamily::Stretched { beta } => -x.powf(*beta),
            ProfileFamily::LogAlgebraic { alpha, gamma } => -alpha * x.ln() + gamma * x.ln().ln(),
            ProfileFamily::Constant { value } => value.ln(),
            ProfileFamily::Table { xs, values } => table_ln(xs, values, x),
        }
    }

    fn tail_value(&self, x: f64) -> f64 {
        self.tail_ln(x).exp()
    }

    /// `d/dx ln(tail)` in closed form.
    fn tail_log_slope(&self, x: f64) -> f64 {
        match &self.family {
            ProfileFamily::Algebraic { alpha } => -alpha / x,
            ProfileFamily::Stretched { beta } => -beta * x.powf(beta - 1.0),
            ProfileFamily::LogAlgebraic { alpha, gamma } => (-alpha + gamma / x.ln()) / x,
            ProfileFamily::Constant { .. } => 0.0,
            ProfileFamily::Table { .. } => {
                let h = 1e-6 * x.abs().max(1.0);
                (self.tail_ln(x + h) - self.tail_ln(x - h)) / (2.0 * h)
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match (&self.family, &self.join) {
            (ProfileFamily::Constant { value }, _) => *value,
            (ProfileFamily::Table { .. }, _) => self.tail_value(x),
            (_, Some(join)) => {
                if x <= JOIN_START {
                    self.plateau
                } else if x < TAIL_START {
                    join.eval(x)
                } else {
                    self.tail_value(x)
                }
            }
            (_, None) => unreachable!("built-in families always carry a join"),
        }
    }

    /// `ln u0(x)`, computed without underflow on the tail.
    pub fn ln_eval(&self, x: f64) -> f64 {
        if x >= self.tail_start || matches!(self.family, ProfileFamily::Table { .. }) {
            self.tail_ln(x)
        } else {
            self.eval(x).ln()
        }
    }

    /// Samples `u0` on line nodes `x_left + i dx`.
    pub fn sample(&self, x_left: f64, dx: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.eval(x_left + i as f64 * dx)).collect()
    }
}

fn table_ln(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return values[0].ln();
    }
    if x >= xs[n - 1] {
        // power-law continuation from the last two nodes
        let (x0, x1) = (xs[n - 2], xs[n - 1]);
        let (l0, l1) = (values[n - 2].ln(), values[n - 1].ln());
        if x0 > 0.0 {
            let slope = (l1 - l0) / (x1.ln() - x0.ln());
            return l1 + slope * (x.ln() - x1.ln());
        }
        let slope = (l1 - l0) / (x1 - x0);
        return l1 + slope * (x - x1);
    }
    let k = xs.partition_point(|&p| p <= x);
    let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    values[k - 1].ln() * (1.0 - w) + values[k].ln() * w
}

/// Position `x >= tail_start` with `u0(x) = level`, by bracketing and bisection.
pub fn inverse_tail(u0: &InitialData, level: f64) -> Result<f64> {
    let ceiling = u0.tail_ceiling();
    if !(level > 0.0 && level <= ceiling) {
        return Err(out_of_range(
            "level",
            level,
            format!("(0, {ceiling:e}] (invertible tail)"),
        ));
    }
    let target = level.ln();
    let mut lo = u0.tail_start;
    if u0.ln_eval(lo) <= target {
        return Ok(lo);
    }
    let mut hi = 2.0 * lo.max(1.0);
    let mut doublings = 0;
    while u0.ln_eval(hi) > target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(KppError::NonConvergence(format!(
                "could not bracket u0^-1({level:e}) after {doublings} doublings"
            )));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if u0.ln_eval(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let err_lo = (u0.ln_eval(lo) - target).abs();
    let err_hi = (u0.ln_eval(hi) - target).abs();
    Ok(if err_lo <= err_hi { lo } else { hi })
}

/// Probe settings for [`validate_admissibility`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityProbe {
    pub epsilons: Vec<f64>,
    pub x_max: f64,
    /// Number of geometric sample points between the tail start and `x_max`.
    pub samples: usize,
    /// Fraction of the sample (counted from the far end) used for trend tests.
    pub window: f64,
}

impl Default for AdmissibilityProbe {
    fn default() -> Self {
        Self {
            epsilons: vec![1.0, 0.1, 0.01],
            x_max: 1e5,
            samples: 240,
            window: 1.0 / 3.0,
        }
    }
}

/// `u0'(x) ln(u0(x)) / u0(x)` by central differences of `ln u0`.
pub fn regularity_ratio(u0: &InitialData, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    let log_slope = (u0.ln_eval(x + h) - u0.ln_eval(x - h)) / (2.0 * h);
    log_slope * u0.ln_eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trend {
    Increasing,
    Decreasing,
    Flat,
    Mixed,
}

/// Classifies a sequence by the sign of its successive differences.
/// `flat_tol` is a relative tolerance on the total change.
fn trend(values: &[f64], flat_tol: f64) -> Trend {
    let first = values[0];
    let last = *values.last().unwrap();
    let scale = first.abs().max(last.abs()).max(f64::MIN_POSITIVE);
    if (last - first).abs() <= flat_tol * scale {
        return Trend::Flat;
    }
    let noise = 1e-12 * scale;
    let up = values.windows(2).all(|w| w[1] >= w[0] - noise);
    let down = values.windows(2).all(|w| w[1] <= w[0] + noise);
    match (up, down) {
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        (true, true) => Trend::Flat,
        (false, false) => Trend::Mixed,
    }
}

fn entry(name: &str, status: CheckStatus, worst: Option<(f64, f64)>, detail: String) -> CheckEntry {
    CheckEntry {
        name: name.to_string(),
        status,
        worst_point: worst,
        worst_violation: 0.0,
        detail,
    }
}

/// Checks decay to zero, slower-than-exponential decay for each probe
/// `eps`, the monotone tail and the derivative-regularity limit.
pub fn validate_admissibility(u0: &InitialData, probe: &AdmissibilityProbe) -> Result<ValidationReport> {
    let start = u0.tail_start();
    if !start.is_finite() {
        return Err(KppError::InvalidParameter("profile has no decreasing tail".into()));
    }
    if !(probe.x_max > start) {
        return Err(out_of_range("x_max", probe.x_max, format!("> tail_start = {start}")));
    }
    let k = probe.samples.max(16);
    let ratio = (probe.x_max / start).powf(1.0 / (k - 1) as f64);
    let xs: Vec<f64> = (0..k).map(|i| start * ratio.powi(i as i32)).collect();
    let logs: Vec<f64> = xs.iter().map(|&x| u0.ln_eval(x)).collect();
    let w0 = ((1.0 - probe.window.clamp(0.05, 1.0)) * k as f64) as usize;
    let window = w0.min(k - 3)..k;

    let mut report = ValidationReport::default();

    // (i) decay to zero
    let decreasing = logs.windows(2).all(|w| w[1] < w[0]);
    let total_drop = logs[0] - logs[k - 1];
    let status = if !decreasing {
        CheckStatus::Fail
    } else if total_drop >= std::f64::consts::LN_2 {
        CheckStatus::Pass
    } else {
        CheckStatus::Inconclusive
    };
    report.push(entry(
        "decays_to_zero",
        status,
        Some((xs[k - 1], 0.0)),
        format!(
            "ln u0 drops by {total_drop:.4} between x = {start} and x = {}",
            probe.x_max
        ),
    ));

    // (ii) u0 e^{eps x} eventually increasing, tested on ln u0 + eps x
    let mut statuses = Vec::new();
    let mut details = Vec::new();
    for &eps in &probe.epsilons {
        let h: Vec<f64> = window.clone().map(|i| logs[i] + eps * xs[i]).collect();
        let s = match trend(&h, 0.0) {
            Trend::Increasing => CheckStatus::Pass,
            Trend::Decreasing => CheckStatus::Fail,
            Trend::Flat | Trend::Mixed => CheckStatus::Inconclusive,
        };
        details.push(format!("eps={eps}: {s:?}"));
        statuses.push(s);
    }
    report.push(entry(
        "slower_than_exponential",
        combine(&statuses),
        None,
        details.join("; "),
    ));

    // (iii) strictly decreasing tail on a dense linear grid plus the geometric sample
    let lin_end = probe.x_max.min(start + 100.0);
    let lin: Vec<f64> = (0..=2000)
        .map(|i| start + (lin_end - start) * i as f64 / 2000.0)
        .collect();
    let mut worst = None;
    for pts in [&lin, &xs] {
        for w in pts.windows(2) {
            if u0.ln_eval(w[1]) >= u0.ln_eval(w[0]) && worst.is_none() {
                worst = Some((w[1], 0.0));
            }
        }
    }
    report.push(entry(
        "monotone_tail",
        if worst.is_none() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        worst,
        format!("strict decrease on [{start}, {}]", probe.x_max),
    ));

    // (iv) u0' ln(u0) / u0 -> 0, by monotone trend over the far window
    let r: Vec<f64> = window.clone().map(|i| regularity_ratio(u0, xs[i]).abs()).collect();
    let status = match trend(&r, 0.05) {
        Trend::Decreasing => CheckStatus::Pass,
        Trend::Increasing => CheckStatus::Fail,
        Trend::Flat | Trend::Mixed => CheckStatus::Inconclusive,
    };
    report.push(entry(
        "regularity_ratio",
        status,
        Some((xs[k - 1], *r.last().unwrap())),
        format!(
            "|u0' ln u0 / u0| goes from {:.4e} to {:.4e} over the far window",
            r[0],
            r.last().unwrap()
        ),
    ));
    Ok(report)
}

fn combine(statuses: &[CheckStatus]) -> CheckStatus {
    if statuses.contains(&CheckStatus::Fail) {
        CheckStatus::Fail
    } else if statuses.contains(&CheckStatus::Inconclusive) {
        CheckStatus::Inconclusive
    } else {
        CheckStatus::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftSign {
    Plus,
    Minus,
}

/// `u0(u0^{-1}(lambda_t) ± c3 t) / lambda_t`.
pub fn oscillation_ratio(
    u0: &InitialData,
    lambda_of_t: impl Fn(f64) -> f64,
    c3: f64,
    t: f64,
    sign: ShiftSign,
) -> Result<f64> {
    let lambda = lambda_of_t(t);
    let x = inverse_tail(u0, lambda)?;
    let shifted = match sign {
        ShiftSign::Plus => x + c3 * t,
        ShiftSign::Minus => x - c3 * t,
    };
    if shifted < u0.tail_start() {
        return Err(out_of_range(
            "shifted position",
            shifted,
            format!(">= tail_start = {}", u0.tail_start()),
        ));
    }
    if c3 == 0.0 {
        return Ok(1.0);
    }
    Ok((u0.ln_eval(shifted) - lambda.ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebraic_values() {
        let u = make_algebraic(2.0, 1.0).unwrap();
        assert!((u.eval(10.0) - 0.01).abs() < 1e-17);
        assert_eq!(u.eval(1.0), 1.0);
        assert_eq!(u.eval(-30.0), 1.0);
        let u4 = make_algebraic(4.0, 0.8).unwrap();
        assert!((u4.eval(10.0) - 1e-4).abs() < 1e-18);
        assert_eq!(u4.eval(0.5), 0.8);
        assert!(make_algebraic(0.0, 1.0).is_err());
        assert!(make_algebraic(-1.0, 1.0).is_err());
    }

    #[test]
    fn join_is_c1_and_monotone() {
        for alpha in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let u = make_algebraic(alpha, 1.0).unwrap();
            let h = 1e-7;
            let d_left = (u.eval(2.0) - u.eval(2.0 - h)) / h;
            let d_right = (u.eval(2.0 + h) - u.eval(2.0)) / h;
            assert!((d_left - d_right).abs() < 1e-5, "alpha {alpha}");
            let xs: Vec<f64> = (0..=1000).map(|i| 1.0 + i as f64 / 1000.0).collect();
            assert!(xs.windows(2).all(|w| u.eval(w[1]) <= u.eval(w[0])));
        }
    }

    #[test]
    fn inverse_of_algebraic_tail() {
        let u = make_algebraic(2.0, 1.0).unwrap();
        assert!((inverse_tail(&u, 0.01).unwrap() - 10.0).abs() < 1e-12);
        assert!((inverse_tail(&u, 0.25).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(inverse_tail(&u, 0.5), Err(KppError::OutOfRange { .. })));
        assert!(inverse_tail(&u, 0.0).is_err());
    }

    #[test]
    fn inverse_of_stretched_tail() {
        let u = make_stretched(1.0 / 3.0, 1.0).unwrap();
        let x = inverse_tail(&u, (-2.0f64).exp()).unwrap();
        assert!((x - 8.0).abs() < 1e-11, "{x}");
    }

    #[test]
    fn bracketing_gives_up() {
        // x^{-1e-3} at level 1e-300 lies near 10^{300000}, beyond f64
        let u = make_algebraic(1e-3, 1.0).unwrap();
        assert!(matches!(inverse_tail(&u, 1e-300), Err(KppError::NonConvergence(_))));
    }

    #[test]
    fn constant_has_no_tail() {
        let u = make_constant(0.5).unwrap();
        assert!(inverse_tail(&u, 0.1).is_err());
        assert!(make_constant(1.5).is_err());
    }

    #[test]
    fn admissibility_of_algebraic_tail() {
        let u = make_algebraic(2.0, 1.0).unwrap();
        let probe = AdmissibilityProbe {
            epsilons: vec![0.1, 0.01],
            ..Default::default()
        };
        let r = validate_admissibility(&u, &probe).unwrap();
        assert!(r.passed(), "{r:#?}");
        assert_eq!(r.entries.len(), 4);
    }

    #[test]
    fn exponential_tail_fails_slowness() {
        let u = make_stretched(1.0, 1.0).unwrap();
        let probe = AdmissibilityProbe {
            epsilons: vec![0.5],
            ..Default::default()
        };
        let r = validate_admissibility(&u, &probe).unwrap();
        assert_eq!(r.status("slower_than_exponential"), Some(CheckStatus::Fail));
    }

    #[test]
    fn critical_stretched_exponent_is_inconclusive() {
        let u = make_stretched(0.5, 1.0).unwrap();
        let r = validate_admissibility(&u, &AdmissibilityProbe::default()).unwrap();
        assert_eq!(r.status("regularity_ratio"), Some(CheckStatus::Inconclusive));
    }

    #[test]
    fn table_profile_matches_family() {
        let fam = make_algebraic(2.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..400).map(|i| -5.0 + 0.25 * i as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| fam.eval(x)).collect();
        let tab = make_table(xs, vals).unwrap();
        assert!(tab.tail_start() <= 1.25);
        assert!((tab.eval(50.0) - fam.eval(50.0)).abs() < 1e-6);
        // power-law continuation reproduces x^{-2}
        assert!((tab.eval(1000.0) / fam.eval(1000.0) - 1.0).abs() < 1e-9);
        let x = inverse_tail(&tab, 1e-4).unwrap();
        assert!((x - 100.0).abs() < 1e-6);
    }

    #[test]
    fn oscillation_without_shift_is_one() {
        let u = make_algebraic(2.0, 1.0).unwrap();
        let r = oscillation_ratio(&u, |t| (-t).exp(), 0.0, 7.0, ShiftSign::Plus).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn oscillation_shift_below_tail_is_range_error() {
        let u = make_algebraic(2.0, 1.0).unwrap();
        // inverse of e^{-3} is e^{1.5} ≈ 4.48; shifting left by 3 leaves the tail
        assert!(oscillation_ratio(&u, |t| (-t).exp(), 1.0, 3.0, ShiftSign::Minus).is_err());
    }
}

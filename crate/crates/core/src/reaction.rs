//! Periodic KPP reaction terms `f(x, u)` and their structural checks.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KppError, Result};
use crate::report::{CheckEntry, CheckStatus, ValidationReport, WorstTracker};

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type CoefFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Equality tolerance for `f(x,0) = f(x,1) = 0`, periodicity and the chord bound.
pub const EQUALITY_TOL: f64 = 1e-12;
/// Tolerance on discrete increments of `f(x,u)/u`.
pub const MONOTONE_TOL: f64 = 1e-10;
pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    Homogeneous,
    Periodic,
}

#[derive(Clone)]
enum Family {
    Fisher,
    PeriodicFisher {
        amplitude: f64,
    },
    Table(TableReaction),
    Custom {
        name: String,
        eval: ScalarFn,
        du_zero: CoefFn,
        du_one: CoefFn,
    },
}

/// An `L`-periodic reaction term together with its linearizations at 0 and 1.
///
/// Values are immutable after construction and can be shared across threads.
#[derive(Clone)]
pub struct Nonlinearity {
    period: f64,
    kind: ReactionKind,
    family: Family,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name())
            .field("period", &self.period)
            .field("kind", &self.kind)
            .finish()
    }
}

/// `f(x,u) = u (1 - u)`.
pub fn make_fisher() -> Nonlinearity {
    Nonlinearity {
        period: 1.0,
        kind: ReactionKind::Homogeneous,
        family: Family::Fisher,
    }
}

/// `f(x,u) = (1 + a cos(2 pi x / L)) u (1 - u)`.
pub fn make_periodic_fisher(amplitude: f64, period: f64) -> Result<Nonlinearity> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(KppError::InvalidParameter(format!(
            "amplitude must lie in [0, 1) so that f_u(x,0) > 0, got {amplitude}"
        )));
    }
    check_period(period)?;
    Ok(Nonlinearity {
        period,
        kind: if amplitude == 0.0 {
            ReactionKind::Homogeneous
        } else {
            ReactionKind::Periodic
        },
        family: Family::PeriodicFisher { amplitude },
    })
}

fn check_period(period: f64) -> Result<()> {
    if period > 0.0 && period.is_finite() {
        Ok(())
    } else {
        Err(KppError::InvalidParameter(format!(
            "period must be positive, got {period}"
        )))
    }
}

impl Nonlinearity {
    /// A user-supplied reaction term. `eval` must be `period`-periodic in `x`.
    pub fn custom<F, G, H>(name: &str, period: f64, kind: ReactionKind, eval: F, du_zero: G, du_one: H) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_period(period)?;
        Ok(Self {
            period,
            kind,
            family: Family::Custom {
                name: name.to_string(),
                eval: Arc::new(eval),
                du_zero: Arc::new(du_zero),
                du_one: Arc::new(du_one),
            },
        })
    }

    pub fn from_table(table: TableReaction) -> Self {
        Self {
            period: table.period,
            kind: ReactionKind::Periodic,
            family: Family::Table(table),
        }
    }

    /// Same family with a different period. Homogeneous terms accept any period.
    pub fn with_period(mut self, period: f64) -> Result<Self> {
        check_period(period)?;
        if let Family::Table(_) = self.family {
            return Err(KppError::InvalidParameter(
                "the period of a tabulated reaction is fixed".into(),
            ));
        }
        self.period = period;
        Ok(self)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn kind(&self) -> ReactionKind {
        self.kind
    }

    pub fn is_homogeneous(&self) -> bool {
        self.kind == ReactionKind::Homogeneous
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::Fisher => "fisher".into(),
            Family::PeriodicFisher { amplitude } => format!("periodic_fisher(a={amplitude})"),
            Family::Table(_) => "table".into(),
            Family::Custom { name, .. } => name.clone(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match &self.family {
            Family::Fisher => u * (1.0 - u),
            Family::PeriodicFisher { amplitude } => {
                (1.0 + amplitude * (2.0 * PI * x / self.period).cos()) * u * (1.0 - u)
            }
            Family::Table(t) => t.eval(x, u),
            Family::Custom { eval, .. } => eval(x, u),
        }
    }

    /// `f_u(x, 0)`.
    pub fn du_at_zero(&self, x: f64) -> f64 {
        match &self.family {
            Family::Fisher => 1.0,
            Family::PeriodicFisher { amplitude } => 1.0 + amplitude * (2.0 * PI * x / self.period).cos(),
            Family::Table(t) => t.du_at(x, 0),
            Family::Custom { du_zero, .. } => du_zero(x),
        }
    }

    /// `f_u(x, 1)`.
    pub fn du_at_one(&self, x: f64) -> f64 {
        match &self.family {
            Family::Fisher => -1.0,
            Family::PeriodicFisher { amplitude } => -(1.0 + amplitude * (2.0 * PI * x / self.period).cos()),
            Family::Table(t) => t.du_at(x, 1),
            Family::Custom { du_one, .. } => du_one(x),
        }
    }

    /// Spatial average of `f(., u)` over one period, by the midpoint rule on `samples` points.
    pub fn cell_average(&self, u: f64, samples: usize) -> f64 {
        if self.is_homogeneous() {
            return self.eval(0.0, u);
        }
        let h = self.period / samples as f64;
        (0..samples).map(|i| self.eval((i as f64 + 0.5) * h, u)).sum::<f64>() / samples as f64
    }

    /// Node samples of `f_u(x, 0)` on an `n`-point periodic grid.
    pub fn du_at_zero_samples(&self, n: usize) -> Vec<f64> {
        let h = self.period / n as f64;
        (0..n).map(|i| self.du_at_zero(i as f64 * h)).collect()
    }

    pub fn du_at_one_samples(&self, n: usize) -> Vec<f64> {
        let h = self.period / n as f64;
        (0..n).map(|i| self.du_at_one(i as f64 * h)).collect()
    }
}

/// Tabulated `f(x, u)` on a rectangular `(x, u)` grid with bilinear
/// interpolation, periodic in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableReaction {
    period: f64,
    xs: Vec<f64>,
    us: Vec<f64>,
    /// Row-major: `values[i * us.len() + j] = f(xs[i], us[j])`.
    values: Vec<f64>,
}

impl TableReaction {
    pub fn new(period: f64, xs: Vec<f64>, us: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_period(period)?;
        if xs.is_empty() || us.len() < 2 || values.len() != xs.len() * us.len() {
            return Err(KppError::Config("table reaction grid has inconsistent sizes".into()));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&xs) || !increasing(&us) {
            return Err(KppError::Config("table grid axes must be strictly increasing".into()));
        }
        if xs[0] < 0.0 || *xs.last().unwrap() >= period {
            return Err(KppError::Config("table x nodes must lie in [0, period)".into()));
        }
        if us[0] != 0.0 || *us.last().unwrap() != 1.0 {
            return Err(KppError::Config("table u nodes must span exactly [0, 1]".into()));
        }
        Ok(Self { period, xs, us, values })
    }

    /// Reads long-format CSV rows `x,u,f` (a header line and `#` comments are skipped).
    pub fn from_csv(path: &Path, period: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KppError::Io(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(KppError::Config(format!("table row needs 3 columns: '{line}'")));
            }
            match (
                parts[0].parse::<f64>(),
                parts[1].parse::<f64>(),
                parts[2].parse::<f64>(),
            ) {
                (Ok(x), Ok(u), Ok(f)) => rows.push((x, u, f)),
                _ if rows.is_empty() => continue,
                _ => return Err(KppError::Config(format!("unparsable table row '{line}'"))),
            }
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut us: Vec<f64> = rows.iter().map(|r| r.1).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        us.sort_by(f64::total_cmp);
        us.dedup();
        let mut values = vec![f64::NAN; xs.len() * us.len()];
        for (x, u, f) in rows {
            let i = xs.binary_search_by(|p| p.total_cmp(&x)).unwrap();
            let j = us.binary_search_by(|p| p.total_cmp(&u)).unwrap();
            values[i * us.len() + j] = f;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(KppError::Config("table does not cover a full (x, u) grid".into()));
        }
        Self::new(period, xs, us, values)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.us.len() + j]
    }

    /// Bracketing x rows and weight, with periodic wrap.
    fn x_stencil(&self, x: f64) -> (usize, usize, f64) {
        let n = self.xs.len();
        if n == 1 {
            return (0, 0, 0.0);
        }
        let xr = x.rem_euclid(self.period);
        match self.xs.iter().position(|&p| p > xr) {
            Some(0) => {
                // between the last node (shifted down one period) and the first
                let left = self.xs[n - 1] - self.period;
                (n - 1, 0, (xr - left) / (self.xs[0] - left))
            }
            Some(k) => (k - 1, k, (xr - self.xs[k - 1]) / (self.xs[k] - self.xs[k - 1])),
            None => {
                let right = self.xs[0] + self.period;
                (n - 1, 0, (xr - self.xs[n - 1]) / (right - self.xs[n - 1]))
            }
        }
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        let (i0, i1, wx) = self.x_stencil(x);
        let m = self.us.len();
        let uc = u.clamp(0.0, 1.0);
        let k = self.us.partition_point(|&p| p <= uc).clamp(1, m - 1);
        let wu = (uc - self.us[k - 1]) / (self.us[k] - self.us[k - 1]);
        let row = |i: usize| self.at(i, k - 1) * (1.0 - wu) + self.at(i, k) * wu;
        row(i0) * (1.0 - wx) + row(i1) * wx
    }

    /// Slope of the interpolant in `u` at the end `end` (0 or 1).
    fn du_at(&self, x: f64, end: usize) -> f64 {
        let (i0, i1, wx) = self.x_stencil(x);
        let m = self.us.len();
        let (a, b) = if end == 0 { (0, 1) } else { (m - 2, m - 1) };
        let h = self.us[b] - self.us[a];
        let slope = |i: usize| (self.at(i, b) - self.at(i, a)) / h;
        slope(i0) * (1.0 - wx) + slope(i1) * wx
    }
}

/// Checks the KPP structure conditions on an `x_samples × u_samples` grid.
pub fn validate_kpp(f: &Nonlinearity, x_samples: usize, u_samples: usize) -> Result<ValidationReport> {
    if x_samples < 16 || u_samples < 16 {
        return Err(KppError::InvalidParameter(
            "validate_kpp needs at least 16 samples per axis".into(),
        ));
    }
    let l = f.period();
    let xs: Vec<f64> = (0..x_samples).map(|i| i as f64 * l / x_samples as f64).collect();
    let us: Vec<f64> = (0..u_samples).map(|j| j as f64 / (u_samples - 1) as f64).collect();

    let mut zero = WorstTracker::default();
    let mut one = WorstTracker::default();
    let mut chord = WorstTracker::default();
    let mut ratio = WorstTracker::default();
    let mut slope0 = WorstTracker::default();
    let mut slope1 = WorstTracker::default();
    let mut periodic = WorstTracker::default();

    for &x in &xs {
        zero.observe(f.eval(x, 0.0).abs(), (x, 0.0));
        one.observe(f.eval(x, 1.0).abs(), (x, 1.0));
        let d0 = f.du_at_zero(x);
        let d1 = f.du_at_one(x);
        // strict sign conditions: violation is how far the value is from the open side
        slope0.observe(if d0 > 0.0 { 0.0 } else { -d0 + f64::MIN_POSITIVE }, (x, 0.0));
        slope1.observe(if d1 < 0.0 { 0.0 } else { d1 + f64::MIN_POSITIVE }, (x, 1.0));
        let mut prev_ratio: Option<f64> = None;
        for &u in &us {
            let v = f.eval(x, u);
            chord.observe(v - d0 * u, (x, u));
            periodic.observe((f.eval(x + l, u) - v).abs(), (x, u));
            if u > 0.0 {
                let r = v / u;
                if let Some(p) = prev_ratio {
                    ratio.observe(r - p, (x, u));
                }
                prev_ratio = Some(r);
            }
        }
    }

    let mut report = ValidationReport::default();
    report.push(zero.into_entry("vanishes_at_zero", EQUALITY_TOL, "max |f(x,0)|"));
    report.push(one.into_entry("vanishes_at_one", EQUALITY_TOL, "max |f(x,1)|"));
    report.push(chord.into_entry("chord_bound", EQUALITY_TOL, "max f(x,u) - f_u(x,0) u"));
    report.push(ratio.into_entry(
        "ratio_nonincreasing",
        MONOTONE_TOL,
        "max increment of f(x,u)/u along the u grid",
    ));
    report.push(slope0.into_entry("positive_slope_at_zero", 0.0, "f_u(x,0) > 0"));
    report.push(slope1.into_entry("negative_slope_at_one", 0.0, "f_u(x,1) < 0"));
    report.push(periodic.into_entry("periodic", EQUALITY_TOL, "max |f(x+L,u) - f(x,u)|"));
    Ok(report)
}

/// Convenience wrapper with the documented 64 × 64 default grid.
pub fn validate_kpp_default(f: &Nonlinearity) -> ValidationReport {
    validate_kpp(f, DEFAULT_SAMPLES, DEFAULT_SAMPLES).expect("default sample counts are valid")
}

/// Fails with a config error naming every failing check.
pub fn require_kpp(f: &Nonlinearity) -> Result<()> {
    let report = validate_kpp_default(f);
    let failing: Vec<&CheckEntry> = report
        .entries
        .iter()
        .filter(|e| e.status != CheckStatus::Pass)
        .collect();
    if failing.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failing.iter().map(|e| e.name.as_str()).collect();
        Err(KppError::Config(format!(
            "reaction {} violates: {}",
            f.name(),
            names.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_values() {
        let f = make_fisher();
        assert_eq!(f.eval(0.3, 0.0), 0.0);
        assert_eq!(f.eval(0.3, 0.5), 0.25);
        for x in [0.0, 0.2, 7.5] {
            assert_eq!(f.du_at_zero(x), 1.0);
            assert_eq!(f.du_at_one(x), -1.0);
        }
        assert!(validate_kpp_default(&f).passed());
    }

    #[test]
    fn periodic_fisher_values() {
        let f = make_periodic_fisher(0.5, 1.0).unwrap();
        assert!((f.du_at_zero(0.0) - 1.5).abs() < 1e-15);
        assert!((f.eval(0.25, 0.5) - 0.25).abs() < 1e-15);
        assert!(validate_kpp_default(&f).passed());
        assert_eq!(f.kind(), ReactionKind::Periodic);
    }

    #[test]
    fn zero_amplitude_reduces_to_fisher() {
        let f = make_periodic_fisher(0.0, 1.0).unwrap();
        let g = make_fisher();
        for i in 0..20 {
            for j in 0..=10 {
                let (x, u) = (i as f64 * 0.137, j as f64 / 10.0);
                assert_eq!(f.eval(x, u), g.eval(x, u));
            }
        }
        assert!(f.is_homogeneous());
    }

    #[test]
    fn rejects_amplitude_at_one() {
        assert!(make_periodic_fisher(1.0, 1.0).is_err());
        assert!(make_periodic_fisher(-0.1, 1.0).is_err());
        assert!(make_periodic_fisher(0.5, 0.0).is_err());
    }

    #[test]
    fn degenerate_slope_at_zero_fails() {
        let f = Nonlinearity::custom(
            "u^2(1-u)",
            1.0,
            ReactionKind::Homogeneous,
            |_, u| u * u * (1.0 - u),
            |_| 0.0,
            |_| -1.0,
        )
        .unwrap();
        let report = validate_kpp_default(&f);
        assert_eq!(report.status("positive_slope_at_zero"), Some(CheckStatus::Fail));
        assert!(!report.passed());
    }

    #[test]
    fn nonvanishing_at_one_fails() {
        let f = Nonlinearity::custom(
            "2u(1-u)-u",
            1.0,
            ReactionKind::Homogeneous,
            |_, u| 2.0 * u * (1.0 - u) - u,
            |_| 1.0,
            |_| -3.0,
        )
        .unwrap();
        let report = validate_kpp_default(&f);
        let e = report.entry("vanishes_at_one").unwrap();
        assert_eq!(e.status, CheckStatus::Fail);
        assert!((e.worst_violation - 1.0).abs() < 1e-15);
        assert_eq!(report.status("vanishes_at_zero"), Some(CheckStatus::Pass));
    }

    #[test]
    fn validate_rejects_small_grids() {
        assert!(validate_kpp(&make_fisher(), 8, 64).is_err());
    }

    #[test]
    fn table_reproduces_bilinear_family() {
        // f = (1 + 0.5 cos 2 pi x) u (1-u) is bilinear-exact in neither variable,
        // but the interpolant must agree at the nodes and stay KPP.
        let g = make_periodic_fisher(0.5, 1.0).unwrap();
        let xs: Vec<f64> = (0..32).map(|i| i as f64 / 32.0).collect();
        let us: Vec<f64> = (0..=64).map(|j| j as f64 / 64.0).collect();
        let mut values = Vec::new();
        for &x in &xs {
            for &u in &us {
                values.push(g.eval(x, u));
            }
        }
        let t = TableReaction::new(1.0, xs.clone(), us.clone(), values).unwrap();
        let f = Nonlinearity::from_table(t);
        for &x in &xs {
            for &u in &us {
                assert!((f.eval(x, u) - g.eval(x, u)).abs() < 1e-14);
                assert!((f.eval(x + 1.0, u) - g.eval(x, u)).abs() < 1e-12);
            }
        }
        assert!(validate_kpp_default(&f).passed(), "{:?}", validate_kpp_default(&f));
        assert!((f.du_at_zero(0.0) - 1.5 * (1.0 - 1.0 / 64.0)).abs() < 1e-12);
    }
}

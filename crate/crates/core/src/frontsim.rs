//! The front problem on a truncated line `[x_left, x_right]` and the
//! extraction of level sets and window-average level sets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell::{clamp_unit, ReactionScheme};
use crate::error::{out_of_range, KppError, Result};
use crate::field::{level_crossings, LineField, TridiagonalFactor};
use crate::profiles::{inverse_tail, InitialData, ProfileFamily};
use crate::reaction::{Nonlinearity, DEFAULT_SAMPLES};

pub const DEFAULT_DX: f64 = 0.25;
pub const DEFAULT_X_LEFT: f64 = -20.0;
pub const DEFAULT_STRIDE: usize = 50;
pub const DEFAULT_BOUNDARY_THRESHOLD: f64 = 1e-2;
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;
pub const DEFAULT_SAFETY: f64 = 5.0;
/// Cap on stored snapshot values (nodes times snapshots), about 1.6 GB.
pub const MAX_STORED_VALUES: usize = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontGrid {
    pub x_left: f64,
    pub x_right: f64,
    pub dx: f64,
}

impl FrontGrid {
    pub fn new(x_left: f64, x_right: f64, dx: f64) -> Result<Self> {
        if !(x_left < 0.0 && 0.0 < x_right) {
            return Err(KppError::InvalidParameter(format!(
                "need x_left < 0 < x_right, got [{x_left}, {x_right}]"
            )));
        }
        if !(dx > 0.0) || dx > 0.5 * (x_right - x_left) {
            return Err(out_of_range("dx", dx, "(0, width/2]"));
        }
        Ok(Self { x_left, x_right, dx })
    }

    pub fn nodes(&self) -> usize {
        ((self.x_right - self.x_left) / self.dx).round() as usize + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_left + i as f64 * self.dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontNumerics {
    pub dt: f64,
    pub stride: usize,
    /// Right-boundary value above which the run is tainted.
    pub boundary_threshold: f64,
    pub scheme: ReactionScheme,
}

impl Default for FrontNumerics {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            stride: DEFAULT_STRIDE,
            boundary_threshold: DEFAULT_BOUNDARY_THRESHOLD,
            scheme: ReactionScheme::Rk4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDiagnostics {
    pub t: f64,
    /// Trapezoid integral of `u` over the domain.
    pub mass: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Taint {
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct FrontRun {
    pub grid: FrontGrid,
    pub numerics: FrontNumerics,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub diagnostics: Vec<SnapshotDiagnostics>,
    /// First time the right boundary exceeded the threshold.
    pub taint: Option<Taint>,
    pub reaction: Nonlinearity,
    pub initial_data: InitialData,
}

fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    dx * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

/// Solves the front problem with Dirichlet data on the left following the
/// plateau's cell-averaged ODE and homogeneous Neumann data on the right.
pub fn simulate_front(
    f: &Nonlinearity,
    u0: &InitialData,
    horizon: f64,
    grid: &FrontGrid,
    numerics: &FrontNumerics,
) -> Result<FrontRun> {
    if !(horizon >= 0.0) {
        return Err(out_of_range("horizon", horizon, "[0, inf)"));
    }
    if !(numerics.dt > 0.0) {
        return Err(out_of_range("dt", numerics.dt, "(0, inf)"));
    }
    if numerics.stride == 0 {
        return Err(KppError::InvalidParameter("stride must be at least 1".into()));
    }
    let n = grid.nodes();
    let stored = n * ((horizon / numerics.dt).ceil() as usize / numerics.stride + 2);
    if stored > MAX_STORED_VALUES {
        return Err(KppError::Budget {
            nodes: stored,
            budget: MAX_STORED_VALUES,
            advisory: "snapshot storage too large; raise stride or shrink the domain".into(),
        });
    }
    let dx = grid.dx;
    let xs: Vec<f64> = (0..n).map(|i| grid.x(i)).collect();
    let mut u = u0.sample(grid.x_left, dx, n);
    if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(KppError::InvalidParameter("initial data must lie in [0, 1]".into()));
    }

    let factor = |dt: f64| -> Result<TridiagonalFactor> {
        let r = dt / (dx * dx);
        let mut lower = vec![-r; n];
        let mut diag = vec![1.0 + 2.0 * r; n];
        let mut upper = vec![-r; n];
        // Dirichlet row
        diag[0] = 1.0;
        upper[0] = 0.0;
        lower[0] = 0.0;
        // Neumann through the ghost node u_{n} = u_{n-2}
        lower[n - 1] = -2.0 * r;
        upper[n - 1] = 0.0;
        TridiagonalFactor::new(&lower, &diag, &upper)
    };
    let full_factor = factor(numerics.dt)?;
    let plateau_rate = |p: f64| f.cell_average(p, DEFAULT_SAMPLES);

    let mut run = FrontRun {
        grid: *grid,
        numerics: *numerics,
        horizon,
        times: Vec::new(),
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
        taint: None,
        reaction: f.clone(),
        initial_data: u0.clone(),
    };
    let record = |run: &mut FrontRun, t: f64, u: &[f64]| {
        run.times.push(t);
        run.diagnostics.push(SnapshotDiagnostics {
            t,
            mass: trapezoid(u, dx),
            left: u[0],
            right: u[n - 1],
        });
        run.snapshots.push(u.to_vec());
    };
    record(&mut run, 0.0, &u);

    let step = |u: &mut [f64], dt: f64, fac: &TridiagonalFactor, t: f64| -> Result<()> {
        let left = numerics.scheme.advance(plateau_rate, u[0], dt);
        for (v, &x) in u.iter_mut().zip(&xs) {
            *v = numerics.scheme.advance(|s| f.eval(x, s), *v, dt);
        }
        u[0] = left;
        fac.solve_in_place(u);
        clamp_unit(u, t)
    };

    let full = (horizon / numerics.dt * (1.0 + 1e-12)).floor() as usize;
    let rem = horizon - full as f64 * numerics.dt;
    let rem = (rem > 1e-9 * numerics.dt).then_some(rem);
    for k in 1..=full {
        let t = k as f64 * numerics.dt;
        step(&mut u, numerics.dt, &full_factor, t)?;
        if run.taint.is_none() && u[n - 1] > numerics.boundary_threshold {
            run.taint = Some(Taint {
                time: t,
                value: u[n - 1],
            });
        }
        if k % numerics.stride == 0 || (k == full && rem.is_none()) {
            record(&mut run, t, &u);
        }
    }
    if let Some(dt) = rem {
        step(&mut u, dt, &factor(dt)?, horizon)?;
        if run.taint.is_none() && u[n - 1] > numerics.boundary_threshold {
            run.taint = Some(Taint {
                time: horizon,
                value: u[n - 1],
            });
        }
        record(&mut run, horizon, &u);
    }
    Ok(run)
}

impl FrontRun {
    pub fn nodes(&self) -> usize {
        self.grid.nodes()
    }

    /// Index of the snapshot at `t`, accepting the nearest one within `dt`.
    pub fn snapshot_index(&self, t: f64) -> Result<usize> {
        let k = self.times.partition_point(|&s| s < t);
        let candidates = [k.saturating_sub(1), k.min(self.times.len() - 1)];
        let best = candidates
            .into_iter()
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
            .unwrap();
        if (self.times[best] - t).abs() <= self.numerics.dt * (1.0 + 1e-9) {
            Ok(best)
        } else {
            Err(KppError::InvalidParameter(format!(
                "no snapshot within dt of t = {t} (nearest {})",
                self.times[best]
            )))
        }
    }

    pub fn field_at(&self, t: f64) -> Result<LineField> {
        let k = self.snapshot_index(t)?;
        LineField::new(self.grid.x_left, self.grid.dx, self.snapshots[k].clone())
    }

    pub fn is_tainted_by(&self, t: f64) -> bool {
        self.taint.is_some_and(|taint| taint.time <= t)
    }

    /// Errors if the run is tainted at or before `t`.
    pub fn require_clean(&self, t: f64) -> Result<()> {
        match self.taint {
            Some(taint) if taint.time <= t => Err(KppError::TaintedRun {
                time: taint.time,
                value: taint.value,
                advisory: "enlarge x_right (plan_domain with a larger safety factor)".into(),
            }),
            _ => Ok(()),
        }
    }

    /// SHA-256 over the snapshot times and values in little-endian bytes.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (t, s) in self.times.iter().zip(&self.snapshots) {
            hasher.update(t.to_le_bytes());
            for v in s {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Options for [`plan_domain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub safety: f64,
    pub dx: f64,
    pub x_left: f64,
    pub node_budget: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            safety: DEFAULT_SAFETY,
            dx: DEFAULT_DX,
            x_left: DEFAULT_X_LEFT,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Smallest level the plan must keep inside the domain: the logistic-shaped
/// start level `m'/(1-m') e^{-f0 T}` with `m' = m_min / 4`.
pub fn planning_level(f0: f64, horizon: f64, m_min: f64) -> f64 {
    let m = 0.25 * m_min;
    m / (1.0 - m) * (-f0 * horizon).exp()
}

/// `x_right = safety * u0^{-1}(level) + 10 sqrt(T)`.
pub fn plan_domain(u0: &InitialData, f0: f64, horizon: f64, m_min: f64, opts: &PlanOptions) -> Result<FrontGrid> {
    if !(horizon > 0.0) {
        return Err(out_of_range("T", horizon, "(0, inf)"));
    }
    if !(m_min > 0.0 && m_min < 1.0) {
        return Err(out_of_range("m_min", m_min, "(0, 1)"));
    }
    if !(f0 > 0.0) {
        return Err(out_of_range("f0", f0, "(0, inf)"));
    }
    let buffer = 10.0 * horizon.sqrt();
    let reach = if matches!(u0.family(), ProfileFamily::Constant { .. }) {
        opts.x_left.abs()
    } else {
        let level = planning_level(f0, horizon, m_min).min(u0.tail_ceiling());
        opts.safety * inverse_tail(u0, level)?
    };
    let x_right = reach + buffer;
    let nodes = ((x_right - opts.x_left) / opts.dx).ceil() as usize + 1;
    if nodes > opts.node_budget {
        return Err(KppError::Budget {
            nodes,
            budget: opts.node_budget,
            advisory: format!("x_right = {x_right:.4e}; reduce T or alpha, or coarsen dx"),
        });
    }
    // keep an integer number of cells of width dx
    let width = ((x_right - opts.x_left) / opts.dx).ceil() * opts.dx;
    FrontGrid::new(opts.x_left, opts.x_left + width, opts.dx)
}

/// Level crossings of a snapshot, or the degenerate "every point" case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossings {
    Points(Vec<f64>),
    All,
}

impl Crossings {
    pub fn points(&self) -> &[f64] {
        match self {
            Crossings::Points(p) => p,
            Crossings::All => &[],
        }
    }

    pub fn rightmost(&self) -> Option<f64> {
        self.points().last().copied()
    }

    pub fn is_all(&self) -> bool {
        matches!(self, Crossings::All)
    }
}

fn crossings_on_nodes(values: &[f64], level: f64, x_left: f64, dx: f64) -> Crossings {
    if values.iter().all(|v| (v - level).abs() <= 1e-14) {
        return Crossings::All;
    }
    Crossings::Points(
        level_crossings(values, level)
            .into_iter()
            .map(|s| x_left + s * dx)
            .collect(),
    )
}

/// `E_m(t)`.
pub fn extract_level_set(run: &FrontRun, m: f64, t: f64) -> Result<Crossings> {
    let k = run.snapshot_index(t)?;
    Ok(crossings_on_nodes(&run.snapshots[k], m, run.grid.x_left, run.grid.dx))
}

/// Integral of the piecewise-linear interpolant from `x_left` to `y`, given
/// the trapezoid prefix sums `prefix`.
fn prefix_at(values: &[f64], prefix: &[f64], x_left: f64, dx: f64, y: f64) -> f64 {
    let n = values.len();
    let s = ((y - x_left) / dx).clamp(0.0, (n - 1) as f64);
    let k = (s.floor() as usize).min(n - 2);
    let d = (s - k as f64) * dx;
    prefix[k] + d * values[k] + d * d / (2.0 * dx) * (values[k + 1] - values[k])
}

fn prefix_sums(values: &[f64], dx: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    p.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        p.push(acc);
    }
    p
}

/// `(1/L) ∫_x^{x+L} u` for the piecewise-linear interpolant of `values`,
/// at every node `x_i` with `x_i + L <= x_right`.
pub fn window_averages(values: &[f64], x_left: f64, dx: f64, window: f64) -> Result<Vec<f64>> {
    let n = values.len();
    let width = (n - 1) as f64 * dx;
    if !(window > 0.0 && window <= width) {
        return Err(out_of_range("L", window, format!("(0, {width}]")));
    }
    let prefix = prefix_sums(values, dx);
    let count = ((width - window) / dx * (1.0 + 1e-12)).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let x = x_left + i as f64 * dx;
            (prefix_at(values, &prefix, x_left, dx, x + window) - prefix[i]) / window
        })
        .collect())
}

/// Window average at an arbitrary point.
pub fn window_average_at(values: &[f64], x_left: f64, dx: f64, window: f64, x: f64) -> f64 {
    let prefix = prefix_sums(values, dx);
    (prefix_at(values, &prefix, x_left, dx, x + window) - prefix_at(values, &prefix, x_left, dx, x)) / window
}

/// `Ē_m(t)`: crossings of the length-`L` window average.
pub fn extract_average_level_set(run: &FrontRun, m: f64, t: f64, window: f64) -> Result<Crossings> {
    let k = run.snapshot_index(t)?;
    let averages = window_averages(&run.snapshots[k], run.grid.x_left, run.grid.dx, window)?;
    Ok(crossings_on_nodes(&averages, m, run.grid.x_left, run.grid.dx))
}

//! Dynamics on the periodic cell `[0, L)`: forward evolution, the
//! terminal-value problem for `B(m, T)`, and the global-in-time solution
//! normalized to mean 1/2 at `t = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, KppError, Result};
use crate::field::{CyclicTridiagonalFactor, TorusField};
use crate::reaction::Nonlinearity;
use crate::spectral::{eigenpair_at_one, eigenpair_at_zero, EigenPair};

/// Values may stray this far outside `[0, 1]` before a step is declared unstable.
pub const STABILITY_SLACK: f64 = 1e-8;
pub const B_FLOOR: f64 = 1e-14;
pub const MAX_BISECTIONS: usize = 60;

/// Explicit integrator used for the reaction sub-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReactionScheme {
    ForwardEuler,
    #[default]
    Rk4,
}

impl ReactionScheme {
    /// One explicit step of `u' = g(u)`.
    #[inline]
    pub fn advance(self, g: impl Fn(f64) -> f64, u: f64, dt: f64) -> f64 {
        match self {
            ReactionScheme::ForwardEuler => u + dt * g(u),
            ReactionScheme::Rk4 => {
                let k1 = g(u);
                let k2 = g(u + 0.5 * dt * k1);
                let k3 = g(u + 0.5 * dt * k2);
                let k4 = g(u + dt * k3);
                u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
        }
    }
}

/// Discretization of the cell problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellNumerics {
    pub nodes: usize,
    pub dt: f64,
    /// Snapshot every `stride` steps.
    pub stride: usize,
    pub scheme: ReactionScheme,
}

impl Default for CellNumerics {
    fn default() -> Self {
        Self {
            nodes: 64,
            dt: 1e-3,
            stride: 1,
            scheme: ReactionScheme::Rk4,
        }
    }
}

impl CellNumerics {
    fn check(&self) -> Result<()> {
        if self.nodes < TorusField::MIN_NODES {
            return Err(KppError::InvalidParameter(format!(
                "cell grid needs N >= 8, got {}",
                self.nodes
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(KppError::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.stride == 0 {
            return Err(KppError::InvalidParameter("stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Lie splitting: explicit reaction, then backward-Euler periodic diffusion.
struct CellStepper<'a> {
    f: &'a Nonlinearity,
    xs: Vec<f64>,
    h: f64,
    dt: f64,
    scheme: ReactionScheme,
    diffusion: CyclicTridiagonalFactor,
}

fn diffusion_factor(n: usize, h: f64, dt: f64) -> Result<CyclicTridiagonalFactor> {
    let r = dt / (h * h);
    let diag = vec![1.0 + 2.0 * r; n];
    let off = vec![-r; n];
    CyclicTridiagonalFactor::new(&off, &diag, &off, -r, -r)
}

impl<'a> CellStepper<'a> {
    fn new(f: &'a Nonlinearity, n: usize, dt: f64, scheme: ReactionScheme) -> Result<Self> {
        let h = f.period() / n as f64;
        Ok(Self {
            f,
            xs: (0..n).map(|i| i as f64 * h).collect(),
            h,
            dt,
            scheme,
            diffusion: diffusion_factor(n, h, dt)?,
        })
    }

    fn react(&self, u: &mut [f64], dt: f64) {
        for (v, &x) in u.iter_mut().zip(&self.xs) {
            *v = self.scheme.advance(|s| self.f.eval(x, s), *v, dt);
        }
    }

    /// Advances `u` by `dt` (or by a shorter `partial` step), returning an
    /// error if a node leaves `[0, 1]` by more than the slack.
    fn step(&self, u: &mut [f64], time: f64, partial: Option<f64>) -> Result<()> {
        match partial {
            None => {
                self.react(u, self.dt);
                self.diffusion.solve_in_place(u);
            }
            Some(dt) => {
                self.react(u, dt);
                diffusion_factor(u.len(), self.h, dt)?.solve_in_place(u);
            }
        }
        clamp_unit(u, time)
    }
}

pub(crate) fn clamp_unit(u: &mut [f64], time: f64) -> Result<()> {
    for v in u.iter_mut() {
        if !(*v >= -STABILITY_SLACK && *v <= 1.0 + STABILITY_SLACK) {
            return Err(KppError::Stability { time, value: *v });
        }
        *v = v.clamp(0.0, 1.0);
    }
    Ok(())
}

fn mean(u: &[f64]) -> f64 {
    u.iter().sum::<f64>() / u.len() as f64
}

/// Time-stamped snapshots of a cell evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTrajectory {
    pub period: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub means: Vec<f64>,
}

impl CellTrajectory {
    pub fn final_field(&self) -> TorusField {
        TorusField {
            period: self.period,
            values: self.snapshots.last().expect("trajectory is never empty").clone(),
        }
    }

    pub fn final_mean(&self) -> f64 {
        *self.means.last().expect("trajectory is never empty")
    }

    fn push(&mut self, t: f64, u: &[f64]) {
        self.times.push(t);
        self.means.push(mean(u));
        self.snapshots.push(u.to_vec());
    }
}

fn check_init(f: &Nonlinearity, init: &TorusField) -> Result<()> {
    if (init.period - f.period()).abs() > 1e-12 * f.period() {
        return Err(KppError::InvalidParameter(format!(
            "field period {} differs from reaction period {}",
            init.period,
            f.period()
        )));
    }
    if init.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(KppError::InvalidParameter(
            "initial cell data must lie in [0, 1]".into(),
        ));
    }
    Ok(())
}

/// Integer number of full steps and the remainder that lands exactly on `horizon`.
fn step_plan(horizon: f64, dt: f64) -> (usize, Option<f64>) {
    let full = (horizon / dt * (1.0 + 1e-12)).floor() as usize;
    let rem = horizon - full as f64 * dt;
    if rem > 1e-9 * dt {
        (full, Some(rem))
    } else {
        (full, None)
    }
}

/// Evolves `init` for `horizon` time units.
pub fn evolve_cell(
    f: &Nonlinearity,
    init: &TorusField,
    horizon: f64,
    numerics: &CellNumerics,
) -> Result<CellTrajectory> {
    numerics.check()?;
    check_init(f, init)?;
    if !(horizon >= 0.0) {
        return Err(out_of_range("horizon", horizon, "[0, inf)"));
    }
    let stepper = CellStepper::new(f, init.len(), numerics.dt, numerics.scheme)?;
    let mut traj = CellTrajectory {
        period: init.period,
        dt: numerics.dt,
        times: Vec::new(),
        snapshots: Vec::new(),
        means: Vec::new(),
    };
    let mut u = init.values.clone();
    traj.push(0.0, &u);
    let (full, rem) = step_plan(horizon, numerics.dt);
    let mut t = 0.0;
    for k in 1..=full {
        t = k as f64 * numerics.dt;
        stepper.step(&mut u, t, None)?;
        if k % numerics.stride == 0 || (k == full && rem.is_none()) {
            traj.push(t, &u);
        }
    }
    if let Some(dt) = rem {
        stepper.step(&mut u, horizon, Some(dt))?;
        t = horizon;
        traj.push(t, &u);
    }
    if traj.times.len() == 1 && horizon > 0.0 {
        traj.push(t, &u);
    }
    Ok(traj)
}

/// Final field only, without storing snapshots.
pub fn evolve_cell_final(
    f: &Nonlinearity,
    init: &TorusField,
    horizon: f64,
    numerics: &CellNumerics,
) -> Result<TorusField> {
    numerics.check()?;
    check_init(f, init)?;
    let stepper = CellStepper::new(f, init.len(), numerics.dt, numerics.scheme)?;
    let mut u = init.values.clone();
    let (full, rem) = step_plan(horizon, numerics.dt);
    for k in 1..=full {
        stepper.step(&mut u, k as f64 * numerics.dt, None)?;
    }
    if let Some(dt) = rem {
        stepper.step(&mut u, horizon, Some(dt))?;
    }
    TorusField::new(init.period, u)
}

/// Solution of the terminal-value problem: the constant start `B` whose
/// evolution has spatial mean `m` at time `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalValueResult {
    pub b: f64,
    pub m: f64,
    pub horizon: f64,
    pub terminal_mean: f64,
    pub iterations: usize,
    pub trajectory: CellTrajectory,
}

pub const DEFAULT_MEAN_TOL: f64 = 1e-8;

fn terminal_mean(f: &Nonlinearity, level: f64, horizon: f64, numerics: &CellNumerics) -> Result<f64> {
    let init = TorusField::constant(f.period(), numerics.nodes, level)?;
    Ok(evolve_cell_final(f, &init, horizon, numerics)?.mean())
}

/// Bisection (on `log B`) over the bracket `[1e-14, m]`.
pub fn solve_terminal_value(
    f: &Nonlinearity,
    m: f64,
    horizon: f64,
    tol: f64,
    numerics: &CellNumerics,
) -> Result<TerminalValueResult> {
    let (b, terminal, iterations) = bisect_start_level(f, m, horizon, tol, numerics)?;
    let init = TorusField::constant(f.period(), numerics.nodes, b)?;
    let trajectory = evolve_cell(f, &init, horizon, numerics)?;
    debug_assert!((trajectory.final_mean() - terminal).abs() < 1e-14);
    Ok(TerminalValueResult {
        b,
        m,
        horizon,
        terminal_mean: terminal,
        iterations,
        trajectory,
    })
}

/// `B(m, T)` without the stored trajectory.
pub fn terminal_start_level(f: &Nonlinearity, m: f64, horizon: f64, tol: f64, numerics: &CellNumerics) -> Result<f64> {
    Ok(bisect_start_level(f, m, horizon, tol, numerics)?.0)
}

fn bisect_start_level(
    f: &Nonlinearity,
    m: f64,
    horizon: f64,
    tol: f64,
    numerics: &CellNumerics,
) -> Result<(f64, f64, usize)> {
    if !(m > 0.0 && m < 1.0) {
        return Err(out_of_range("m", m, "(0, 1)"));
    }
    if !(horizon > 0.0) {
        return Err(out_of_range("T", horizon, "(0, inf)"));
    }
    numerics.check()?;
    let upper = terminal_mean(f, m, horizon, numerics)?;
    if upper < m - tol {
        return Err(KppError::Bracket(format!(
            "terminal mean {upper} from the constant start m = {m} stays below the target"
        )));
    }
    if (upper - m).abs() <= tol {
        return Ok((m, upper, 0));
    }
    let lower = terminal_mean(f, B_FLOOR, horizon, numerics)?;
    if lower > m + tol {
        return Err(KppError::HorizonTooLong(format!(
            "even B = {B_FLOOR:e} reaches mean {lower} > {m} by T = {horizon}"
        )));
    }
    let (mut lo, mut hi) = (B_FLOOR, m);
    let (mut best, mut best_mean) = if (lower - m).abs() < (upper - m).abs() {
        (lo, lower)
    } else {
        (hi, upper)
    };
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        iterations += 1;
        let mid = (lo * hi).sqrt();
        let value = terminal_mean(f, mid, horizon, numerics)?;
        if (value - m).abs() < (best_mean - m).abs() {
            best = mid;
            best_mean = value;
        }
        if (value - m).abs() <= tol {
            break;
        }
        if value < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((best, best_mean, iterations))
}

/// `B(m, T)` for several horizons, solved concurrently.
pub fn terminal_start_levels(
    f: &Nonlinearity,
    m: f64,
    horizons: &[f64],
    tol: f64,
    numerics: &CellNumerics,
) -> Result<Vec<f64>> {
    horizons
        .par_iter()
        .map(|&t| terminal_start_level(f, m, t, tol, numerics))
        .collect()
}

/// The entire solution of the cell problem, re-indexed so that its mean is
/// 1/2 at `t = 0`, with the asymptotic constants of its exponential tails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSolution {
    pub period: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// `phi ~ alpha psi0 e^{f0 t}` as `t -> -inf`.
    pub alpha: f64,
    /// `1 - phi ~ omega psi1 e^{-f1 t}` as `t -> +inf`.
    pub omega: f64,
    pub f0: f64,
    pub f1: f64,
    pub psi0: EigenPair,
    pub psi1: EigenPair,
    /// Start level denominator: the construction starts from the constant `1/n`.
    pub n_start: f64,
    /// Time of the raw start relative to the mean-1/2 anchor.
    pub start_time: f64,
}

/// Settings for [`construct_global_solution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalOptions {
    /// Early-window threshold on `max phi` for extracting `alpha`.
    pub low_threshold: f64,
    /// Late-window threshold on `min phi` for extracting `omega`.
    pub high_threshold: f64,
    /// Time discarded after the constant start; `None` picks a multiple of the
    /// diffusive relaxation time `L² / (4 pi²)` (none for homogeneous reactions).
    pub burn_in: Option<f64>,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self {
            low_threshold: 0.01,
            high_threshold: 0.99,
            burn_in: None,
        }
    }
}

pub fn construct_global_solution(
    f: &Nonlinearity,
    n: f64,
    t_max: f64,
    numerics: &CellNumerics,
) -> Result<GlobalSolution> {
    construct_global_solution_with(f, n, t_max, numerics, &GlobalOptions::default())
}

pub fn construct_global_solution_with(
    f: &Nonlinearity,
    n: f64,
    t_max: f64,
    numerics: &CellNumerics,
    opts: &GlobalOptions,
) -> Result<GlobalSolution> {
    if !(n >= 10.0) {
        return Err(out_of_range("n", n, "[10, inf)"));
    }
    if !(t_max > 0.0) {
        return Err(out_of_range("t_max", t_max, "(0, inf)"));
    }
    numerics.check()?;
    let psi0 = eigenpair_at_zero(f, numerics.nodes)?;
    let psi1 = eigenpair_at_one(f, numerics.nodes)?;
    let f0 = psi0.rate();
    let f1 = psi1.rate();
    let stepper = CellStepper::new(f, numerics.nodes, numerics.dt, numerics.scheme)?;
    let dt = numerics.dt;

    // phase 1: from 1/n until the mean crosses 1/2
    let cap = 4.0 * n.ln() / f0 + 50.0;
    let mut u = vec![1.0 / n; numerics.nodes];
    let mut raw_times = vec![0.0];
    let mut raw: Vec<Vec<f64>> = vec![u.clone()];
    let mut k = 0usize;
    let anchor;
    let crossing;
    loop {
        let prev = u.clone();
        k += 1;
        let t = k as f64 * dt;
        if t > cap {
            return Err(KppError::HorizonTooLong(format!(
                "mean never reached 1/2 within the horizon cap {cap:.1}"
            )));
        }
        stepper.step(&mut u, t, None)?;
        if mean(&u) >= 0.5 {
            let (theta, state) = land_on_half(&stepper, &prev, mean(&u), (k - 1) as f64 * dt)?;
            crossing = (k - 1) as f64 * dt + theta * dt;
            anchor = state;
            break;
        }
        if k.is_multiple_of(numerics.stride) {
            raw_times.push(t);
            raw.push(u.clone());
        }
    }

    // constant data is already the principal mode of a homogeneous reaction
    let relax = if f.is_homogeneous() {
        0.0
    } else {
        (10.0 * f.period().powi(2) / (4.0 * std::f64::consts::PI.powi(2))).max(1.0)
    };
    let burn = opts.burn_in.unwrap_or(relax).min(0.5 * crossing);
    let h = f.period() / numerics.nodes as f64;
    let project = |s: &[f64], w: &[f64]| h * s.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    // the projection on psi0 grows like e^{f0 t} in the linear regime whatever
    // the other modes do, so the burn-in snapshots count here
    let early: Vec<f64> = raw_times
        .iter()
        .zip(&raw)
        .filter(|(_, s)| s.iter().copied().fold(0.0, f64::max) <= opts.low_threshold)
        .map(|(&t, s)| (-f0 * (t - crossing)).exp() * project(s, &psi0.eigenfunction.values))
        .collect();
    if early.is_empty() {
        return Err(KppError::Extraction(format!(
            "no snapshot below {}; increase n (got {n})",
            opts.low_threshold
        )));
    }

    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    for (t, s) in raw_times.into_iter().zip(raw) {
        if t >= burn && t < crossing {
            times.push(t - crossing);
            snapshots.push(s);
        }
    }
    times.push(0.0);
    snapshots.push(anchor.clone());

    // phase 2: from the anchor to t_max
    let mut u = anchor;
    let (full, rem) = step_plan(t_max, dt);
    for j in 1..=full {
        let t = j as f64 * dt;
        stepper.step(&mut u, t, None)?;
        if j % numerics.stride == 0 || (j == full && rem.is_none()) {
            times.push(t);
            snapshots.push(u.clone());
        }
    }
    if let Some(r) = rem {
        stepper.step(&mut u, t_max, Some(r))?;
        times.push(t_max);
        snapshots.push(u.clone());
    }
    let means: Vec<f64> = snapshots.iter().map(|s| mean(s)).collect();

    let late: Vec<f64> = times
        .iter()
        .zip(&snapshots)
        .filter(|(_, s)| s.iter().copied().fold(1.0, f64::min) >= opts.high_threshold)
        .map(|(&t, s)| {
            let gap: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
            (f1 * t).exp() * project(&gap, &psi1.eigenfunction.values)
        })
        .collect();
    if late.is_empty() {
        return Err(KppError::Extraction(format!(
            "no snapshot above {} before t_max = {t_max}; increase t_max",
            opts.high_threshold
        )));
    }
    let alpha = early.iter().sum::<f64>() / early.len() as f64;
    let omega = late.iter().sum::<f64>() / late.len() as f64;

    Ok(GlobalSolution {
        period: f.period(),
        dt,
        times,
        snapshots,
        means,
        alpha,
        omega,
        f0,
        f1,
        psi0,
        psi1,
        n_start: n,
        start_time: -crossing,
    })
}

/// Finds the fraction `theta` of a step from `prev` that lands the mean on 1/2.
fn land_on_half(stepper: &CellStepper<'_>, prev: &[f64], full_mean: f64, t0: f64) -> Result<(f64, Vec<f64>)> {
    let advance = |theta: f64| -> Result<Vec<f64>> {
        let mut u = prev.to_vec();
        stepper.step(&mut u, t0 + theta * stepper.dt, Some(theta * stepper.dt))?;
        Ok(u)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut m_lo, mut m_hi) = (mean(prev), full_mean);
    let mut theta = 1.0;
    for _ in 0..100 {
        // regula falsi with bisection fallback
        let guess = lo + (0.5 - m_lo) * (hi - lo) / (m_hi - m_lo);
        theta = if guess > lo && guess < hi {
            guess
        } else {
            0.5 * (lo + hi)
        };
        let m = mean(&advance(theta)?);
        if (m - 0.5).abs() <= 1e-14 || hi - lo < 1e-15 {
            break;
        }
        if m < 0.5 {
            lo = theta;
            m_lo = m;
        } else {
            hi = theta;
            m_hi = m;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((theta, advance(theta)?))
}

impl GlobalSolution {
    pub fn t_min(&self) -> f64 {
        self.times[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn nodes(&self) -> usize {
        self.snapshots[0].len()
    }

    /// Bracketing snapshot indices and weight for `t` inside the stored range.
    fn locate(&self, t: f64) -> (usize, usize, f64) {
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        (k - 1, k, ((t - ta) / (tb - ta)).clamp(0.0, 1.0))
    }

    /// `phi(t, .)` on the cell grid. Outside the stored range the linearized
    /// tails continue the first and last snapshots exponentially.
    pub fn field_at(&self, t: f64) -> Vec<f64> {
        if t < self.t_min() {
            let g = (self.f0 * (t - self.t_min())).exp();
            return self.snapshots[0].iter().map(|v| v * g).collect();
        }
        if t > self.t_max() {
            let g = (-self.f1 * (t - self.t_max())).exp();
            return self
                .snapshots
                .last()
                .unwrap()
                .iter()
                .map(|v| 1.0 - (1.0 - v) * g)
                .collect();
        }
        let (a, b, w) = self.locate(t);
        self.snapshots[a]
            .iter()
            .zip(&self.snapshots[b])
            .map(|(x, y)| x * (1.0 - w) + y * w)
            .collect()
    }

    pub fn mean_at(&self, t: f64) -> f64 {
        mean(&self.field_at(t))
    }

    /// `phi(t, x)` for any real `x`, periodically and linearly interpolated.
    pub fn value_at(&self, t: f64, x: f64) -> f64 {
        let field = self.field_at(t);
        periodic_interp(&field, self.period, x)
    }

    /// `T_m`: time at which the spatial mean equals `m`.
    pub fn mean_crossing_time(&self, m: f64) -> Result<f64> {
        let first = self.means[0];
        let last = *self.means.last().unwrap();
        if !(m >= first && m <= last) {
            return Err(out_of_range("m", m, format!("[{first:e}, {last}] (attained means)")));
        }
        let k = self.means.partition_point(|&v| v < m).clamp(1, self.means.len() - 1);
        let (ma, mb) = (self.means[k - 1], self.means[k]);
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        if mb == ma {
            return Ok(ta);
        }
        Ok(ta + (m - ma) * (tb - ta) / (mb - ma))
    }

    /// `max_x |phi(t_min,x) / (psi0(x) e^{f0 t_min}) - alpha| / alpha`.
    pub fn alpha_deviation(&self) -> f64 {
        let t = self.t_min();
        self.snapshots[0]
            .iter()
            .zip(&self.psi0.eigenfunction.values)
            .map(|(v, p)| (v / (p * (self.f0 * t).exp()) - self.alpha).abs() / self.alpha)
            .fold(0.0, f64::max)
    }

    /// Same as [`Self::alpha_deviation`] for `omega` at `t_max`.
    pub fn omega_deviation(&self) -> f64 {
        let t = self.t_max();
        self.snapshots
            .last()
            .unwrap()
            .iter()
            .zip(&self.psi1.eigenfunction.values)
            .map(|(v, p)| ((1.0 - v) / (p * (-self.f1 * t).exp()) - self.omega).abs() / self.omega)
            .fold(0.0, f64::max)
    }
}

pub(crate) fn periodic_interp(values: &[f64], period: f64, x: f64) -> f64 {
    let n = values.len();
    let s = x.rem_euclid(period) / period * n as f64;
    let i = (s.floor() as usize).min(n - 1);
    let w = s - i as f64;
    if w < 1e-12 {
        return values[i];
    }
    values[i] * (1.0 - w) + values[(i + 1) % n] * w
}

/// Sup-norm distance between two global solutions at the given times.
pub fn trajectory_distance(a: &GlobalSolution, b: &GlobalSolution, times: &[f64]) -> f64 {
    times
        .iter()
        .map(|&t| {
            a.field_at(t)
                .iter()
                .zip(b.field_at(t))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Principal left eigenvector of the one-step map linearized at 0, normalized
/// by `∫w² = 1`. It is the time-discrete counterpart of `psi0` (equal to it
/// for homogeneous reactions, within O(dt) otherwise) and its projection
/// grows by exactly the same factor every step in the linear regime.
pub fn stepper_mode(f: &Nonlinearity, numerics: &CellNumerics) -> Result<Vec<f64>> {
    numerics.check()?;
    let n = numerics.nodes;
    let h = f.period() / n as f64;
    let gain: Vec<f64> = f
        .du_at_zero_samples(n)
        .iter()
        .map(|&q| numerics.scheme.advance(|u| q * u, 1.0, numerics.dt))
        .collect();
    let diffusion = diffusion_factor(n, h, numerics.dt)?;
    let mut w = vec![1.0; n];
    for _ in 0..200_000 {
        let prev = w.clone();
        diffusion.solve_in_place(&mut w);
        w.iter_mut().zip(&gain).for_each(|(v, g)| *v *= g);
        let norm = (h * w.iter().map(|v| v * v).sum::<f64>()).sqrt();
        w.iter_mut().for_each(|v| *v /= norm);
        if w.iter().zip(&prev).all(|(a, b)| (a - b).abs() <= 1e-15) {
            return Ok(w);
        }
    }
    Err(KppError::NonConvergence("power iteration for the stepper mode".into()))
}

/// `B(m,T) ∫w / ∫ phi(T_m - T, x) w(x) dx` for each `T`, with `w` the
/// [`stepper_mode`]. Projections are interpolated log-linearly in time.
pub fn ratio_limit_check(
    f: &Nonlinearity,
    global: &GlobalSolution,
    m: f64,
    horizons: &[f64],
    tol: f64,
    numerics: &CellNumerics,
) -> Result<Vec<(f64, f64)>> {
    if global.nodes() != numerics.nodes || (global.dt - numerics.dt).abs() > 1e-15 {
        return Err(KppError::InvalidParameter(
            "global solution and terminal solves must share the cell grid and step".into(),
        ));
    }
    let t_m = global.mean_crossing_time(m)?;
    let w = stepper_mode(f, numerics)?;
    let h = f.period() / numerics.nodes as f64;
    let project = |s: &[f64]| h * s.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let w_integral = h * w.iter().sum::<f64>();
    let levels = terminal_start_levels(f, m, horizons, tol, numerics)?;
    let mut out = Vec::with_capacity(horizons.len());
    for (&t, b) in horizons.iter().zip(levels) {
        let at = t_m - t;
        if at < global.t_min() {
            return Err(out_of_range(
                "T_m - T",
                at,
                format!("[{}, {}]", global.t_min(), global.t_max()),
            ));
        }
        let (a, c, weight) = global.locate(at);
        let (pa, pc) = (project(&global.snapshots[a]), project(&global.snapshots[c]));
        let proj = (pa.ln() * (1.0 - weight) + pc.ln() * weight).exp();
        out.push((t, b * w_integral / proj));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::{make_fisher, make_periodic_fisher};

    #[test]
    fn constant_data_follows_logistic() {
        let f = make_fisher();
        let init = TorusField::constant(1.0, 16, 0.5).unwrap();
        let traj = evolve_cell(&f, &init, 3f64.ln(), &CellNumerics::default()).unwrap();
        assert!((traj.times.last().unwrap() - 3f64.ln()).abs() < 1e-15);
        for v in traj.final_field().values {
            assert!((v - 0.75).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn equilibria_are_fixed() {
        let f = make_periodic_fisher(0.5, 1.0).unwrap();
        for c in [0.0, 1.0] {
            let init = TorusField::constant(1.0, 32, c).unwrap();
            let traj = evolve_cell(&f, &init, 2.0, &CellNumerics::default()).unwrap();
            for s in &traj.snapshots {
                assert!(s.iter().all(|&v| (v - c).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn large_step_is_unstable() {
        let f = make_fisher();
        let init = TorusField::constant(1.0, 16, 0.5).unwrap();
        let numerics = CellNumerics {
            dt: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            evolve_cell(&f, &init, 20.0, &numerics),
            Err(KppError::Stability { .. })
        ));
    }

    #[test]
    fn terminal_value_homogeneous() {
        let f = make_fisher();
        let numerics = CellNumerics {
            nodes: 8,
            ..Default::default()
        };
        let r = solve_terminal_value(&f, 0.5, 3f64.ln(), DEFAULT_MEAN_TOL, &numerics).unwrap();
        assert!((r.b - 0.25).abs() < 1e-6, "{}", r.b);
        assert!((r.terminal_mean - 0.5).abs() <= DEFAULT_MEAN_TOL);
        assert!((r.trajectory.means[0] - r.b).abs() < 1e-15);
    }

    #[test]
    fn terminal_value_short_horizon() {
        // B ≈ m - f(m) T for small T
        let f = make_fisher();
        let numerics = CellNumerics {
            nodes: 8,
            dt: 1e-4,
            ..Default::default()
        };
        let b = terminal_start_level(&f, 0.5, 1e-3, 1e-12, &numerics).unwrap();
        assert!((b - 0.49975).abs() < 1e-7, "{b}");
    }

    #[test]
    fn terminal_value_errors() {
        let f = make_fisher();
        let numerics = CellNumerics {
            nodes: 8,
            dt: 1e-2,
            ..Default::default()
        };
        assert!(matches!(
            solve_terminal_value(&f, 0.5, 40.0, 1e-8, &numerics),
            Err(KppError::HorizonTooLong(_))
        ));
        assert!(solve_terminal_value(&f, 1.5, 1.0, 1e-8, &numerics).is_err());
        // a reaction that decays pushes the mean down: the upper bracket fails
        let decay = Nonlinearity::custom(
            "decay",
            1.0,
            crate::reaction::ReactionKind::Homogeneous,
            |_, u| -u,
            |_| -1.0,
            |_| -1.0,
        )
        .unwrap();
        assert!(matches!(
            solve_terminal_value(&decay, 0.5, 1.0, 1e-8, &numerics),
            Err(KppError::Bracket(_))
        ));
    }

    #[test]
    fn global_solution_fisher_constants() {
        let f = make_fisher();
        let numerics = CellNumerics {
            nodes: 8,
            ..Default::default()
        };
        let g = construct_global_solution(&f, 1e4, 15.0, &numerics).unwrap();
        assert!((g.mean_at(0.0) - 0.5).abs() <= 1e-8);
        assert!((g.alpha - 1.0).abs() < 0.01, "alpha {}", g.alpha);
        assert!((g.omega - 1.0).abs() < 0.01, "omega {}", g.omega);
        assert!(g.alpha_deviation() <= 0.01);
        assert!(g.omega_deviation() <= 0.01);
        assert!(g.mean_crossing_time(0.5).unwrap().abs() < 1e-12);
        assert!((g.mean_crossing_time(0.75).unwrap() - 3f64.ln()).abs() < 1e-5);
        assert!(g.mean_crossing_time(1e-9).is_err());
    }

    #[test]
    fn stepper_mode_is_constant_for_homogeneous() {
        let w = stepper_mode(&make_fisher(), &CellNumerics::default()).unwrap();
        assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let f = make_periodic_fisher(0.5, 1.0).unwrap();
        let w = stepper_mode(&f, &CellNumerics::default()).unwrap();
        let psi = eigenpair_at_zero(&f, 64).unwrap().eigenfunction;
        let gap = w
            .iter()
            .zip(&psi.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-2 && gap > 0.0, "{gap}");
    }

    #[test]
    fn global_solution_needs_room() {
        let f = make_fisher();
        let numerics = CellNumerics {
            nodes: 8,
            ..Default::default()
        };
        assert!(matches!(
            construct_global_solution(&f, 10.0, 15.0, &numerics),
            Err(KppError::Extraction(_))
        ));
        assert!(construct_global_solution(&f, 5.0, 15.0, &numerics).is_err());
    }

    #[test]
    fn reaction_midpoint_mean_identity_is_second_order() {
        // (mean_{k+1} - mean_k)/dt equals mean f at the reaction half step to O(dt²)
        let f = make_periodic_fisher(0.5, 1.0).unwrap();
        let init = TorusField::from_fn(1.0, 32, |x| 0.3 + 0.2 * (2.0 * std::f64::consts::PI * x).sin()).unwrap();
        let mut errors = Vec::new();
        for dt in [4e-2, 2e-2, 1e-2] {
            let stepper = CellStepper::new(&f, 32, dt, ReactionScheme::Rk4).unwrap();
            let mut u = init.values.clone();
            let before = mean(&u);
            let mut half = init.values.clone();
            stepper.react(&mut half, 0.5 * dt);
            let rate = half.iter().zip(&stepper.xs).map(|(&v, &x)| f.eval(x, v)).sum::<f64>() / 32.0;
            stepper.step(&mut u, dt, None).unwrap();
            errors.push(((mean(&u) - before) / dt - rate).abs());
        }
        assert!(errors[0] / errors[1] > 3.5 && errors[1] / errors[2] > 3.5, "{errors:?}");
    }
}

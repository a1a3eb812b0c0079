//! The homogeneous saturation ODE `phi' = f(phi)` normalized by `phi(0) = 1/2`,
//! its level times `T_m`, and the resulting level-set predictions.

use crate::error::{out_of_range, KppError, Result};
use crate::profiles::{inverse_tail, InitialData};
use crate::reaction::Nonlinearity;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_RANGE: (f64, f64) = (-60.0, 30.0);
const MIN_STEP: f64 = 1e-14;
// keeps the cubic Hermite dense output near round-off
const MAX_STEP: f64 = 5e-3;
const MAX_STEPS: usize = 1_000_000;

/// Dense solution of `phi' = f(phi)` through `phi(0) = 1/2`.
#[derive(Debug, Clone)]
pub struct LogisticProfile {
    reaction: Nonlinearity,
    /// Accepted nodes `(t, phi, phi')`, sorted by time.
    nodes: Vec<(f64, f64, f64)>,
    rate_at_zero: f64,
    rate_at_one: f64,
}

// Dormand-Prince 5(4) tableau; the ODE is autonomous so the nodes c_i are unused
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates the scalar autonomous ODE `y' = g(y)` from `(0, y0)` to `t_end > 0`
/// with relative local error control, returning the accepted `(t, y, y')` nodes.
fn integrate(g: &dyn Fn(f64) -> f64, y0: f64, t_end: f64, tol: f64) -> Result<Vec<(f64, f64, f64)>> {
    let mut t = 0.0;
    let mut y = y0;
    let mut dy = g(y);
    let mut nodes = vec![(t, y, dy)];
    let mut h = 1e-2_f64.min(t_end);
    let mut steps = 0;
    while t < t_end {
        if steps > MAX_STEPS {
            return Err(KppError::NonConvergence("adaptive ODE step limit reached".into()));
        }
        steps += 1;
        h = h.min(t_end - t).min(MAX_STEP);
        let mut k = [0.0; 7];
        k[0] = dy;
        for s in 1..7 {
            let ys = y + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            k[s] = g(ys);
        }
        let y5 = y + h * (0..7).map(|j| B5[j] * k[j]).sum::<f64>();
        let y4 = y + h * (0..7).map(|j| B4[j] * k[j]).sum::<f64>();
        let scale = tol * y.abs().max(y5.abs()) + f64::MIN_POSITIVE;
        let err = ((y5 - y4).abs() / scale).max(1e-300);
        if err <= 1.0 {
            t += h;
            y = y5;
            dy = k[6];
            nodes.push((t, y, dy));
        }
        let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h *= factor;
        if h < MIN_STEP && t < t_end {
            return Err(KppError::NonConvergence(format!("step size underflow at t = {t}")));
        }
    }
    Ok(nodes)
}

/// Builds the dense profile on `[t_lo, t_hi]` (`t_lo < 0 < t_hi`).
pub fn solve_profile(f: &Nonlinearity, t_range: (f64, f64), tol: f64) -> Result<LogisticProfile> {
    if !f.is_homogeneous() {
        return Err(KppError::InvalidParameter(format!(
            "the logistic profile needs a homogeneous reaction, got {}",
            f.name()
        )));
    }
    let (t_lo, t_hi) = t_range;
    if !(t_lo < 0.0 && 0.0 < t_hi) {
        return Err(KppError::InvalidParameter(format!(
            "need t_lo < 0 < t_hi, got [{t_lo}, {t_hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(KppError::InvalidParameter("tolerance must be positive".into()));
    }
    let forward = {
        let f = f.clone();
        move |y: f64| f.eval(0.0, y)
    };
    let backward = {
        let f = f.clone();
        move |y: f64| -f.eval(0.0, y)
    };
    let ahead = integrate(&forward, 0.5, t_hi, tol)?;
    let behind = integrate(&backward, 0.5, -t_lo, tol)?;
    let mut nodes: Vec<(f64, f64, f64)> = behind.iter().skip(1).rev().map(|&(s, y, dy)| (-s, y, -dy)).collect();
    nodes.extend(ahead);
    Ok(LogisticProfile {
        reaction: f.clone(),
        nodes,
        rate_at_zero: f.du_at_zero(0.0),
        rate_at_one: f.du_at_one(0.0),
    })
}

pub fn solve_profile_default(f: &Nonlinearity) -> Result<LogisticProfile> {
    solve_profile(f, DEFAULT_RANGE, DEFAULT_TOL)
}

impl LogisticProfile {
    pub fn reaction(&self) -> &Nonlinearity {
        &self.reaction
    }

    pub fn t_min(&self) -> f64 {
        self.nodes[0].0
    }

    pub fn t_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].0
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `phi(t)`: cubic Hermite between accepted steps, linearized
    /// exponentials outside the integrated range.
    pub fn eval(&self, t: f64) -> f64 {
        let (t0, y0, _) = self.nodes[0];
        if t <= t0 {
            return y0 * (self.rate_at_zero * (t - t0)).exp();
        }
        let (t1, y1, _) = self.nodes[self.nodes.len() - 1];
        if t >= t1 {
            return 1.0 - (1.0 - y1) * (self.rate_at_one * (t - t1)).exp();
        }
        let k = self.nodes.partition_point(|n| n.0 <= t);
        let (ta, ya, da) = self.nodes[k - 1];
        let (tb, yb, db) = self.nodes[k];
        let h = tb - ta;
        let s = (t - ta) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * ya
            + (s3 - 2.0 * s2 + s) * h * da
            + (-2.0 * s3 + 3.0 * s2) * yb
            + (s3 - s2) * h * db
    }

    /// `T_m` with `phi(T_m) = m`.
    pub fn level_time(&self, m: f64) -> Result<f64> {
        if !(m > 0.0 && m < 1.0) {
            return Err(out_of_range("m", m, "(0, 1)"));
        }
        let (t0, y0, _) = self.nodes[0];
        let (t1, y1, _) = self.nodes[self.nodes.len() - 1];
        if m <= y0 {
            return Ok(t0 + (m / y0).ln() / self.rate_at_zero);
        }
        if m >= y1 {
            return Ok(t1 + ((1.0 - m) / (1.0 - y1)).ln() / self.rate_at_one);
        }
        let k = self.nodes.partition_point(|n| n.1 <= m);
        let (mut lo, mut hi) = (self.nodes[k - 1].0, self.nodes[k].0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let pick = if (self.eval(lo) - m).abs() <= (self.eval(hi) - m).abs() {
            lo
        } else {
            hi
        };
        Ok(pick)
    }

    /// `u0^{-1}(phi(T_m - T))`.
    pub fn predict_level_position(&self, u0: &InitialData, m: f64, horizon: f64) -> Result<f64> {
        let level = self.eval(self.level_time(m)? - horizon);
        inverse_tail(u0, level)
    }

    /// Homogeneous analogue of the cell terminal value: the constant start
    /// that reaches `m` after `horizon`.
    pub fn terminal_start(&self, m: f64, horizon: f64) -> Result<f64> {
        Ok(self.eval(self.level_time(m)? - horizon))
    }
}

/// Fixed-step classical RK4 for `y' = g(y)`; a test and cross-check oracle.
pub fn rk4_fixed(g: impl Fn(f64) -> f64, y0: f64, t_end: f64, steps: usize) -> f64 {
    let h = t_end / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = g(y);
        let k2 = g(y + 0.5 * h * k1);
        let k3 = g(y + 0.5 * h * k2);
        let k4 = g(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

//! Principal eigenpair of `d²/dx² + q(x)` on the torus `[0, L)`.

use serde::{Deserialize, Serialize};

use crate::error::{KppError, Result};
use crate::field::{periodic_second_difference, CyclicTridiagonalFactor, TorusField};
use crate::reaction::Nonlinearity;

pub const DEFAULT_NODES: usize = 512;
const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialTag {
    /// `q = f_u(x, 0)`.
    AtZero,
    /// `q = f_u(x, 1)`; the eigenvalue is minus the decay rate near saturation.
    AtOne,
    Custom,
}

/// Largest eigenvalue of the periodic discrete operator `D² + q` and its
/// positive eigenvector, normalized by `∫ psi² dx = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub eigenvalue: f64,
    pub eigenfunction: TorusField,
    pub potential: Vec<f64>,
    pub tag: PotentialTag,
    pub iterations: usize,
}

impl EigenPair {
    pub fn len(&self) -> usize {
        self.eigenfunction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenfunction.is_empty()
    }

    /// `∫ psi dx`.
    pub fn integral(&self) -> f64 {
        self.eigenfunction.integral()
    }

    /// Max-node residual `|D² psi + q psi - lambda psi|`.
    pub fn residual(&self) -> f64 {
        operator_residual(&self.eigenfunction, &self.potential, self.eigenvalue)
    }

    /// The exponential rate of the linearized dynamics near this state:
    /// growth `f0` at zero, decay `f1 = -eigenvalue` at one.
    pub fn rate(&self) -> f64 {
        match self.tag {
            PotentialTag::AtOne => -self.eigenvalue,
            _ => self.eigenvalue,
        }
    }
}

fn operator_residual(psi: &TorusField, q: &[f64], lambda: f64) -> f64 {
    let d2 = periodic_second_difference(&psi.values, psi.spacing());
    d2.iter()
        .zip(&psi.values)
        .zip(q)
        .map(|((d, p), q)| (d + q * p - lambda * p).abs())
        .fold(0.0, f64::max)
}

/// Shifted inverse power iteration with shift `max q + 1`.
pub fn principal_eigenpair(q: impl Fn(f64) -> f64, period: f64, n: usize) -> Result<EigenPair> {
    if n < TorusField::MIN_NODES {
        return Err(KppError::InvalidParameter(format!("eigen grid needs N >= 8, got {n}")));
    }
    if !(period > 0.0) {
        return Err(KppError::InvalidParameter(format!(
            "period must be positive, got {period}"
        )));
    }
    let h = period / n as f64;
    let samples: Vec<f64> = (0..n).map(|i| q(i as f64 * h)).collect();
    eigenpair_from_samples(samples, period, PotentialTag::Custom)
}

pub fn eigenpair_from_samples(potential: Vec<f64>, period: f64, tag: PotentialTag) -> Result<EigenPair> {
    let n = potential.len();
    if n < TorusField::MIN_NODES {
        return Err(KppError::InvalidParameter(format!("eigen grid needs N >= 8, got {n}")));
    }
    if potential.iter().any(|v| !v.is_finite()) {
        return Err(KppError::InvalidParameter("potential must be bounded".into()));
    }
    let h = period / n as f64;
    let inv_h2 = 1.0 / (h * h);
    let shift = potential.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    // (shift - D² - q) is symmetric positive definite
    let diag: Vec<f64> = potential.iter().map(|q| shift + 2.0 * inv_h2 - q).collect();
    let off = vec![-inv_h2; n];
    let solver = CyclicTridiagonalFactor::new(&off, &diag, &off, -inv_h2, -inv_h2)?;

    let norm = |v: &[f64]| (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let mut x = vec![1.0 / period.sqrt(); n];
    let mut lambda = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    let mut tol_scale = 1.0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut y = x.clone();
        solver.solve_in_place(&mut y);
        let s = norm(&y);
        if !(s > 0.0) || !s.is_finite() {
            return Err(KppError::NonConvergence(
                "inverse iteration produced a degenerate vector".into(),
            ));
        }
        y.iter_mut().for_each(|v| *v /= s);
        let field = TorusField::new(period, y.clone())?;
        let ay: Vec<f64> = periodic_second_difference(&y, h)
            .iter()
            .zip(&y)
            .zip(&potential)
            .map(|((d, p), q)| d + q * p)
            .collect();
        lambda = h * ay.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        tol_scale = lambda.abs().max(1.0);
        let residual = operator_residual(&field, &potential, lambda);
        let change = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        // round-off floor of the residual grows like eps / h²
        let floor = 64.0 * f64::EPSILON * (4.0 * inv_h2 + shift.abs()) * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residual <= (1e-12 * tol_scale).max(floor) {
            converged = true;
            break;
        }
        if change < 1e-14 {
            converged = residual <= 1e-6 * tol_scale;
            if !converged {
                return Err(KppError::NonConvergence(format!(
                    "inverse iteration stagnated with residual {residual:e}"
                )));
            }
            break;
        }
    }
    let mut psi = TorusField::new(period, x)?;
    if !converged {
        let residual = operator_residual(&psi, &potential, lambda);
        if residual > 1e-6 * tol_scale {
            return Err(KppError::NonConvergence(format!(
                "inverse iteration did not converge in {MAX_ITERATIONS} iterations (residual {residual:e})"
            )));
        }
    }
    // flip so the largest-magnitude node is positive, then demand positivity
    let (imax, _) = psi.values.iter().enumerate().fold(
        (0, 0.0f64),
        |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
    );
    if psi.values[imax] < 0.0 {
        psi.values.iter_mut().for_each(|v| *v = -*v);
    }
    let l2 = psi.inner(&psi).sqrt();
    psi.values.iter_mut().for_each(|v| *v /= l2);
    if psi.values.iter().any(|&v| v <= 0.0) {
        return Err(KppError::Degenerate(
            "principal eigenvector is not positive (discretization failure)".into(),
        ));
    }
    Ok(EigenPair {
        eigenvalue: lambda,
        eigenfunction: psi,
        potential,
        tag,
        iterations,
    })
}

/// `(psi0, f0)` for the linearization at 0.
pub fn eigenpair_at_zero(f: &Nonlinearity, n: usize) -> Result<EigenPair> {
    eigenpair_from_samples(f.du_at_zero_samples(n), f.period(), PotentialTag::AtZero)
}

/// `(psi1, -f1)` for the linearization at 1.
pub fn eigenpair_at_one(f: &Nonlinearity, n: usize) -> Result<EigenPair> {
    eigenpair_from_samples(f.du_at_one_samples(n), f.period(), PotentialTag::AtOne)
}

/// `∫(q psi² - |D psi|²) dx / ∫ psi² dx` with periodic forward differences.
pub fn rayleigh_quotient(psi: &TorusField, q: impl Fn(f64) -> f64) -> Result<f64> {
    let h = psi.spacing();
    let n = psi.len();
    let mass: f64 = psi.values.iter().map(|v| v * v).sum();
    if mass == 0.0 {
        return Err(KppError::Degenerate("Rayleigh quotient of the zero field".into()));
    }
    let mut num = 0.0;
    for i in 0..n {
        let p = psi.values[i];
        let grad = (psi.values[(i + 1) % n] - p) / h;
        num += q(i as f64 * h) * p * p - grad * grad;
    }
    Ok(num / mass)
}

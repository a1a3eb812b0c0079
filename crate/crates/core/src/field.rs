//! Sampled fields on the periodic cell and on a truncated line, plus the
//! banded solvers used by the implicit diffusion step and the eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{KppError, Result};

/// Values at `n` uniform nodes `x_i = i * L / n` on the torus `[0, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusField {
    pub period: f64,
    pub values: Vec<f64>,
}

impl TorusField {
    pub const MIN_NODES: usize = 8;

    pub fn new(period: f64, values: Vec<f64>) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(KppError::InvalidParameter(format!(
                "period must be positive, got {period}"
            )));
        }
        if values.len() < Self::MIN_NODES {
            return Err(KppError::InvalidParameter(format!(
                "torus field needs at least {} nodes, got {}",
                Self::MIN_NODES,
                values.len()
            )));
        }
        Ok(Self { period, values })
    }

    pub fn constant(period: f64, n: usize, value: f64) -> Result<Self> {
        Self::new(period, vec![value; n])
    }

    pub fn from_fn(period: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = period / n as f64;
        Self::new(period, (0..n).map(|i| f(i as f64 * h)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.values.len() as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.len()).map(move |i| i as f64 * h)
    }

    /// Periodic trapezoid rule, which reduces to `h * sum`.
    pub fn integral(&self) -> f64 {
        self.spacing() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn inner(&self, other: &TorusField) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.spacing() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Values at uniform nodes `x_left + i * dx` on a truncated line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineField {
    pub x_left: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl LineField {
    pub fn new(x_left: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(KppError::InvalidParameter(format!("dx must be positive, got {dx}")));
        }
        if values.len() < 3 {
            return Err(KppError::InvalidParameter("line field needs at least 3 nodes".into()));
        }
        Ok(Self { x_left, dx, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_left + i as f64 * self.dx
    }

    pub fn x_right(&self) -> f64 {
        self.x(self.len() - 1)
    }
}

/// Pre-factored tridiagonal system (Thomas algorithm).
///
/// Row `i` reads `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagonalFactor {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n || n == 0 {
            return Err(KppError::InvalidParameter(
                "tridiagonal bands have mismatched lengths".into(),
            ));
        }
        let mut upper_mod = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let pivot = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i] * prev_upper
            };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(KppError::Degenerate(format!(
                    "zero pivot in tridiagonal solve at row {i}"
                )));
            }
            inv_pivot[i] = 1.0 / pivot;
            upper_mod[i] = upper[i] * inv_pivot[i];
            prev_upper = upper_mod[i];
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper_mod,
            inv_pivot,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Solves in place: `rhs` is overwritten with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_mod[i] * rhs[i + 1];
        }
    }
}

/// Pre-factored cyclic tridiagonal system, solved through a Sherman-Morrison
/// correction of an ordinary tridiagonal factorization.
///
/// `corner_low` is the entry at (n-1, 0) and `corner_high` the entry at (0, n-1).
#[derive(Debug, Clone)]
pub struct CyclicTridiagonalFactor {
    inner: TridiagonalFactor,
    z: Vec<f64>,
    gamma: f64,
    corner_high: f64,
    denom: f64,
}

impl CyclicTridiagonalFactor {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64], corner_low: f64, corner_high: f64) -> Result<Self> {
        let n = diag.len();
        if n < 3 {
            return Err(KppError::InvalidParameter("cyclic system needs at least 3 rows".into()));
        }
        let gamma = -diag[0];
        let mut modified = diag.to_vec();
        modified[0] -= gamma;
        modified[n - 1] -= corner_low * corner_high / gamma;
        let inner = TridiagonalFactor::new(lower, &modified, upper)?;
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = corner_low;
        inner.solve_in_place(&mut z);
        let denom = 1.0 + z[0] + corner_high * z[n - 1] / gamma;
        if denom == 0.0 || !denom.is_finite() {
            return Err(KppError::Degenerate("singular cyclic tridiagonal system".into()));
        }
        Ok(Self {
            inner,
            z,
            gamma,
            corner_high,
            denom,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        self.inner.solve_in_place(rhs);
        let factor = (rhs[0] + self.corner_high * rhs[n - 1] / self.gamma) / self.denom;
        for (r, z) in rhs.iter_mut().zip(&self.z) {
            *r -= factor * z;
        }
    }
}

/// Periodic second difference `(v[i-1] - 2 v[i] + v[i+1]) / h^2`.
pub fn periodic_second_difference(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let inv_h2 = 1.0 / (h * h);
    (0..n)
        .map(|i| {
            let left = values[(i + n - 1) % n];
            let right = values[(i + 1) % n];
            (left - 2.0 * values[i] + right) * inv_h2
        })
        .collect()
}

/// Linear interpolation of the sign changes of `values - level`, returning the
/// fractional node coordinates of every crossing in increasing order.
///
/// A node sitting exactly on the level counts once.
pub(crate) fn level_crossings(values: &[f64], level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..values.len().saturating_sub(1) {
        let a = values[i] - level;
        let b = values[i + 1] - level;
        if a == 0.0 {
            out.push(i as f64);
        } else if a * b < 0.0 {
            out.push(i as f64 + a / (a - b));
        }
    }
    if let Some(&last) = values.last() {
        if last == level && values.len() > 1 {
            out.push((values.len() - 1) as f64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(lower: &[f64], diag: &[f64], upper: &[f64], cl: f64, ch: f64, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                if i == 0 {
                    s += ch * x[n - 1];
                }
                if i == n - 1 {
                    s += cl * x[0];
                }
                s
            })
            .collect()
    }

    #[test]
    fn thomas_solves_random_dominant_system() {
        let n = 17;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.2 + 0.02 * (i % 3) as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut rhs = dense_mul(&lower, &diag, &upper, 0.0, 0.0, &x);
        TridiagonalFactor::new(&lower, &diag, &upper)
            .unwrap()
            .solve_in_place(&mut rhs);
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn cyclic_solve_matches_dense_product() {
        let n = 12;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + (i as f64 * 0.7).cos()).collect();
        let x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64).cos()).collect();
        let mut rhs = dense_mul(&lower, &diag, &upper, -1.0, -1.0, &x);
        CyclicTridiagonalFactor::new(&lower, &diag, &upper, -1.0, -1.0)
            .unwrap()
            .solve_in_place(&mut rhs);
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn torus_integral_of_constant() {
        let f = TorusField::constant(2.0, 16, 3.0).unwrap();
        assert!((f.integral() - 6.0).abs() < 1e-14);
        assert!(TorusField::constant(1.0, 4, 1.0).is_err());
    }

    #[test]
    fn crossings_interpolate_linearly() {
        let c = level_crossings(&[1.0, 0.6, 0.4, 0.0], 0.5);
        assert_eq!(c.len(), 1);
        assert!((c[0] - 1.5).abs() < 1e-15);
        assert!(level_crossings(&[0.3, 0.2], 0.5).is_empty());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Objective, ObjectiveHandle};
use crate::vector::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Curvature {
    Diagonal(Vec<f64>),
    /// Row-major SPD matrix with its lower Cholesky factor.
    Dense {
        matrix: Vec<f64>,
        cholesky: Vec<f64>,
    },
}

/// `f(x) = (x - c)^T A (x - c) / 2` with `A` symmetric positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProblem {
    n: usize,
    curvature: Curvature,
    /// Eigenvalues of `A`, ascending.
    eigenvalues: Vec<f64>,
    center: Vec<f64>,
}

impl QuadraticProblem {
    /// Diagonal `A` with the given entries (any order).
    pub fn diagonal(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::usage("quadratic needs at least one eigenvalue"));
        }
        if let Some(bad) = entries.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::usage(format!(
                "eigenvalues must be positive and finite, got {bad}"
            )));
        }
        let mut eigenvalues = entries.clone();
        eigenvalues.sort_by(f64::total_cmp);
        let n = entries.len();
        Ok(QuadraticProblem {
            n,
            curvature: Curvature::Diagonal(entries),
            eigenvalues,
            center: vec![0.0; n],
        })
    }

    /// `A = diag(mu, L)`; the two-dimensional test problem.
    pub fn two_scale(mu: f64, lipschitz: f64) -> Result<Self> {
        if lipschitz < mu {
            return Err(Error::usage(format!(
                "need mu <= L, got mu = {mu}, L = {lipschitz}"
            )));
        }
        Self::diagonal(vec![mu, lipschitz])
    }

    /// Dense symmetric positive definite `A`, row-major.
    pub fn dense(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if n == 0 || matrix.len() != n * n {
            return Err(Error::usage(format!(
                "dense quadratic needs an {n}x{n} matrix, got {} entries",
                matrix.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("matrix entries must be finite"));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (matrix[i * n + j], matrix[j * n + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::usage(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let cholesky =
            cholesky(n, &matrix).ok_or_else(|| Error::usage("matrix is not positive definite"))?;
        let mut eigenvalues = jacobi_eigenvalues(n, &matrix);
        eigenvalues.sort_by(f64::total_cmp);
        if eigenvalues[0] <= 0.0 {
            return Err(Error::usage("matrix is not positive definite"));
        }
        Ok(QuadraticProblem {
            n,
            curvature: Curvature::Dense { matrix, cholesky },
            eigenvalues,
            center: vec![0.0; n],
        })
    }

    /// Moves the minimizer to `center`.
    pub fn with_center(mut self, center: Vec<f64>) -> Result<Self> {
        if center.len() != self.n || center.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage(
                "center must be finite with the problem's dimension",
            ));
        }
        self.center = center;
        Ok(self)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.curvature, Curvature::Diagonal(_))
    }

    /// Diagonal entries in coordinate order, for diagonal problems.
    pub fn diagonal_entries(&self) -> Option<&[f64]> {
        match &self.curvature {
            Curvature::Diagonal(d) => Some(d),
            Curvature::Dense { .. } => None,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn handle(self) -> Result<ObjectiveHandle> {
        ObjectiveHandle::new(self)
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.curvature {
            Curvature::Diagonal(d) => d.iter().zip(v).map(|(a, b)| a * b).collect(),
            Curvature::Dense { matrix, .. } => (0..self.n)
                .map(|i| dot(&matrix[i * self.n..(i + 1) * self.n], v))
                .collect(),
        }
    }

    fn shifted(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| a - c).collect()
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn mu(&self) -> f64 {
        self.eigenvalues[0]
    }

    fn lipschitz(&self) -> f64 {
        self.eigenvalues[self.n - 1]
    }

    fn value(&self, x: &[f64]) -> f64 {
        let d = self.shifted(x);
        0.5 * dot(&d, &self.apply(&d))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.apply(&self.shifted(x))
    }

    fn hessian_vector(&self, _x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        Some(self.apply(v))
    }

    fn has_hessian_vector(&self) -> bool {
        true
    }

    fn closed_form_prox(&self, y: &[f64], beta: f64) -> Option<Vec<f64>> {
        // (I + beta A)(z - c) = y - c
        let r = self.shifted(y);
        let d = match &self.curvature {
            Curvature::Diagonal(diag) => r
                .iter()
                .zip(diag)
                .map(|(ri, l)| ri / (1.0 + beta * l))
                .collect(),
            Curvature::Dense { matrix, .. } => {
                let n = self.n;
                let mut m: Vec<f64> = matrix.iter().map(|a| beta * a).collect();
                for i in 0..n {
                    m[i * n + i] += 1.0;
                }
                let l = cholesky(n, &m)?;
                cholesky_solve(n, &l, &r)
            }
        };
        Some(d.iter().zip(&self.center).map(|(di, c)| di + c).collect())
    }

    fn has_closed_form_prox(&self) -> bool {
        true
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(self.center.clone())
    }
}

/// Lower-triangular `L` with `L L^T = A`, or `None` if `A` is not SPD.
fn cholesky(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(n: usize, l: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x
}

/// Cyclic Jacobi sweeps on a symmetric matrix.
fn jacobi_eigenvalues(n: usize, a: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= 1e-30 * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

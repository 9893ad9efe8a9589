use crate::error::{Error, Result};
use crate::objective::{ObjectiveHandle, ReferenceSolution};
use crate::vector::Vector;

pub const DEFAULT_REFERENCE_TOL: f64 = 1e-8;
pub const DEFAULT_REFERENCE_BUDGET: usize = 1_000_000;

/// High-accuracy minimizer via NAG-SC with `s = 1/L` from the origin.
/// Objectives with a known minimizer skip the iteration.
pub fn reference_solve(obj: &ObjectiveHandle, tol: f64) -> Result<ReferenceSolution> {
    reference_solve_with_budget(obj, tol, DEFAULT_REFERENCE_BUDGET)
}

pub fn reference_solve_with_budget(
    obj: &ObjectiveHandle,
    tol: f64,
    max_iters: usize,
) -> Result<ReferenceSolution> {
    if !(tol > 0.0) {
        return Err(Error::usage(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if let Some(x) = obj.known_minimizer() {
        return ReferenceSolution::at(obj, x);
    }
    let s = 1.0 / obj.lipschitz();
    let r = (obj.mu() * s).sqrt();
    let momentum = (1.0 - r) / (1.0 + r);
    let mut x = Vector::zeros(obj.dim());
    let mut x_prev = x.clone();
    let mut grad_norm = f64::INFINITY;
    for _ in 0..=max_iters {
        let g = obj.gradient(&x)?;
        grad_norm = g.norm();
        if grad_norm < tol {
            return ReferenceSolution::at(obj, x);
        }
        let y = Vector::combine(&[(1.0 + momentum, &x), (-momentum, &x_prev)]);
        let gy = obj.gradient(&y)?;
        let next = Vector::combine(&[(1.0, &y), (-s, &gy)]);
        if !next.is_finite() {
            break;
        }
        x_prev = std::mem::replace(&mut x, next);
    }
    Err(Error::Numerical {
        message: format!("reference solve did not reach gradient norm {tol:e}"),
        residual: grad_norm,
    })
}

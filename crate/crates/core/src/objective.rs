//! The objective abstraction shared by every scheme.
//!
//! Concrete problems implement [`Objective`]; everything downstream talks to
//! an [`ObjectiveHandle`], which validates dimensions, carries the curvature
//! constants, and supplies a generic proximal solver when the problem has no
//! closed form.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{dot, Vector};

/// A μ-strongly convex, L-smooth function on `R^n`.
///
/// Implementations must be deterministic pure functions of their inputs.
/// Inputs are guaranteed to have length [`Objective::dim`].
pub trait Objective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Strong-convexity modulus.
    fn mu(&self) -> f64;

    /// Gradient Lipschitz constant.
    fn lipschitz(&self) -> f64;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Analytic Hessian-vector product, if the problem provides one.
    fn hessian_vector(&self, _x: &[f64], _v: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn has_hessian_vector(&self) -> bool {
        false
    }

    /// Closed-form `argmin_z f(z) + |z - y|^2 / (2 beta)`, if available.
    fn closed_form_prox(&self, _y: &[f64], _beta: f64) -> Option<Vec<f64>> {
        None
    }

    fn has_closed_form_prox(&self) -> bool {
        false
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub has_prox: bool,
    pub has_hvp: bool,
    pub has_known_minimizer: bool,
}

/// Inner-solver settings for the generic proximal map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSettings {
    /// Residual target is `rel_tol * (1 + |y|)`.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Allow the Newton/gradient inner solver when no closed form exists.
    pub generic_enabled: bool,
}

impl Default for ProxSettings {
    fn default() -> Self {
        ProxSettings {
            rel_tol: 1e-12,
            max_iters: 200,
            generic_enabled: true,
        }
    }
}

/// Shared, immutable handle to an objective.
#[derive(Clone)]
pub struct ObjectiveHandle {
    inner: Arc<dyn Objective>,
    prox: ProxSettings,
}

impl fmt::Debug for ObjectiveHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveHandle")
            .field("dim", &self.dim())
            .field("mu", &self.mu())
            .field("lipschitz", &self.lipschitz())
            .field("capabilities", &self.capabilities())
            .finish()
    }
}

impl ObjectiveHandle {
    pub fn new(objective: impl Objective + 'static) -> Result<Self> {
        Self::from_arc(Arc::new(objective))
    }

    pub fn from_arc(inner: Arc<dyn Objective>) -> Result<Self> {
        let (n, mu, l) = (inner.dim(), inner.mu(), inner.lipschitz());
        if n == 0 {
            return Err(Error::usage("objective dimension must be positive"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::usage(format!(
                "mu must be positive and finite, got {mu}"
            )));
        }
        if !(l >= mu && l.is_finite()) {
            return Err(Error::usage(format!(
                "lipschitz constant {l} must be finite and at least mu = {mu}"
            )));
        }
        Ok(ObjectiveHandle {
            inner,
            prox: ProxSettings::default(),
        })
    }

    pub fn with_prox_settings(mut self, prox: ProxSettings) -> Self {
        self.prox = prox;
        self
    }

    pub fn prox_settings(&self) -> ProxSettings {
        self.prox
    }

    pub fn objective(&self) -> &dyn Objective {
        self.inner.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn mu(&self) -> f64 {
        self.inner.mu()
    }

    pub fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }

    pub fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_prox: self.inner.has_closed_form_prox(),
            has_hvp: self.inner.has_hessian_vector(),
            has_known_minimizer: self.inner.minimizer().is_some(),
        }
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.inner.value(x))
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        Ok(Vector::from_raw(self.inner.gradient(x)))
    }

    pub fn hessian_vector(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        if !self.inner.has_hessian_vector() {
            return Err(Error::Unsupported(
                "objective has no Hessian-vector product",
            ));
        }
        self.inner
            .hessian_vector(x, v)
            .map(Vector::from_raw)
            .ok_or(Error::Unsupported(
                "objective has no Hessian-vector product",
            ))
    }

    pub fn known_minimizer(&self) -> Option<Vector> {
        self.inner.minimizer().map(Vector::from_raw)
    }

    /// `prox_{beta f}(y)`. Uses the closed form when the problem has one and
    /// the damped-Newton inner solver otherwise.
    pub fn proximal(&self, y: &Vector, beta: f64) -> Result<Vector> {
        self.proximal_detailed(y, beta).map(|o| o.point)
    }

    pub fn proximal_detailed(&self, y: &Vector, beta: f64) -> Result<ProxOutcome> {
        self.check_dim(y)?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::usage(format!(
                "prox parameter must be positive, got {beta}"
            )));
        }
        if let Some(z) = self.inner.closed_form_prox(y, beta) {
            let z = Vector::from_raw(z);
            let residual = prox_residual(self.inner.as_ref(), &z, y, beta);
            return Ok(ProxOutcome {
                point: z,
                residual,
                iterations: 0,
            });
        }
        if !self.prox.generic_enabled {
            return Err(Error::Unsupported(
                "objective has no closed-form prox and the inner solver is disabled",
            ));
        }
        generic_prox(self.inner.as_ref(), y, beta, &self.prox)
    }
}

#[derive(Debug, Clone)]
pub struct ProxOutcome {
    pub point: Vector,
    /// `|z - y + beta * grad f(z)|`
    pub residual: f64,
    pub iterations: usize,
}

fn prox_map(obj: &dyn Objective, z: &[f64], y: &[f64], beta: f64) -> Vec<f64> {
    let g = obj.gradient(z);
    z.iter()
        .zip(y)
        .zip(&g)
        .map(|((zi, yi), gi)| zi - yi + beta * gi)
        .collect()
}

fn prox_residual(obj: &dyn Objective, z: &[f64], y: &[f64], beta: f64) -> f64 {
    let r = prox_map(obj, z, y, beta);
    dot(&r, &r).sqrt()
}

/// `beta f(z) + |z - y|^2 / 2`, whose gradient is the prox residual map.
fn prox_merit(obj: &dyn Objective, z: &[f64], y: &[f64], beta: f64) -> f64 {
    let d: f64 = z.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    beta * obj.value(z) + 0.5 * d
}

/// Solves `(I + beta H(z)) d = rhs` by conjugate gradients on Hessian-vector
/// products. Returns `None` if a product is unavailable or curvature breaks.
fn newton_direction(obj: &dyn Objective, z: &[f64], beta: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let apply = |p: &[f64]| -> Option<Vec<f64>> {
        let hp = obj.hessian_vector(z, p)?;
        Some(p.iter().zip(&hp).map(|(pi, hi)| pi + beta * hi).collect())
    };
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = 1e-30 * rr.max(f64::MIN_POSITIVE);
    for _ in 0..(2 * n + 10) {
        if rr <= target {
            break;
        }
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let b = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + b * p[i];
        }
    }
    Some(x)
}

fn generic_prox(
    obj: &dyn Objective,
    y: &Vector,
    beta: f64,
    settings: &ProxSettings,
) -> Result<ProxOutcome> {
    let tol = settings.rel_tol * (1.0 + y.norm());
    let gd_step = 1.0 / (1.0 + beta * obj.lipschitz());
    let use_newton = obj.has_hessian_vector();

    let mut z = y.as_slice().to_vec();
    let mut res = prox_map(obj, &z, y, beta);
    let mut res_norm = dot(&res, &res).sqrt();

    for it in 0..settings.max_iters {
        if res_norm <= tol {
            return Ok(ProxOutcome {
                point: Vector::from_raw(z),
                residual: res_norm,
                iterations: it,
            });
        }
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let newton = if use_newton {
            newton_direction(obj, &z, beta, &neg)
        } else {
            None
        };

        let mut accepted = None;
        if let Some(d) = newton.filter(|d| dot(d, &res) < 0.0) {
            let phi0 = prox_merit(obj, &z, y, beta);
            let slope = dot(&res, &d);
            let mut t = 1.0;
            for _ in 0..40 {
                let trial: Vec<f64> = z.iter().zip(&d).map(|(zi, di)| zi + t * di).collect();
                let trial_res = prox_map(obj, &trial, y, beta);
                let trial_norm = dot(&trial_res, &trial_res).sqrt();
                // Near the solution the merit decrease drowns in round-off;
                // a residual contraction is then accepted instead.
                if prox_merit(obj, &trial, y, beta) <= phi0 + 1e-4 * t * slope
                    || trial_norm < 0.5 * res_norm
                {
                    accepted = Some((trial, trial_res, trial_norm));
                    break;
                }
                t *= 0.5;
            }
        }
        let (zn, rn, nn) = accepted.unwrap_or_else(|| {
            let trial: Vec<f64> = z
                .iter()
                .zip(&res)
                .map(|(zi, ri)| zi - gd_step * ri)
                .collect();
            let trial_res = prox_map(obj, &trial, y, beta);
            let trial_norm = dot(&trial_res, &trial_res).sqrt();
            (trial, trial_res, trial_norm)
        });
        if !nn.is_finite() {
            return Err(Error::Numerical {
                message: format!("prox inner solver produced a non-finite iterate at step {it}"),
                residual: nn,
            });
        }
        z = zn;
        res = rn;
        res_norm = nn;
    }
    if res_norm <= tol {
        return Ok(ProxOutcome {
            point: Vector::from_raw(z),
            residual: res_norm,
            iterations: settings.max_iters,
        });
    }
    Err(Error::Numerical {
        message: format!(
            "prox inner solver missed tolerance {tol:e} within {} iterations",
            settings.max_iters
        ),
        residual: res_norm,
    })
}

/// Result of comparing analytic derivatives with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifferenceReport {
    pub max_rel_err_grad: f64,
    /// `None` when the objective has no Hessian-vector product.
    pub max_rel_err_hvp: Option<f64>,
}

/// Relative error with the denominator floored at one, so coordinates that
/// are near zero are judged in absolute terms.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Central-difference check of the gradient (against values) and of the
/// Hessian-vector product (against gradients), one coordinate direction at a
/// time. Never fails; a dimension mismatch reports infinite error.
pub fn finite_difference_check(
    obj: &ObjectiveHandle,
    x: &Vector,
    h: f64,
) -> FiniteDifferenceReport {
    if x.dim() != obj.dim() || !(h > 0.0) {
        return FiniteDifferenceReport {
            max_rel_err_grad: f64::INFINITY,
            max_rel_err_hvp: Some(f64::INFINITY),
        };
    }
    let f = obj.objective();
    let n = x.dim();
    let grad = f.gradient(x);
    let mut probe = x.as_slice().to_vec();
    let mut worst_grad = 0.0f64;
    let mut worst_hvp = 0.0f64;
    let has_hvp = f.has_hessian_vector();

    for j in 0..n {
        probe[j] = x[j] + h;
        let f_plus = f.value(&probe);
        let g_plus = has_hvp.then(|| f.gradient(&probe));
        probe[j] = x[j] - h;
        let f_minus = f.value(&probe);
        let g_minus = has_hvp.then(|| f.gradient(&probe));
        probe[j] = x[j];

        let fd = (f_plus - f_minus) / (2.0 * h);
        worst_grad = worst_grad.max(rel_err(fd, grad[j]));

        if let (Some(gp), Some(gm)) = (g_plus, g_minus) {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let Some(hv) = f.hessian_vector(x, &e) else {
                continue;
            };
            for i in 0..n {
                let fd_col = (gp[i] - gm[i]) / (2.0 * h);
                worst_hvp = worst_hvp.max(rel_err(fd_col, hv[i]));
            }
        }
    }
    FiniteDifferenceReport {
        max_rel_err_grad: worst_grad,
        max_rel_err_hvp: has_hvp.then_some(worst_hvp),
    }
}

/// A (possibly approximate) minimizer together with its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x_star: Vector,
    pub f_star: f64,
    pub certified_grad_norm: f64,
}

impl ReferenceSolution {
    /// Builds a reference from a point, computing value and gradient norm.
    pub fn at(obj: &ObjectiveHandle, x_star: Vector) -> Result<Self> {
        let f_star = obj.value(&x_star)?;
        let certified_grad_norm = obj.gradient(&x_star)?.norm();
        Ok(ReferenceSolution {
            x_star,
            f_star,
            certified_grad_norm,
        })
    }

    /// Recomputes the gradient norm and checks it against the stored
    /// certificate to within ten units of round-off.
    pub fn verify(&self, obj: &ObjectiveHandle) -> Result<()> {
        let recomputed = obj.gradient(&self.x_star)?.norm();
        let slack = 10.0 * f64::EPSILON * (1.0 + recomputed.max(self.certified_grad_norm));
        if (recomputed - self.certified_grad_norm).abs() > slack {
            return Err(Error::Numerical {
                message: format!(
                    "reference certificate {:e} does not match recomputed gradient norm",
                    self.certified_grad_norm
                ),
                residual: recomputed,
            });
        }
        let f = obj.value(&self.x_star)?;
        if (f - self.f_star).abs() > 10.0 * f64::EPSILON * (1.0 + f.abs()) {
            return Err(Error::Numerical {
                message: "reference value does not match recomputed objective".into(),
                residual: (f - self.f_star).abs(),
            });
        }
        Ok(())
    }
}

//! Exact per-eigenvalue rates of the symplectic scheme on diagonal quadratics.
//!
//! Along an eigenvector with eigenvalue `lambda` the scheme reduces to
//! `z_{k+1} = a z_k + b z_{k-1}`; the f-gap contracts like `rho^{2k}` with
//! `rho` the largest root modulus of `r^2 - a r - b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::problems::QuadraticProblem;
use crate::schemes::{SchemeConfig, SchemeKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarRecursion {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

impl ScalarRecursion {
    /// `z_0, z_1, ..., z_n` from the two starting values.
    pub fn iterate(&self, z0: f64, z1: f64, n: usize) -> Vec<f64> {
        let mut out = vec![z0, z1];
        for k in 1..n {
            out.push(self.a * out[k] + self.b * out[k - 1]);
        }
        out.truncate(n + 1);
        out
    }
}

pub fn build_recursion(
    lambda: f64,
    mu: f64,
    s: f64,
    delta1: f64,
    delta2: f64,
) -> Result<ScalarRecursion> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::usage(format!(
            "eigenvalue must be positive, got {lambda}"
        )));
    }
    if !(mu > 0.0 && s > 0.0) {
        return Err(Error::usage("need mu > 0 and s > 0"));
    }
    let d = 1.0 + 2.0 * (mu * s).sqrt();
    let rs = s.sqrt();
    let a = 1.0 - lambda * s * (1.0 + delta1) / d + (1.0 - lambda * rs * delta2) / d;
    let b = (lambda * rs * delta2 - 1.0) / d;
    Ok(ScalarRecursion { a, b, lambda })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Real,
    Complex,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Real => "real",
            Regime::Complex => "complex",
        }
    }
}

/// A root as `(re, im)`.
pub type Root = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRate {
    pub roots: [Root; 2],
    pub regime: Regime,
    /// Largest root modulus.
    pub rho: f64,
}

impl SpectralRate {
    /// Per-step contraction of the f-gap, `rho^2`.
    pub fn gap_rate(&self) -> f64 {
        self.rho * self.rho
    }
}

/// Roots of `r^2 - a r - b = 0`, using the cancellation-free form for real roots.
pub fn spectral_rate(rec: &ScalarRecursion) -> SpectralRate {
    let (a, b) = (rec.a, rec.b);
    let disc = a * a + 4.0 * b;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let r1 = (a + if a >= 0.0 { sq } else { -sq }) / 2.0;
        let r2 = if r1 != 0.0 { -b / r1 } else { 0.0 };
        SpectralRate {
            roots: [(r1, 0.0), (r2, 0.0)],
            regime: Regime::Real,
            rho: r1.abs().max(r2.abs()),
        }
    } else {
        let re = a / 2.0;
        let im = (-disc).sqrt() / 2.0;
        SpectralRate {
            roots: [(re, im), (re, -im)],
            regime: Regime::Complex,
            rho: (-b).sqrt(),
        }
    }
}

/// Recursion and rate for every eigenvalue, in ascending eigenvalue order.
pub fn coordinate_rates(
    problem: &QuadraticProblem,
    cfg: &SchemeConfig,
) -> Result<Vec<(ScalarRecursion, SpectralRate)>> {
    if cfg.kind != SchemeKind::Symplectic {
        return Err(Error::usage(format!(
            "spectral analysis covers the symplectic scheme only, got {}",
            cfg.kind
        )));
    }
    cfg.validate()?;
    let mu = problem.mu();
    problem
        .eigenvalues()
        .iter()
        .map(|&l| {
            let rec = build_recursion(l, mu, cfg.s, cfg.delta1, cfg.delta2)?;
            Ok((rec, spectral_rate(&rec)))
        })
        .collect()
}

/// Largest `rho^2` over the eigenvalues: the asymptotic f-gap rate.
pub fn worst_coordinate_rate(problem: &QuadraticProblem, cfg: &SchemeConfig) -> Result<f64> {
    Ok(coordinate_rates(problem, cfg)?
        .iter()
        .map(|(_, r)| r.gap_rate())
        .fold(0.0, f64::max))
}

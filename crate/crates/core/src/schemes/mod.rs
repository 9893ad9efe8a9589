//! Discrete iterations derived from the perturbed ODE, plus baselines.

mod conditions;
mod lyapunov;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ObjectiveHandle;
use crate::vector::Vector;

pub use conditions::{
    algorithm2_interval, certification_report, check_certificate, check_conditions,
    make_algorithm1, make_algorithm2, Certificate, ConditionEntry, ConditionReport,
};
pub use lyapunov::{lyapunov_implicit, lyapunov_modified, lyapunov_symplectic};
pub use run::{run_scheme, IterateTrace, RunCertification, StopCriteria, Termination, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Implicit,
    Symplectic,
    ModifiedSymplectic,
    NagSc,
    HeavyBall,
    GradientDescent,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::Implicit,
        SchemeKind::Symplectic,
        SchemeKind::ModifiedSymplectic,
        SchemeKind::NagSc,
        SchemeKind::HeavyBall,
        SchemeKind::GradientDescent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Implicit => "implicit",
            SchemeKind::Symplectic => "symplectic",
            SchemeKind::ModifiedSymplectic => "modified_symplectic",
            SchemeKind::NagSc => "nag_sc",
            SchemeKind::HeavyBall => "heavy_ball",
            SchemeKind::GradientDescent => "gradient_descent",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(
            self,
            SchemeKind::NagSc | SchemeKind::HeavyBall | SchemeKind::GradientDescent
        )
    }

    /// Lyapunov value at `k` needs `x_{k+1}`.
    pub fn looks_ahead(self) -> bool {
        matches!(
            self,
            SchemeKind::Symplectic | SchemeKind::ModifiedSymplectic
        )
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::usage(format!(
                    "unknown scheme {s:?}; expected one of {}",
                    SchemeKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub delta1: f64,
    pub delta2: f64,
    /// Step size `s`.
    pub s: f64,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, delta1: f64, delta2: f64, s: f64) -> Result<Self> {
        let cfg = SchemeConfig {
            kind,
            delta1,
            delta2,
            s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta1 >= 0.0 && self.delta1.is_finite()) {
            return Err(Error::usage(format!(
                "delta1 must be finite and >= 0, got {}",
                self.delta1
            )));
        }
        if !(self.delta2 >= 0.0 && self.delta2.is_finite()) {
            return Err(Error::usage(format!(
                "delta2 must be finite and >= 0, got {}",
                self.delta2
            )));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::usage(format!(
                "step size must be positive, got {}",
                self.s
            )));
        }
        Ok(())
    }

    /// Checks what depends on the objective: `sqrt(mu s) < 1` for the
    /// modified scheme.
    pub fn validate_for(&self, mu: f64) -> Result<()> {
        self.validate()?;
        if self.kind == SchemeKind::ModifiedSymplectic && (mu * self.s).sqrt() >= 1.0 {
            return Err(Error::usage(format!(
                "modified symplectic scheme needs sqrt(mu s) < 1, got {}",
                (mu * self.s).sqrt()
            )));
        }
        Ok(())
    }

    pub fn sqrt_mu_s(&self, mu: f64) -> f64 {
        (mu * self.s).sqrt()
    }

    /// `beta` of the proximal form of the implicit step.
    pub fn implicit_beta(&self, mu: f64) -> f64 {
        let rs = self.s.sqrt();
        rs * ((1.0 + self.delta1) * rs + self.delta2) / (1.0 + 2.0 * self.sqrt_mu_s(mu))
    }

    pub(crate) fn explicit_coefficients(&self, mu: f64) -> Option<ExplicitCoefficients> {
        let r = self.sqrt_mu_s(mu);
        let rs = self.s.sqrt();
        let nag = (1.0 - r) / (1.0 + r);
        let c = match self.kind {
            SchemeKind::Symplectic => {
                let d = 1.0 + 2.0 * r;
                ExplicitCoefficients {
                    momentum: 1.0 / d,
                    gradient: (1.0 + self.delta1) * self.s / d,
                    correction: self.delta2 * rs / d,
                }
            }
            SchemeKind::ModifiedSymplectic => ExplicitCoefficients {
                momentum: nag,
                gradient: (1.0 + self.delta1) * self.s / (1.0 + r),
                correction: self.delta2 * rs / (1.0 - r),
            },
            SchemeKind::HeavyBall => ExplicitCoefficients {
                momentum: nag * nag,
                gradient: self.s,
                correction: 0.0,
            },
            SchemeKind::GradientDescent => ExplicitCoefficients {
                momentum: 0.0,
                gradient: self.s,
                correction: 0.0,
            },
            SchemeKind::Implicit | SchemeKind::NagSc => return None,
        };
        Some(c)
    }
}

/// `x_{k+1} = x_k + momentum (x_k - x_{k-1}) - gradient g_k - correction (g_k - g_{k-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ExplicitCoefficients {
    pub momentum: f64,
    pub gradient: f64,
    pub correction: f64,
}

impl ExplicitCoefficients {
    pub fn apply(&self, x: &Vector, x_prev: &Vector, g: &Vector, g_prev: &Vector) -> Vector {
        let out: Vec<f64> = (0..x.dim())
            .map(|i| {
                x[i] + self.momentum * (x[i] - x_prev[i])
                    - self.gradient * g[i]
                    - self.correction * (g[i] - g_prev[i])
            })
            .collect();
        Vector::from_raw(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub k: usize,
    pub x_curr: Vector,
    pub x_prev: Vector,
}

impl DiscreteState {
    /// Zero initial velocity: `x_{-1} = x_0`.
    pub fn start(x0: Vector) -> Self {
        DiscreteState {
            k: 0,
            x_prev: x0.clone(),
            x_curr: x0,
        }
    }

    /// `(x_k - x_{k-1}) / sqrt(s)`.
    pub fn backward_velocity(&self, s: f64) -> Vector {
        self.x_curr.sub(&self.x_prev).scaled(1.0 / s.sqrt())
    }

    fn advanced(&self, next: Vector) -> Result<Self> {
        if !next.is_finite() {
            return Err(Error::Divergence {
                iteration: self.k + 1,
            });
        }
        Ok(DiscreteState {
            k: self.k + 1,
            x_prev: self.x_curr.clone(),
            x_curr: next,
        })
    }
}

fn require_kind(cfg: &SchemeConfig, allowed: &[SchemeKind], op: &str) -> Result<()> {
    if allowed.contains(&cfg.kind) {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "{op} called with scheme {}",
            cfg.kind
        )))
    }
}

fn check_state(obj: &ObjectiveHandle, st: &DiscreteState) -> Result<()> {
    for x in [&st.x_curr, &st.x_prev] {
        if x.dim() != obj.dim() {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                actual: x.dim(),
            });
        }
    }
    Ok(())
}

fn explicit_step(
    obj: &ObjectiveHandle,
    st: &DiscreteState,
    cfg: &SchemeConfig,
) -> Result<DiscreteState> {
    check_state(obj, st)?;
    cfg.validate_for(obj.mu())?;
    let coeffs = cfg
        .explicit_coefficients(obj.mu())
        .expect("explicit scheme kind");
    let g = obj.gradient(&st.x_curr)?;
    let g_prev = if coeffs.correction != 0.0 {
        obj.gradient(&st.x_prev)?
    } else {
        g.clone()
    };
    st.advanced(coeffs.apply(&st.x_curr, &st.x_prev, &g, &g_prev))
}

/// One symplectic Euler step.
pub fn step_symplectic(
    obj: &ObjectiveHandle,
    st: &DiscreteState,
    cfg: &SchemeConfig,
) -> Result<DiscreteState> {
    require_kind(cfg, &[SchemeKind::Symplectic], "step_symplectic")?;
    explicit_step(obj, st, cfg)
}

/// One modified symplectic Euler step; needs `sqrt(mu s) < 1`.
pub fn step_modified_symplectic(
    obj: &ObjectiveHandle,
    st: &DiscreteState,
    cfg: &SchemeConfig,
) -> Result<DiscreteState> {
    require_kind(
        cfg,
        &[SchemeKind::ModifiedSymplectic],
        "step_modified_symplectic",
    )?;
    explicit_step(obj, st, cfg)
}

pub(crate) fn implicit_anchor(
    x: &Vector,
    x_prev: &Vector,
    g: &Vector,
    cfg: &SchemeConfig,
    mu: f64,
) -> Vector {
    let d = 1.0 + 2.0 * cfg.sqrt_mu_s(mu);
    let c = cfg.delta2 * cfg.s.sqrt() / d;
    Vector::from_raw(
        (0..x.dim())
            .map(|i| x[i] + c * g[i] + (x[i] - x_prev[i]) / d)
            .collect(),
    )
}

/// One implicit Euler step in proximal form:
/// `y = x_k + (d2 sqrt(s) grad f(x_k) + x_k - x_{k-1}) / (1 + 2 sqrt(mu s))`,
/// `x_{k+1} = prox_{beta f}(y)`.
pub fn step_implicit(
    obj: &ObjectiveHandle,
    st: &DiscreteState,
    cfg: &SchemeConfig,
) -> Result<DiscreteState> {
    require_kind(cfg, &[SchemeKind::Implicit], "step_implicit")?;
    check_state(obj, st)?;
    cfg.validate()?;
    let g = obj.gradient(&st.x_curr)?;
    let y = implicit_anchor(&st.x_curr, &st.x_prev, &g, cfg, obj.mu());
    let next = obj.proximal(&y, cfg.implicit_beta(obj.mu()))?;
    st.advanced(next)
}

pub(crate) fn nag_sc_next(
    obj: &ObjectiveHandle,
    st: &DiscreteState,
    cfg: &SchemeConfig,
) -> Result<Vector> {
    let r = cfg.sqrt_mu_s(obj.mu());
    let m = (1.0 - r) / (1.0 + r);
    let y = Vector::combine(&[(1.0 + m, &st.x_curr), (-m, &st.x_prev)]);
    let gy = obj.gradient(&y)?;
    Ok(Vector::combine(&[(1.0, &y), (-cfg.s, &gy)]))
}

/// NAG-SC, heavy-ball or gradient descent.
pub fn step_baseline(
    obj: &ObjectiveHandle,
    st: &DiscreteState,
    cfg: &SchemeConfig,
) -> Result<DiscreteState> {
    require_kind(
        cfg,
        &[
            SchemeKind::NagSc,
            SchemeKind::HeavyBall,
            SchemeKind::GradientDescent,
        ],
        "step_baseline",
    )?;
    if cfg.kind == SchemeKind::NagSc {
        check_state(obj, st)?;
        cfg.validate()?;
        st.advanced(nag_sc_next(obj, st, cfg)?)
    } else {
        explicit_step(obj, st, cfg)
    }
}

/// Dispatches on `cfg.kind`.
pub fn step(
    obj: &ObjectiveHandle,
    st: &DiscreteState,
    cfg: &SchemeConfig,
) -> Result<DiscreteState> {
    match cfg.kind {
        SchemeKind::Implicit => step_implicit(obj, st, cfg),
        SchemeKind::Symplectic => step_symplectic(obj, st, cfg),
        SchemeKind::ModifiedSymplectic => step_modified_symplectic(obj, st, cfg),
        _ => step_baseline(obj, st, cfg),
    }
}

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::conditions::{certification_report, strict_gap_condition, ConditionReport};
use super::lyapunov::{
    implicit_inner, modified_inner, prefactor_base, symplectic_inner, with_prefactor, Snapshot,
};
use super::{implicit_anchor, nag_sc_next, DiscreteState, SchemeConfig, SchemeKind};
use crate::error::{Error, Result};
use crate::objective::{ObjectiveHandle, ReferenceSolution};
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub tol_grad: f64,
    pub max_iters: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            tol_grad: 1e-6,
            max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub f_gap: f64,
    pub grad_norm: f64,
    /// NaN for baselines.
    pub lyapunov: f64,
    /// NaN unless the rate bound is certified for this configuration.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ToleranceMet,
    MaxIters,
    Diverged,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::ToleranceMet => "tolerance_met",
            Termination::MaxIters => "max_iters",
            Termination::Diverged => "diverged",
        }
    }
}

/// What the parameters promise and what the run delivered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCertification {
    pub conditions: ConditionReport,
    /// The conditions guarantee a non-increasing Lyapunov sequence.
    pub lyapunov_certified: bool,
    /// The conditions also guarantee the f-gap envelope.
    pub bound_certified: bool,
    /// `E(k+1) <= E(k) (1 + 1e-12)` held at every step (modulo a round-off
    /// floor). Always true for baselines.
    pub lyapunov_monotone: bool,
    /// Largest `E(k+1)/E(k)` seen while `E(k)` was above the floor.
    pub worst_lyapunov_ratio: f64,
    /// `f-gap <= bound + 1e-10 E(0)` held at every row. True when uncertified.
    pub bound_holds: bool,
    /// Largest `f-gap - bound` over rows; NaN when uncertified.
    pub worst_bound_margin: f64,
    pub lyapunov_initial: f64,
}

impl RunCertification {
    /// Everything the conditions promise was observed.
    pub fn verified(&self) -> bool {
        (!self.lyapunov_certified || self.lyapunov_monotone)
            && (!self.bound_certified || self.bound_holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateTrace {
    pub config: SchemeConfig,
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    pub certification: RunCertification,
    pub final_iterate: Vector,
    /// Never part of the CSV output.
    pub wall_time_secs: f64,
}

impl IterateTrace {
    /// Index of the last recorded iterate.
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.k)
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("a trace always has its k = 0 row")
    }

    /// Writes `k,f_gap,grad_norm,lyapunov,bound` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn gap_envelope_constant(cfg: &SchemeConfig, mu: f64, lipschitz: f64) -> f64 {
    let rs = cfg.s.sqrt();
    let boost = 1.0 + cfg.delta1;
    match cfg.kind {
        SchemeKind::Implicit => 1.0 / boost,
        SchemeKind::Symplectic => 1.0 / ((1.0 - lipschitz * cfg.delta2 * rs) * boost),
        SchemeKind::ModifiedSymplectic => {
            let c = 1.0 - (mu * cfg.s).sqrt();
            c / ((1.0 - cfg.delta2 * rs * lipschitz / c) * boost)
        }
        _ => f64::NAN,
    }
}

/// Runs `cfg` from `x_{-1} = x_0` until `|grad f(x_k)| < tol_grad`, `k =
/// max_iters`, or divergence (`|x| > 1e12 (1 + |x_0|)` or non-finite values).
/// Divergence ends the trace; it is not an error.
pub fn run_scheme(
    obj: &ObjectiveHandle,
    x0: &Vector,
    cfg: &SchemeConfig,
    stop: &StopCriteria,
    reference: &ReferenceSolution,
) -> Result<IterateTrace> {
    let started = Instant::now();
    let mu = obj.mu();
    let lipschitz = obj.lipschitz();
    cfg.validate_for(mu)?;
    if !(stop.tol_grad > 0.0) {
        return Err(Error::usage(format!(
            "tol_grad must be positive, got {}",
            stop.tol_grad
        )));
    }
    for v in [x0, &reference.x_star] {
        if v.dim() != obj.dim() {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                actual: v.dim(),
            });
        }
    }
    if cfg.kind == SchemeKind::Implicit
        && !obj.capabilities().has_prox
        && !obj.prox_settings().generic_enabled
    {
        return Err(Error::Unsupported("implicit scheme needs a proximal map"));
    }

    let conditions = certification_report(cfg, mu, lipschitz);
    let lyapunov_certified = conditions.certifies();
    let bound_certified = lyapunov_certified && strict_gap_condition(cfg, mu, lipschitz);
    let base = prefactor_base(cfg.kind, mu, cfg.s);
    let log_base = base.map_or(0.0, f64::ln);
    let envelope = gap_envelope_constant(cfg, mu, lipschitz);
    let explicit = cfg.explicit_coefficients(mu);
    let beta = cfg.implicit_beta(mu);
    let rs = cfg.s.sqrt();
    let f_star = reference.f_star;
    let gap_slack = 1e-12 * (1.0 + f_star.abs());
    let floor = 1e-13 * (1.0 + cfg.delta1) * f_star.abs() + 1e-280;
    let limit = 1e12 * (1.0 + x0.norm());

    let mut state = DiscreteState::start(x0.clone());
    let mut g = obj.gradient(&state.x_curr)?;
    let mut g_prev = g.clone();
    let mut rows = Vec::new();
    let mut e0 = f64::NAN;
    let mut prev_inner: Option<f64> = None;
    let mut lyapunov_monotone = true;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_margin = f64::NEG_INFINITY;
    let termination;

    loop {
        let k = state.k;
        let x = &state.x_curr;
        let raw_gap = obj.value(x)? - f_star;
        let f_gap = if raw_gap < 0.0 && raw_gap >= -gap_slack {
            0.0
        } else {
            raw_gap
        };
        let grad_norm = g.norm();

        let lookahead = explicit
            .filter(|_| cfg.kind.looks_ahead())
            .map(|c| c.apply(x, &state.x_prev, &g, &g_prev));
        let at = Snapshot {
            gap: raw_gap,
            x,
            g: &g,
            x_star: &reference.x_star,
        };
        let inner = match cfg.kind {
            SchemeKind::Implicit => {
                let v: Vec<f64> = (0..x.dim())
                    .map(|i| (x[i] - state.x_prev[i]) / rs)
                    .collect();
                implicit_inner(cfg, mu, &at, &v)
            }
            SchemeKind::Symplectic => {
                symplectic_inner(cfg, mu, &at, lookahead.as_ref().expect("lookahead"))
            }
            SchemeKind::ModifiedSymplectic => {
                modified_inner(cfg, mu, &at, lookahead.as_ref().expect("lookahead"))
            }
            _ => f64::NAN,
        };
        if k == 0 {
            e0 = inner;
        }
        let lyapunov = base.map_or(f64::NAN, |b| with_prefactor(inner, b, k));
        let bound = if bound_certified {
            e0 * envelope * (-(k as f64) * log_base).exp()
        } else {
            f64::NAN
        };

        if let (Some(p), Some(b)) = (prev_inner, base) {
            if inner * b > p * (1.0 + 1e-12) + floor {
                lyapunov_monotone = false;
            }
            if p > floor {
                worst_ratio = worst_ratio.max(inner * b / p);
            }
        }
        prev_inner = Some(inner);
        if bound_certified {
            worst_margin = worst_margin.max(f_gap - bound);
        }

        rows.push(TraceRow {
            k,
            f_gap,
            grad_norm,
            lyapunov,
            bound,
        });

        if !(raw_gap.is_finite() && grad_norm.is_finite()) {
            termination = Termination::Diverged;
            break;
        }
        if grad_norm < stop.tol_grad {
            termination = Termination::ToleranceMet;
            break;
        }
        if k >= stop.max_iters {
            termination = Termination::MaxIters;
            break;
        }

        let next = match (lookahead, cfg.kind) {
            (Some(n), _) => n,
            (None, SchemeKind::Implicit) => {
                let y = implicit_anchor(x, &state.x_prev, &g, cfg, mu);
                obj.proximal(&y, beta)?
            }
            (None, SchemeKind::NagSc) => nag_sc_next(obj, &state, cfg)?,
            (None, _) => explicit
                .expect("explicit scheme")
                .apply(x, &state.x_prev, &g, &g_prev),
        };
        if !next.is_finite() || next.norm() > limit {
            termination = Termination::Diverged;
            break;
        }
        let g_next = obj.gradient(&next)?;
        g_prev = std::mem::replace(&mut g, g_next);
        state.x_prev = std::mem::replace(&mut state.x_curr, next);
        state.k += 1;
    }

    let bound_holds = !bound_certified || worst_margin <= 1e-10 * e0;
    Ok(IterateTrace {
        config: *cfg,
        rows,
        termination,
        certification: RunCertification {
            conditions,
            lyapunov_certified,
            bound_certified,
            lyapunov_monotone,
            worst_lyapunov_ratio: if worst_ratio.is_finite() {
                worst_ratio
            } else {
                f64::NAN
            },
            bound_holds,
            worst_bound_margin: if bound_certified {
                worst_margin
            } else {
                f64::NAN
            },
            lyapunov_initial: e0,
        },
        final_iterate: state.x_curr,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

//! Fixed-step RK4 integration of
//! `X'' + 2 sqrt(mu) X' + (1 + d1) grad f(X) + d2 hess f(X) X' = 0`
//! and checks of the Lyapunov decay along the computed trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ObjectiveHandle, ReferenceSolution};
use crate::vector::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousState {
    pub t: f64,
    pub x: Vector,
    pub v: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRunConfig {
    pub delta1: f64,
    pub delta2: f64,
    pub t_end: f64,
    pub h: f64,
    pub record_stride: usize,
}

/// `min(1e-3, 1/(100 L))`.
pub fn default_step(lipschitz: f64) -> f64 {
    1e-3_f64.min(1.0 / (100.0 * lipschitz))
}

impl ContinuousRunConfig {
    pub fn new(obj: &ObjectiveHandle, delta1: f64, delta2: f64, t_end: f64) -> Self {
        ContinuousRunConfig {
            delta1,
            delta2,
            t_end,
            h: default_step(obj.lipschitz()),
            record_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta1 >= 0.0 && self.delta1.is_finite()) {
            return Err(Error::usage(format!(
                "delta1 must be >= 0, got {}",
                self.delta1
            )));
        }
        if !(self.delta2 >= 0.0 && self.delta2.is_finite()) {
            return Err(Error::usage(format!(
                "delta2 must be >= 0, got {}",
                self.delta2
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::usage(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.h > 0.0 && self.h <= self.t_end) {
            return Err(Error::usage(format!(
                "need 0 < h <= t_end, got h = {}",
                self.h
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::usage("record_stride must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<ContinuousState>,
    /// Relative end-state difference between step `h` and step `h/2`.
    pub richardson_error: f64,
    /// `richardson_error <= 1e-6`.
    pub reliable: bool,
}

impl Trajectory {
    pub fn last(&self) -> &ContinuousState {
        self.states.last().expect("trajectory is never empty")
    }
}

struct Field<'a> {
    obj: &'a ObjectiveHandle,
    damping: f64,
    force: f64,
    delta2: f64,
}

impl Field<'_> {
    fn eval(&self, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let f = self.obj.objective();
        let g = f.gradient(x);
        let hv = if self.delta2 > 0.0 {
            f.hessian_vector(x, v)
                .expect("hvp capability checked before integration")
        } else {
            vec![0.0; x.len()]
        };
        let dv = (0..x.len())
            .map(|i| -self.damping * v[i] - self.force * g[i] - self.delta2 * hv[i])
            .collect();
        (v.to_vec(), dv)
    }

    fn rk4(&self, x: &mut [f64], v: &mut [f64], h: f64) {
        let shift = |base: &[f64], d: &[f64], c: f64| -> Vec<f64> {
            base.iter().zip(d).map(|(b, di)| b + c * di).collect()
        };
        let (k1x, k1v) = self.eval(x, v);
        let (k2x, k2v) = self.eval(&shift(x, &k1x, h / 2.0), &shift(v, &k1v, h / 2.0));
        let (k3x, k3v) = self.eval(&shift(x, &k2x, h / 2.0), &shift(v, &k2v, h / 2.0));
        let (k4x, k4v) = self.eval(&shift(x, &k3x, h), &shift(v, &k3v, h));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
}

fn run_fixed(
    field: &Field<'_>,
    x0: &Vector,
    v0: &Vector,
    steps: usize,
    h: f64,
    stride: Option<usize>,
) -> Result<Vec<ContinuousState>> {
    let mut x = x0.as_slice().to_vec();
    let mut v = v0.as_slice().to_vec();
    let snapshot = |t: f64, x: &[f64], v: &[f64]| ContinuousState {
        t,
        x: Vector::from_raw(x.to_vec()),
        v: Vector::from_raw(v.to_vec()),
    };
    let mut out = vec![snapshot(0.0, &x, &v)];
    for j in 1..=steps {
        field.rk4(&mut x, &mut v, h);
        let t = j as f64 * h;
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::BlowUp { time: t });
        }
        match stride {
            Some(s) if j % s == 0 || j == steps => out.push(snapshot(t, &x, &v)),
            None if j == steps => out.push(snapshot(t, &x, &v)),
            _ => {}
        }
    }
    Ok(out)
}

/// The step is shrunk so that an integer number of steps lands on `t_end`.
pub fn integrate(
    obj: &ObjectiveHandle,
    x0: &Vector,
    v0: &Vector,
    cfg: &ContinuousRunConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    for z in [x0, v0] {
        if z.dim() != obj.dim() {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                actual: z.dim(),
            });
        }
    }
    if cfg.delta2 > 0.0 && !obj.capabilities().has_hvp {
        return Err(Error::Unsupported(
            "hessian-vector products needed when delta2 > 0",
        ));
    }
    let field = Field {
        obj,
        damping: 2.0 * obj.mu().sqrt(),
        force: 1.0 + cfg.delta1,
        delta2: cfg.delta2,
    };
    let steps = (cfg.t_end / cfg.h - 1e-9).ceil().max(1.0) as usize;
    let h = cfg.t_end / steps as f64;
    let states = run_fixed(&field, x0, v0, steps, h, Some(cfg.record_stride))?;
    let fine = run_fixed(&field, x0, v0, 2 * steps, h / 2.0, None)?;

    let coarse_end = states.last().expect("nonempty");
    let fine_end = fine.last().expect("nonempty");
    let diff = coarse_end
        .x
        .distance(&fine_end.x)
        .hypot(coarse_end.v.distance(&fine_end.v));
    let scale = fine_end.x.norm().hypot(fine_end.v.norm());
    let richardson_error = if scale > 0.0 {
        diff / scale
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Trajectory {
        states,
        richardson_error,
        reliable: richardson_error <= 1e-6,
    })
}

/// The bracketed part of the continuous Lyapunov function, without `e^{sqrt(mu) t}`.
fn lyapunov_inner(
    obj: &ObjectiveHandle,
    x: &Vector,
    v: &Vector,
    reference: &ReferenceSolution,
    delta1: f64,
    delta2: f64,
) -> Result<f64> {
    let gap = obj.value(x)? - reference.f_star;
    let g = obj.gradient(x)?;
    let rm = obj.mu().sqrt();
    let w = Vector::combine(&[(1.0, v), (rm, x), (-rm, &reference.x_star), (delta2, &g)]);
    Ok((1.0 + delta1) * gap + 0.5 * w.norm_sq())
}

/// `E(t) = e^{sqrt(mu) t} [(1 + d1)(f(X) - f*) + |X' + sqrt(mu)(X - x*) + d2 grad f(X)|^2 / 2]`.
pub fn lyapunov_continuous(
    obj: &ObjectiveHandle,
    state: &ContinuousState,
    reference: &ReferenceSolution,
    delta1: f64,
    delta2: f64,
) -> Result<f64> {
    let inner = lyapunov_inner(obj, &state.x, &state.v, reference, delta1, delta2)?;
    Ok((obj.mu().sqrt() * state.t).exp() * inner)
}

/// Extra exponent in the sharpened continuous rate; needs `0 < sqrt(mu) d2 / 2 < d1`.
pub fn compute_c1(mu: f64, delta1: f64, delta2: f64) -> Result<f64> {
    let rm = mu.sqrt();
    if !(rm * delta2 / 2.0 > 0.0) {
        return Err(Error::usage(format!(
            "compute_c1 needs sqrt(mu) * delta2 / 2 > 0, got {}",
            rm * delta2 / 2.0
        )));
    }
    if !(rm * delta2 / 2.0 < delta1) {
        return Err(Error::usage(format!(
            "compute_c1 needs sqrt(mu) * delta2 / 2 < delta1, got {} >= {delta1}",
            rm * delta2 / 2.0
        )));
    }
    let first = 2.0 * mu * delta2 * (delta1 - rm * delta2 / 2.0)
        / (1.0 + delta1 + 3.0 * mu * delta2 * delta2);
    Ok(first.min(rm / 3.0).min(rm * delta1 / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousRegime {
    /// `0 <= sqrt(mu) d2 / 2 <= d1`: full-rate bound and monotone `E`.
    Balanced,
    /// `d1 = 0 < d2` with `d2^2 L < 1`: the slower envelope.
    GradientCorrectionOnly,
    /// `d1 = 0 < d2` with `d2^2 L >= 1`: the envelope does not decay.
    Vacuous,
    /// No bound applies.
    Uncovered,
}

impl ContinuousRegime {
    pub fn classify(mu: f64, lipschitz: f64, delta1: f64, delta2: f64) -> Self {
        if mu.sqrt() * delta2 / 2.0 <= delta1 {
            ContinuousRegime::Balanced
        } else if delta1 == 0.0 {
            if delta2 * delta2 * lipschitz < 1.0 {
                ContinuousRegime::GradientCorrectionOnly
            } else {
                ContinuousRegime::Vacuous
            }
        } else {
            ContinuousRegime::Uncovered
        }
    }

    /// Whether the bound is asserted (not merely reported).
    pub fn asserted(self) -> bool {
        matches!(
            self,
            ContinuousRegime::Balanced | ContinuousRegime::GradientCorrectionOnly
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremReport {
    pub regime: ContinuousRegime,
    /// Everything asserted in this regime was verified.
    pub holds: bool,
    pub bound_holds: bool,
    pub lyapunov_monotone: bool,
    /// Largest `f-gap - bound` over samples; negative means slack everywhere.
    pub worst_margin: f64,
    pub lyapunov_initial: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRow {
    pub t: f64,
    pub f_gap: f64,
    pub lyapunov: f64,
    /// NaN outside the regimes with a bound.
    pub bound_thm1: f64,
    /// NaN unless `0 < sqrt(mu) d2 / 2 < d1`.
    pub bound_thm2: f64,
}

/// Samples of gap, Lyapunov value and both envelopes along a trajectory.
pub fn continuous_rows(
    obj: &ObjectiveHandle,
    trajectory: &Trajectory,
    reference: &ReferenceSolution,
    delta1: f64,
    delta2: f64,
) -> Result<Vec<ContinuousRow>> {
    let mu = obj.mu();
    let rm = mu.sqrt();
    let regime = ContinuousRegime::classify(mu, obj.lipschitz(), delta1, delta2);
    let c1 = compute_c1(mu, delta1, delta2).ok();
    let first = trajectory
        .states
        .first()
        .expect("trajectory is never empty");
    let e0 = lyapunov_continuous(obj, first, reference, delta1, delta2)?;
    trajectory
        .states
        .iter()
        .map(|st| {
            let t = st.t;
            let bound_thm1 = match regime {
                ContinuousRegime::Balanced => e0 * (-rm * t).exp() / (1.0 + delta1),
                ContinuousRegime::GradientCorrectionOnly | ContinuousRegime::Vacuous => {
                    e0 * (-rm * t * (1.0 - delta2 * delta2 * obj.lipschitz())).exp()
                }
                ContinuousRegime::Uncovered => f64::NAN,
            };
            let bound_thm2 = c1.map_or(f64::NAN, |c1| e0 * (-(rm + c1) * t).exp() / (1.0 + delta1));
            Ok(ContinuousRow {
                t,
                f_gap: obj.value(&st.x)? - reference.f_star,
                lyapunov: lyapunov_continuous(obj, st, reference, delta1, delta2)?,
                bound_thm1,
                bound_thm2,
            })
        })
        .collect()
}

/// Checks the first continuous theorem along `trajectory`: bound with
/// tolerance `1e-7 (1 + E(0))`, and in the balanced regime `E` non-increasing
/// between samples within `1e-7 E(0)`.
pub fn verify_theorem1(
    obj: &ObjectiveHandle,
    trajectory: &Trajectory,
    reference: &ReferenceSolution,
    delta1: f64,
    delta2: f64,
) -> Result<TheoremReport> {
    let rows = continuous_rows(obj, trajectory, reference, delta1, delta2)?;
    let regime = ContinuousRegime::classify(obj.mu(), obj.lipschitz(), delta1, delta2);
    let e0 = rows[0].lyapunov;
    let tol = 1e-7 * (1.0 + e0);
    let worst_margin = rows
        .iter()
        .map(|r| r.f_gap - r.bound_thm1)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound_holds = regime != ContinuousRegime::Uncovered && worst_margin <= tol;
    let lyapunov_monotone = rows
        .windows(2)
        .all(|w| w[1].lyapunov <= w[0].lyapunov + 1e-7 * e0);
    let holds = match regime {
        ContinuousRegime::Balanced => bound_holds && lyapunov_monotone,
        ContinuousRegime::GradientCorrectionOnly => bound_holds,
        ContinuousRegime::Vacuous | ContinuousRegime::Uncovered => true,
    };
    Ok(TheoremReport {
        regime,
        holds,
        bound_holds,
        lyapunov_monotone,
        worst_margin,
        lyapunov_initial: e0,
    })
}

/// Checks the sharpened bound `E(0) e^{-(sqrt(mu) + c1) t} / (1 + d1)` within
/// `1e-7 E(0)`. Fails with a usage error when `c1` is undefined.
pub fn verify_theorem2(
    obj: &ObjectiveHandle,
    trajectory: &Trajectory,
    reference: &ReferenceSolution,
    delta1: f64,
    delta2: f64,
) -> Result<TheoremReport> {
    compute_c1(obj.mu(), delta1, delta2)?;
    let rows = continuous_rows(obj, trajectory, reference, delta1, delta2)?;
    let e0 = rows[0].lyapunov;
    let worst_margin = rows
        .iter()
        .map(|r| r.f_gap - r.bound_thm2)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound_holds = worst_margin <= 1e-7 * e0;
    let lyapunov_monotone = rows
        .windows(2)
        .all(|w| w[1].lyapunov <= w[0].lyapunov + 1e-7 * e0);
    Ok(TheoremReport {
        regime: ContinuousRegime::Balanced,
        holds: bound_holds && lyapunov_monotone,
        bound_holds,
        lyapunov_monotone,
        worst_margin,
        lyapunov_initial: e0,
    })
}

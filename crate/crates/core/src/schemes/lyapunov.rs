use super::{SchemeConfig, SchemeKind};
use crate::error::{Error, Result};
use crate::objective::{ObjectiveHandle, ReferenceSolution};
use crate::vector::Vector;

/// Per-step growth factor of the Lyapunov prefactor.
pub(crate) fn prefactor_base(kind: SchemeKind, mu: f64, s: f64) -> Option<f64> {
    let r = (mu * s).sqrt();
    match kind {
        SchemeKind::Implicit | SchemeKind::ModifiedSymplectic => Some(1.0 + r),
        SchemeKind::Symplectic => Some(1.0 + r / (1.0 + r)),
        _ => None,
    }
}

/// `base^k * inner` computed in log space so large `k` cannot overflow early.
pub(crate) fn with_prefactor(inner: f64, base: f64, k: usize) -> f64 {
    if inner == 0.0 || !inner.is_finite() {
        return inner;
    }
    inner.signum() * (k as f64 * base.ln() + inner.abs().ln()).exp()
}

fn mixed_norm_sq(terms: &[(f64, &[f64])]) -> f64 {
    let n = terms[0].1.len();
    (0..n)
        .map(|i| {
            let w: f64 = terms.iter().map(|(c, v)| c * v[i]).sum();
            w * w
        })
        .sum::<f64>()
        * 0.5
}

pub(crate) struct Snapshot<'a> {
    pub gap: f64,
    pub x: &'a [f64],
    pub g: &'a [f64],
    pub x_star: &'a [f64],
}

pub(crate) fn implicit_inner(cfg: &SchemeConfig, mu: f64, at: &Snapshot<'_>, v: &[f64]) -> f64 {
    let rm = mu.sqrt();
    (1.0 + cfg.delta1) * at.gap
        + mixed_norm_sq(&[(1.0, v), (rm, at.x), (-rm, at.x_star), (cfg.delta2, at.g)])
}

/// Shared by both symplectic variants; `c = 1` gives the plain scheme.
fn symplectic_family_inner(
    cfg: &SchemeConfig,
    mu: f64,
    c: f64,
    at: &Snapshot<'_>,
    x_next: &[f64],
) -> f64 {
    let rm = mu.sqrt();
    let rs = cfg.s.sqrt();
    let g_sq: f64 = at.g.iter().map(|v| v * v).sum();
    (1.0 + cfg.delta1) / c * (at.gap - cfg.delta2 * rs / (2.0 * c) * g_sq)
        + mixed_norm_sq(&[
            (1.0 / rs, x_next),
            (-1.0 / rs, at.x),
            (rm / c, x_next),
            (-rm / c, at.x_star),
            (cfg.delta2 / c, at.g),
        ])
}

pub(crate) fn symplectic_inner(
    cfg: &SchemeConfig,
    mu: f64,
    at: &Snapshot<'_>,
    x_next: &[f64],
) -> f64 {
    symplectic_family_inner(cfg, mu, 1.0, at, x_next)
}

pub(crate) fn modified_inner(
    cfg: &SchemeConfig,
    mu: f64,
    at: &Snapshot<'_>,
    x_next: &[f64],
) -> f64 {
    symplectic_family_inner(cfg, mu, 1.0 - (mu * cfg.s).sqrt(), at, x_next)
}

fn check_dims(obj: &ObjectiveHandle, vs: &[&Vector], reference: &ReferenceSolution) -> Result<()> {
    for v in vs.iter().copied().chain([&reference.x_star]) {
        if v.dim() != obj.dim() {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                actual: v.dim(),
            });
        }
    }
    Ok(())
}

/// `(1 + sqrt(mu s))^k [(1 + d1)(f(x_k) - f*) + |v_k + sqrt(mu)(x_k - x*) + d2 grad f(x_k)|^2 / 2]`.
pub fn lyapunov_implicit(
    obj: &ObjectiveHandle,
    x_k: &Vector,
    v_k: &Vector,
    reference: &ReferenceSolution,
    cfg: &SchemeConfig,
    k: usize,
) -> Result<f64> {
    check_dims(obj, &[x_k, v_k], reference)?;
    let mu = obj.mu();
    let g = obj.gradient(x_k)?;
    let at = Snapshot {
        gap: obj.value(x_k)? - reference.f_star,
        x: x_k,
        g: &g,
        x_star: &reference.x_star,
    };
    let inner = implicit_inner(cfg, mu, &at, v_k);
    let base = prefactor_base(SchemeKind::Implicit, mu, cfg.s).expect("implicit base");
    Ok(with_prefactor(inner, base, k))
}

/// Symplectic Lyapunov value at `k`, built from `x_k` and `x_{k+1}`.
pub fn lyapunov_symplectic(
    obj: &ObjectiveHandle,
    x_k: &Vector,
    x_next: &Vector,
    reference: &ReferenceSolution,
    cfg: &SchemeConfig,
    k: usize,
) -> Result<f64> {
    check_dims(obj, &[x_k, x_next], reference)?;
    let mu = obj.mu();
    let g = obj.gradient(x_k)?;
    let at = Snapshot {
        gap: obj.value(x_k)? - reference.f_star,
        x: x_k,
        g: &g,
        x_star: &reference.x_star,
    };
    let inner = symplectic_inner(cfg, mu, &at, x_next);
    let base = prefactor_base(SchemeKind::Symplectic, mu, cfg.s).expect("symplectic base");
    Ok(with_prefactor(inner, base, k))
}

/// Modified symplectic Lyapunov value at `k`; needs `sqrt(mu s) < 1`.
pub fn lyapunov_modified(
    obj: &ObjectiveHandle,
    x_k: &Vector,
    x_next: &Vector,
    reference: &ReferenceSolution,
    cfg: &SchemeConfig,
    k: usize,
) -> Result<f64> {
    check_dims(obj, &[x_k, x_next], reference)?;
    let mu = obj.mu();
    if (mu * cfg.s).sqrt() >= 1.0 {
        return Err(Error::usage(format!(
            "modified Lyapunov function needs sqrt(mu s) < 1, got {}",
            (mu * cfg.s).sqrt()
        )));
    }
    let g = obj.gradient(x_k)?;
    let at = Snapshot {
        gap: obj.value(x_k)? - reference.f_star,
        x: x_k,
        g: &g,
        x_star: &reference.x_star,
    };
    let inner = modified_inner(cfg, mu, &at, x_next);
    let base = prefactor_base(SchemeKind::ModifiedSymplectic, mu, cfg.s).expect("modified base");
    Ok(with_prefactor(inner, base, k))
}

use serde::{Deserialize, Serialize};

use super::{SchemeConfig, SchemeKind};
use crate::error::{Error, Result};

/// Relative slack tolerated on non-strict inequalities, so that parameters
/// placed exactly on a boundary survive round-off.
const BOUNDARY_RTOL: f64 = 1e-12;

/// A set of sufficient parameter conditions for a Lyapunov certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// `0 <= sqrt(mu) d2 / 2 <= d1`; also the continuous-time condition.
    ImplicitBalance,
    /// The three conditions for the symplectic scheme.
    Symplectic,
    /// The two-sided `d2` window that implies the symplectic conditions.
    SymplecticSufficient,
    ModifiedSymplectic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub id: String,
    pub satisfied: bool,
    /// Left side minus right side; negative means satisfied.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kind: SchemeKind,
    /// `None` for baselines, which no certificate covers.
    pub certificate: Option<Certificate>,
    pub entries: Vec<ConditionEntry>,
    pub overall: bool,
}

impl ConditionReport {
    fn new(
        kind: SchemeKind,
        certificate: Option<Certificate>,
        entries: Vec<ConditionEntry>,
    ) -> Self {
        let overall = entries.iter().all(|e| e.satisfied);
        ConditionReport {
            kind,
            certificate,
            entries,
            overall,
        }
    }

    /// A certificate exists and all its conditions hold.
    pub fn certifies(&self) -> bool {
        self.certificate.is_some() && self.overall
    }

    pub fn failed(&self) -> impl Iterator<Item = &ConditionEntry> {
        self.entries.iter().filter(|e| !e.satisfied)
    }
}

fn le(id: &str, lhs: f64, rhs: f64) -> ConditionEntry {
    le_scaled(id, lhs - rhs, lhs.abs().max(rhs.abs()))
}

fn le_scaled(id: &str, slack: f64, scale: f64) -> ConditionEntry {
    ConditionEntry {
        id: id.to_string(),
        satisfied: slack <= BOUNDARY_RTOL * scale,
        slack,
    }
}

fn lt(id: &str, lhs: f64, rhs: f64) -> ConditionEntry {
    ConditionEntry {
        id: id.to_string(),
        satisfied: lhs < rhs,
        slack: lhs - rhs,
    }
}

/// Evaluates the conditions of `certificate` for the given parameters.
pub fn check_certificate(
    certificate: Certificate,
    mu: f64,
    lipschitz: f64,
    delta1: f64,
    delta2: f64,
    s: f64,
) -> Vec<ConditionEntry> {
    let rm = mu.sqrt();
    let rs = s.sqrt();
    let r = rm * rs;
    let l = lipschitz;
    let boost = 1.0 + delta1;
    match certificate {
        Certificate::ImplicitBalance => vec![
            le("correction_nonnegative", 0.0, rm * delta2 / 2.0),
            le("correction_balance", rm * delta2 / 2.0, delta1),
        ],
        Certificate::Symplectic => {
            let q = r / (1.0 + r);
            let terms = [
                q * delta2 * delta2,
                -delta2 * rs * boost * (q + 2.0),
                boost * boost * s,
                -q * delta1 / l,
                2.0 * mu * rs / ((1.0 + r) * l) * (delta2 - rs * boost),
            ];
            vec![
                le("step_curvature", delta2 * rs, 1.0 / l),
                le("correction_cap", delta2, rs * boost),
                le_scaled(
                    "rate_balance",
                    terms.iter().sum(),
                    terms.iter().map(|t| t.abs()).sum(),
                ),
            ]
        }
        Certificate::SymplecticSufficient => vec![
            lt("step_curvature_strict", delta2 * rs, 1.0 / l),
            le("correction_floor", rs * boost / 2.0, delta2),
            le("correction_cap", delta2, rs * boost),
        ],
        Certificate::ModifiedSymplectic => {
            let c = 1.0 - r;
            vec![
                lt("momentum_positive", r, 1.0),
                le("step_curvature", delta2 * rs / c, 1.0 / l),
                le("correction_floor", rs * boost / 2.0, delta2),
                le("correction_cap", delta2, rs * boost),
                le("gradient_boost", 1.0 / c, boost),
            ]
        }
    }
}

/// Conditions of the primary certificate for `kind`. Baselines get an empty
/// report with no certificate.
pub fn check_conditions(
    kind: SchemeKind,
    mu: f64,
    lipschitz: f64,
    delta1: f64,
    delta2: f64,
    s: f64,
) -> ConditionReport {
    let certificate = match kind {
        SchemeKind::Implicit => Certificate::ImplicitBalance,
        SchemeKind::Symplectic => Certificate::Symplectic,
        SchemeKind::ModifiedSymplectic => Certificate::ModifiedSymplectic,
        _ => return ConditionReport::new(kind, None, Vec::new()),
    };
    let entries = check_certificate(certificate, mu, lipschitz, delta1, delta2, s);
    ConditionReport::new(kind, Some(certificate), entries)
}

/// Like [`check_conditions`], but for the symplectic scheme falls back to the
/// sufficient window when the primary conditions fail.
pub fn certification_report(cfg: &SchemeConfig, mu: f64, lipschitz: f64) -> ConditionReport {
    let primary = check_conditions(cfg.kind, mu, lipschitz, cfg.delta1, cfg.delta2, cfg.s);
    if cfg.kind == SchemeKind::Symplectic && !primary.overall {
        let entries = check_certificate(
            Certificate::SymplecticSufficient,
            mu,
            lipschitz,
            cfg.delta1,
            cfg.delta2,
            cfg.s,
        );
        let fallback =
            ConditionReport::new(cfg.kind, Some(Certificate::SymplecticSufficient), entries);
        if fallback.overall {
            return fallback;
        }
    }
    primary
}

/// The f-gap envelope needs strict `d2 sqrt(s) < 1/L` (scaled for the
/// modified scheme) on top of the Lyapunov conditions.
pub(crate) fn strict_gap_condition(cfg: &SchemeConfig, mu: f64, lipschitz: f64) -> bool {
    let rs = cfg.s.sqrt();
    match cfg.kind {
        SchemeKind::Implicit => true,
        SchemeKind::Symplectic => cfg.delta2 * rs * lipschitz < 1.0,
        SchemeKind::ModifiedSymplectic => cfg.delta2 * rs * lipschitz < 1.0 - (mu * cfg.s).sqrt(),
        _ => false,
    }
}

fn check_curvature(mu: f64, lipschitz: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= lipschitz && lipschitz.is_finite()) {
        return Err(Error::usage(format!(
            "need 0 < mu <= L, got mu = {mu}, L = {lipschitz}"
        )));
    }
    Ok(())
}

/// Symplectic scheme with `s = 1/L`; needs `(1 + d1)/2 <= sqrt(L) d2 < 1`.
pub fn make_algorithm1(mu: f64, lipschitz: f64, delta1: f64, delta2: f64) -> Result<SchemeConfig> {
    check_curvature(mu, lipschitz)?;
    let scaled = lipschitz.sqrt() * delta2;
    let floor = (1.0 + delta1) / 2.0;
    if !le("", floor, scaled).satisfied {
        return Err(Error::usage(format!(
            "algorithm 1 needs (1 + delta1)/2 <= sqrt(L) delta2, got {floor} > {scaled}"
        )));
    }
    if !(scaled < 1.0) {
        return Err(Error::usage(format!(
            "algorithm 1 needs sqrt(L) delta2 < 1, got {scaled}"
        )));
    }
    SchemeConfig::new(SchemeKind::Symplectic, delta1, delta2, 1.0 / lipschitz)
}

/// The closed interval allowed for `d2` by [`make_algorithm2`].
pub fn algorithm2_interval(mu: f64, lipschitz: f64) -> (f64, f64) {
    let w = 2.0 * lipschitz.sqrt() - mu.sqrt();
    (1.0 / (2.0 * w), 1.0 / w)
}

/// Modified symplectic scheme with `s = 1/(4L)` and
/// `d1 = sqrt(mu)/(2 sqrt(L) - sqrt(mu))`.
pub fn make_algorithm2(mu: f64, lipschitz: f64, delta2: f64) -> Result<SchemeConfig> {
    check_curvature(mu, lipschitz)?;
    let (lo, hi) = algorithm2_interval(mu, lipschitz);
    if !(le("", lo, delta2).satisfied && le("", delta2, hi).satisfied) {
        return Err(Error::usage(format!(
            "algorithm 2 needs delta2 in [{lo}, {hi}], got {delta2}"
        )));
    }
    let delta1 = mu.sqrt() / (2.0 * lipschitz.sqrt() - mu.sqrt());
    SchemeConfig::new(
        SchemeKind::ModifiedSymplectic,
        delta1,
        delta2,
        1.0 / (4.0 * lipschitz),
    )
}

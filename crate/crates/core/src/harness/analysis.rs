use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schemes::TraceRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `exp(slope)` of `ln(f_gap)` against `k`.
    pub rate: f64,
    pub r_squared: f64,
    pub rows_used: usize,
}

/// Least-squares fit of `ln(f_gap)` on `k` over the last `tail_fraction` of
/// the rows. Rows with `f_gap <= 0` are dropped first; at least 20 must remain.
pub fn fit_rate(rows: &[TraceRow], tail_fraction: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Analysis(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let positive: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.f_gap > 0.0 && r.f_gap.is_finite())
        .map(|r| (r.k as f64, r.f_gap.ln()))
        .collect();
    let take = ((positive.len() as f64) * tail_fraction).ceil() as usize;
    let tail = &positive[positive.len() - take.min(positive.len())..];
    if tail.len() < 20 {
        return Err(Error::Analysis(format!(
            "need at least 20 tail rows with positive f_gap, have {}",
            tail.len()
        )));
    }
    let n = tail.len() as f64;
    let mk = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mk).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mk) * (p.1 - my)).sum();
    let syy: f64 = tail.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(RateFit {
        rate: slope.exp(),
        r_squared,
        rows_used: tail.len(),
    })
}

/// Sign changes of `f_gap(k+1) - f_gap(k)`, skipping differences smaller
/// than `1e-14 (1 + f_gap(0))`.
pub fn oscillation_count(rows: &[TraceRow]) -> usize {
    let Some(first) = rows.first() else {
        return 0;
    };
    let floor = 1e-14 * (1.0 + first.f_gap.abs());
    let mut last_sign = 0.0;
    let mut count = 0;
    for w in rows.windows(2) {
        let d = w[1].f_gap - w[0].f_gap;
        if !(d.abs() >= floor) {
            continue;
        }
        let sign = d.signum();
        if last_sign != 0.0 && sign != last_sign {
            count += 1;
        }
        last_sign = sign;
    }
    count
}

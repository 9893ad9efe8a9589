use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Objective, ObjectiveHandle};

/// One labelled example with sparse features (0-based indices, ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub label: f64,
}

impl Sample {
    pub fn new(mut pairs: Vec<(usize, f64)>, label: f64) -> Result<Self> {
        if label != 1.0 && label != -1.0 {
            return Err(Error::usage(format!(
                "labels must be +1 or -1, got {label}"
            )));
        }
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::usage("duplicate feature index in sample"));
        }
        if pairs.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::usage("feature values must be finite"));
        }
        let (indices, values) = pairs.into_iter().unzip();
        Ok(Sample {
            indices,
            values,
            label,
        })
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| v * x[i])
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    fn add_scaled_to(&self, alpha: f64, out: &mut [f64]) {
        for (&i, v) in self.indices.iter().zip(&self.values) {
            out[i] += alpha * v;
        }
    }
}

/// `f(x) = (1/m) sum_i ln(1 + exp(-b_i a_i^T x)) + (reg/2) |x|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticProblem {
    samples: Vec<Sample>,
    n: usize,
    reg: f64,
    lipschitz: f64,
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem {
    /// `reg = 0` is accepted for raw evaluation, but such a problem cannot
    /// become an `ObjectiveHandle`.
    pub fn new(samples: Vec<Sample>, n: usize, reg: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::usage("logistic problem needs at least one sample"));
        }
        if n == 0 {
            return Err(Error::usage("feature dimension must be positive"));
        }
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::usage(format!(
                "regularizer must be finite and >= 0, got {reg}"
            )));
        }
        for s in &samples {
            if s.label != 1.0 && s.label != -1.0 {
                return Err(Error::usage(format!(
                    "labels must be +1 or -1, got {}",
                    s.label
                )));
            }
            if s.indices.last().is_some_and(|&i| i >= n) {
                return Err(Error::usage("feature index exceeds dimension"));
            }
        }
        let m = samples.len() as f64;
        let lipschitz = samples.iter().map(Sample::norm_sq).sum::<f64>() / (4.0 * m) + reg;
        Ok(LogisticProblem {
            samples,
            n,
            reg,
            lipschitz,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn with_reg(mut self, reg: f64) -> Result<Self> {
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::usage(format!(
                "regularizer must be finite and >= 0, got {reg}"
            )));
        }
        self.lipschitz += reg - self.reg;
        self.reg = reg;
        Ok(self)
    }

    pub fn handle(self) -> Result<ObjectiveHandle> {
        ObjectiveHandle::new(self)
    }
}

impl Objective for LogisticProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn mu(&self) -> f64 {
        self.reg
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn value(&self, x: &[f64]) -> f64 {
        let loss: f64 = self
            .samples
            .iter()
            .map(|s| softplus(-s.label * s.dot(x)))
            .sum();
        loss / self.m() as f64 + 0.5 * self.reg * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let inv_m = 1.0 / self.m() as f64;
        let mut g: Vec<f64> = x.iter().map(|v| self.reg * v).collect();
        for s in &self.samples {
            let w = -s.label * sigmoid(-s.label * s.dot(x)) * inv_m;
            s.add_scaled_to(w, &mut g);
        }
        g
    }

    fn hessian_vector(&self, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        let inv_m = 1.0 / self.m() as f64;
        let mut out: Vec<f64> = v.iter().map(|vi| self.reg * vi).collect();
        for s in &self.samples {
            let p = sigmoid(s.dot(x));
            s.add_scaled_to(p * (1.0 - p) * s.dot(v) * inv_m, &mut out);
        }
        Some(out)
    }

    fn has_hessian_vector(&self) -> bool {
        true
    }
}

/// How raw LIBSVM labels become +1/-1.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    /// Positive values map to +1, everything else to -1.
    #[default]
    Sign,
    /// Labels must already be exactly +1 or -1.
    Strict,
    /// The given value maps to +1, everything else to -1.
    PositiveClass(f64),
}

impl LabelPolicy {
    fn map(self, raw: f64) -> Option<f64> {
        match self {
            LabelPolicy::Sign => Some(if raw > 0.0 { 1.0 } else { -1.0 }),
            LabelPolicy::Strict => (raw == 1.0 || raw == -1.0).then_some(raw),
            LabelPolicy::PositiveClass(c) => Some(if raw == c { 1.0 } else { -1.0 }),
        }
    }
}

/// Parses LIBSVM text. `origin` only labels error messages.
pub fn parse_libsvm(
    text: &str,
    origin: &std::path::Path,
    policy: LabelPolicy,
    reg: f64,
) -> Result<LogisticProblem> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut samples = Vec::new();
    let mut n = 0usize;
    for (lineno, raw_line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let raw_label: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(lineno, format!("bad label {label_tok:?}")))?;
        let label = policy
            .map(raw_label)
            .ok_or_else(|| parse_err(lineno, format!("label {raw_label} not allowed by policy")))?;
        let mut pairs = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| parse_err(lineno, format!("bad feature index {idx:?}")))?;
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("bad feature value {val:?}")))?;
            if pairs.iter().any(|&(j, _)| j == idx - 1) {
                return Err(parse_err(lineno, format!("duplicate feature index {idx}")));
            }
            n = n.max(idx);
            pairs.push((idx - 1, val));
        }
        samples.push(Sample::new(pairs, label).map_err(|e| parse_err(lineno, e.to_string()))?);
    }
    if samples.is_empty() {
        return Err(Error::usage(format!("{}: no samples", origin.display())));
    }
    if n == 0 {
        return Err(Error::usage(format!("{}: no features", origin.display())));
    }
    LogisticProblem::new(samples, n, reg)
}

pub fn load_libsvm(
    path: impl AsRef<std::path::Path>,
    policy: LabelPolicy,
    reg: f64,
) -> Result<LogisticProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_libsvm(&text, path, policy, reg)
}

/// LIBSVM text for `problem`; re-parsing it yields the same samples.
pub fn to_libsvm_string(problem: &LogisticProblem) -> String {
    let mut out = String::new();
    for s in &problem.samples {
        out.push_str(if s.label > 0.0 { "+1" } else { "-1" });
        for (i, v) in s.indices.iter().zip(&s.values) {
            out.push_str(&format!(" {}:{v:?}", i + 1));
        }
        out.push('\n');
    }
    out
}

/// Synthetic data: roughly 80% dense Gaussian features, labels from a planted
/// linear model with 10% label noise in the margin.
pub fn synth_logistic(n: usize, m: usize, reg: f64, seed: u64) -> Result<LogisticProblem> {
    if n == 0 || m == 0 {
        return Err(Error::usage("synthetic problem needs n, m >= 1"));
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::usage(format!(
            "regularizer must be positive, got {reg}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let scale = 1.0 / (n as f64).sqrt();
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        let mut pairs = Vec::new();
        let mut margin = 0.0;
        for (j, w) in planted.iter().enumerate() {
            let keep = rng.random::<f64>() < 0.8;
            let v: f64 = rng.sample(StandardNormal);
            if keep {
                pairs.push((j, v));
                margin += v * w * scale;
            }
        }
        let noise: f64 = rng.sample(StandardNormal);
        let label = if margin + 0.1 * noise >= 0.0 {
            1.0
        } else {
            -1.0
        };
        samples.push(Sample::new(pairs, label)?);
    }
    LogisticProblem::new(samples, n, reg)
}

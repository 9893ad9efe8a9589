use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{
    load_libsvm, synth_logistic, LabelPolicy, QuadraticProblem, DEFAULT_REFERENCE_TOL,
};
use crate::schemes::{certification_report, SchemeConfig, SchemeKind, StopCriteria};

/// Overrides `output_dir` when set (the CLI applies it).
pub const OUTPUT_DIR_ENV: &str = "PERTURBODE_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    File {
        path: PathBuf,
        #[serde(default)]
        label_policy: LabelPolicy,
    },
    /// Drawn with the experiment seed.
    Synthetic { n: usize, m: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic {
        mu: f64,
        #[serde(rename = "L")]
        lipschitz: f64,
    },
    Logistic {
        source: DataSource,
        reg: f64,
    },
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Quadratic {
            mu: 1.0,
            lipschitz: 100.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum BuiltProblem {
    Quadratic(QuadraticProblem),
    Logistic(crate::problems::LogisticProblem),
}

impl ProblemSpec {
    pub fn build(&self, seed: u64) -> Result<BuiltProblem> {
        match self {
            ProblemSpec::Quadratic { mu, lipschitz } => Ok(BuiltProblem::Quadratic(
                QuadraticProblem::two_scale(*mu, *lipschitz)?,
            )),
            ProblemSpec::Logistic { source, reg } => {
                let p = match source {
                    DataSource::File { path, label_policy } => {
                        load_libsvm(path, *label_policy, *reg)?
                    }
                    DataSource::Synthetic { n, m } => synth_logistic(*n, *m, *reg, seed)?,
                };
                Ok(BuiltProblem::Logistic(p))
            }
        }
    }

    pub fn data_path(&self) -> Option<&Path> {
        match self {
            ProblemSpec::Logistic {
                source: DataSource::File { path, .. },
                ..
            } => Some(path),
            _ => None,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    /// Also the trace file stem.
    pub name: String,
    #[serde(flatten)]
    pub scheme: SchemeConfig,
    /// Run even if the parameters carry no certificate.
    #[serde(default, skip_serializing_if = "is_false")]
    pub allow_unverified: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_reference_tol() -> f64 {
    DEFAULT_REFERENCE_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    pub variants: Vec<VariantSpec>,
    #[serde(default)]
    pub stop: StopCriteria,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to all ones for quadratics and zero for logistic problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Symplectic runs with `(d1, d2)` in `{(0,0), (d1,0), (0,d2), (d1,d2)}` at
/// `s = 1/L`, plus NAG-SC. Variants without a certificate are flagged
/// `allow_unverified`.
pub fn paper_grid(
    mu: f64,
    lipschitz: f64,
    delta1_hat: f64,
    delta2_hat: f64,
) -> Result<Vec<VariantSpec>> {
    let s = 1.0 / lipschitz;
    let cases = [
        ("symplectic_0_0", 0.0, 0.0),
        ("symplectic_d1_0", delta1_hat, 0.0),
        ("symplectic_0_d2", 0.0, delta2_hat),
        ("symplectic_d1_d2", delta1_hat, delta2_hat),
    ];
    let mut out = Vec::new();
    for (name, d1, d2) in cases {
        let scheme = SchemeConfig::new(SchemeKind::Symplectic, d1, d2, s)?;
        let certified = certification_report(&scheme, mu, lipschitz).certifies();
        out.push(VariantSpec {
            name: name.to_string(),
            scheme,
            allow_unverified: !certified,
        });
    }
    out.push(VariantSpec {
        name: "nag_sc".to_string(),
        scheme: SchemeConfig::new(SchemeKind::NagSc, 0.0, 0.0, s)?,
        allow_unverified: false,
    });
    Ok(out)
}

/// Every `(d1, d2)` pair for one scheme, all flagged `allow_unverified`.
pub fn sweep_variants(
    kind: SchemeKind,
    s: f64,
    delta1s: &[f64],
    delta2s: &[f64],
) -> Result<Vec<VariantSpec>> {
    let mut out = Vec::new();
    for &d1 in delta1s {
        for &d2 in delta2s {
            out.push(VariantSpec {
                name: format!("{kind}_{d1}_{d2}"),
                scheme: SchemeConfig::new(kind, d1, d2, s)?,
                allow_unverified: true,
            });
        }
    }
    Ok(out)
}

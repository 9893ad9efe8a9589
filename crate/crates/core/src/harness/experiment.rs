use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::analysis::{fit_rate, oscillation_count, RateFit};
use super::config::{BuiltProblem, ExperimentConfig, ProblemSpec, VariantSpec};
use crate::error::{Error, Result};
use crate::objective::{ObjectiveHandle, ReferenceSolution};
use crate::problems::reference_solve;
use crate::schemes::{certification_report, run_scheme, IterateTrace, Termination};
use crate::vector::Vector;

/// Tail used for the summary's fitted rate.
pub const SUMMARY_TAIL_FRACTION: f64 = 0.5;

pub struct LoadedProblem {
    pub handle: ObjectiveHandle,
    pub built: BuiltProblem,
    pub reference: ReferenceSolution,
    pub default_x0: Vector,
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedReference {
    sha256: String,
    reg: f64,
    tol: f64,
    reference: ReferenceSolution,
}

fn cache_path(data: &Path, reg: f64) -> PathBuf {
    let name = data
        .file_name()
        .map_or_else(|| "data".into(), |n| n.to_string_lossy().into_owned());
    data.with_file_name(format!("{name}.reference-{:016x}.json", reg.to_bits()))
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Reads the cached reference for `(file hash, reg)` if it is valid for
/// `tol`; otherwise solves and tries to refresh the cache. A cache that
/// cannot be written is skipped.
fn cached_reference(
    handle: &ObjectiveHandle,
    data: &Path,
    reg: f64,
    tol: f64,
) -> Result<ReferenceSolution> {
    let sha = file_sha256(data)?;
    let path = cache_path(data, reg);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<CachedReference>(&text) {
            if c.sha256 == sha && c.reg == reg && c.tol <= tol && c.reference.verify(handle).is_ok()
            {
                return Ok(c.reference);
            }
        }
    }
    let reference = reference_solve(handle, tol)?;
    let entry = CachedReference {
        sha256: sha,
        reg,
        tol,
        reference: reference.clone(),
    };
    if let Ok(text) = serde_json::to_string_pretty(&entry) {
        let _ = fs::write(&path, text);
    }
    Ok(reference)
}

pub fn load_problem(spec: &ProblemSpec, seed: u64, reference_tol: f64) -> Result<LoadedProblem> {
    let built = spec.build(seed)?;
    let (handle, default_x0) = match &built {
        BuiltProblem::Quadratic(q) => (
            q.clone().handle()?,
            Vector::filled(q.eigenvalues().len(), 1.0),
        ),
        BuiltProblem::Logistic(p) => (p.clone().handle()?, Vector::zeros(p.n())),
    };
    let reference = match (spec, spec.data_path()) {
        (ProblemSpec::Logistic { reg, .. }, Some(path)) => {
            cached_reference(&handle, path, *reg, reference_tol)?
        }
        _ => reference_solve(&handle, reference_tol)?,
    };
    Ok(LoadedProblem {
        handle,
        built,
        reference,
        default_x0,
    })
}

#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub spec: VariantSpec,
    pub trace: IterateTrace,
    pub csv_path: PathBuf,
    pub fitted: Option<RateFit>,
    pub oscillations: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub variants: Vec<VariantOutcome>,
    pub summary_path: PathBuf,
    pub reference: ReferenceSolution,
}

impl ExperimentOutcome {
    /// 0 when every run met the tolerance, 2 if some hit `max_iters`, 3 if
    /// any diverged.
    pub fn exit_code(&self) -> i32 {
        let ends = self.variants.iter().map(|v| v.trace.termination);
        ends.map(|t| match t {
            Termination::ToleranceMet => 0,
            Termination::MaxIters => 2,
            Termination::Diverged => 3,
        })
        .max()
        .unwrap_or(0)
    }

    pub fn variant(&self, name: &str) -> Option<&VariantOutcome> {
        self.variants.iter().find(|v| v.spec.name == name)
    }
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    variant: &'a str,
    scheme: &'a str,
    delta1: f64,
    delta2: f64,
    step_size: f64,
    iterations: usize,
    termination: &'a str,
    fitted_rate: f64,
    oscillation_count: usize,
    lyapunov_certified: bool,
    bound_certified: bool,
    verified: bool,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !name.starts_with('.')
}

fn validate_variants(cfg: &ExperimentConfig, handle: &ObjectiveHandle) -> Result<()> {
    if cfg.variants.is_empty() {
        return Err(Error::usage("experiment has no scheme variants"));
    }
    for (i, v) in cfg.variants.iter().enumerate() {
        if !valid_name(&v.name) {
            return Err(Error::Config(format!(
                "variant name {:?} is not a valid file stem",
                v.name
            )));
        }
        if cfg.variants[..i].iter().any(|w| w.name == v.name) {
            return Err(Error::Config(format!(
                "duplicate variant name {:?}",
                v.name
            )));
        }
        v.scheme.validate_for(handle.mu())?;
        let report = certification_report(&v.scheme, handle.mu(), handle.lipschitz());
        if !v.scheme.kind.is_baseline() && !report.certifies() && !v.allow_unverified {
            let failed: Vec<&str> = report.failed().map(|e| e.id.as_str()).collect();
            return Err(Error::Config(format!(
                "variant {:?} fails its conditions ({}); set allow_unverified to run it anyway",
                v.name,
                failed.join(", ")
            )));
        }
    }
    Ok(())
}

/// Runs every variant (concurrently) and writes one trace CSV per variant
/// plus `summary.csv` into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let problem = load_problem(&cfg.problem, cfg.seed, cfg.reference_tol)?;
    run_experiment_on(cfg, &problem)
}

/// As [`run_experiment`], reusing an already loaded problem.
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    problem: &LoadedProblem,
) -> Result<ExperimentOutcome> {
    let handle = &problem.handle;
    validate_variants(cfg, handle)?;
    let x0 = match &cfg.x0 {
        Some(v) => Vector::new(v.clone())?,
        None => problem.default_x0.clone(),
    };
    if x0.dim() != handle.dim() {
        return Err(Error::DimensionMismatch {
            expected: handle.dim(),
            actual: x0.dim(),
        });
    }

    let traces: Vec<Result<IterateTrace>> = std::thread::scope(|scope| {
        let jobs: Vec<_> = cfg
            .variants
            .iter()
            .map(|v| {
                let x0 = &x0;
                scope
                    .spawn(move || run_scheme(handle, x0, &v.scheme, &cfg.stop, &problem.reference))
            })
            .collect();
        jobs.into_iter()
            .map(|j| j.join().expect("variant worker panicked"))
            .collect()
    });

    fs::create_dir_all(&cfg.output_dir)?;
    let mut variants = Vec::with_capacity(traces.len());
    for (spec, trace) in cfg.variants.iter().zip(traces) {
        let trace = trace?;
        let csv_path = cfg.output_dir.join(format!("{}.csv", spec.name));
        trace.write_csv(fs::File::create(&csv_path)?)?;
        variants.push(VariantOutcome {
            fitted: fit_rate(&trace.rows, SUMMARY_TAIL_FRACTION).ok(),
            oscillations: oscillation_count(&trace.rows),
            spec: spec.clone(),
            trace,
            csv_path,
        });
    }

    let summary_path = cfg.output_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_path)?;
    for v in &variants {
        let c = &v.trace.certification;
        w.serialize(SummaryRow {
            variant: &v.spec.name,
            scheme: v.spec.scheme.kind.name(),
            delta1: v.spec.scheme.delta1,
            delta2: v.spec.scheme.delta2,
            step_size: v.spec.scheme.s,
            iterations: v.trace.iterations(),
            termination: v.trace.termination.name(),
            fitted_rate: v.fitted.map_or(f64::NAN, |f| f.rate),
            oscillation_count: v.oscillations,
            lyapunov_certified: c.lyapunov_certified,
            bound_certified: c.bound_certified,
            verified: c.verified(),
        })?;
    }
    w.flush()?;

    Ok(ExperimentOutcome {
        variants,
        summary_path,
        reference: problem.reference.clone(),
    })
}

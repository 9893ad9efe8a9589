use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use perturbode::continuous::{
    continuous_rows, integrate, verify_theorem1, verify_theorem2, ContinuousRunConfig,
};
use perturbode::harness::{
    load_problem, paper_grid, run_experiment, sweep_variants, DataSource, ExperimentConfig,
    ExperimentOutcome, ProblemSpec, VariantSpec, OUTPUT_DIR_ENV,
};
use perturbode::schemes::certification_report;
use perturbode::spectral::coordinate_rates;
use perturbode::{
    finite_difference_check, LabelPolicy, QuadraticProblem, SchemeConfig, SchemeKind, Vector,
};

#[derive(Parser)]
#[command(
    name = "perturbode",
    version,
    about = "Perturbed accelerated-gradient experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme, or every variant of a config file.
    Run(RunArgs),
    /// Run a grid of (delta1, delta2) variants.
    Sweep(SweepArgs),
    /// Per-eigenvalue roots and rates of the symplectic scheme on a quadratic.
    Spectral(SpectralArgs),
    /// Integrate the perturbed ODE and check the continuous bounds.
    Continuous(ContinuousArgs),
    /// Report which sufficient conditions a scheme configuration meets.
    CheckConditions(CheckArgs),
    /// Finite-difference check of gradients and Hessian-vector products.
    GradCheck(GradCheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemKind {
    Quadratic,
    Logistic,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    /// LIBSVM file; without it a logistic problem uses synthetic data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Regularization weight of the logistic problem.
    #[arg(long)]
    reg: Option<f64>,
    /// `sign`, `strict`, or the raw label value of the positive class.
    #[arg(long)]
    label_policy: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "L")]
    lipschitz: Option<f64>,
    /// Features of synthetic logistic data.
    #[arg(long)]
    synth_n: Option<usize>,
    /// Samples of synthetic logistic data.
    #[arg(long)]
    synth_m: Option<usize>,
}

#[derive(Args, Clone)]
struct SchemeArgs {
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    /// Defaults to 1/L.
    #[arg(long)]
    step_size: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Run variants whose parameters carry no certificate.
    #[arg(long)]
    allow_unverified: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[command(flatten)]
    scheme: SchemeArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Scheme of the grid; without it the symplectic four-case grid plus NAG-SC is run.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    step_size: Option<f64>,
    /// Comma-separated delta1 values.
    #[arg(long, value_delimiter = ',')]
    delta1: Vec<f64>,
    /// Comma-separated delta2 values.
    #[arg(long, value_delimiter = ',')]
    delta2: Vec<f64>,
}

#[derive(Args)]
struct SpectralArgs {
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long = "L", default_value_t = 100.0)]
    lipschitz: f64,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    delta1: f64,
    #[arg(long, default_value_t = 0.0)]
    delta2: f64,
}

#[derive(Args)]
struct ContinuousArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 0.0)]
    delta1: f64,
    #[arg(long, default_value_t = 0.0)]
    delta2: f64,
    #[arg(long, default_value_t = 10.0)]
    t_end: f64,
    /// Defaults to min(1e-3, 1/(100 L)).
    #[arg(long)]
    h: Option<f64>,
    /// Record every n-th step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GradCheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Random points to probe.
    #[arg(long, default_value_t = 5)]
    points: usize,
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn label_policy(raw: &str) -> Result<LabelPolicy> {
    Ok(match raw {
        "sign" => LabelPolicy::Sign,
        "strict" => LabelPolicy::Strict,
        other => LabelPolicy::PositiveClass(other.parse().with_context(|| {
            format!("label policy must be sign, strict or a number, got {other:?}")
        })?),
    })
}

impl ProblemArgs {
    /// Applies the flags on top of `base`.
    fn apply(&self, base: ProblemSpec) -> Result<ProblemSpec> {
        let kind = match (self.problem, &base) {
            (Some(k), _) => k,
            (None, _) if self.data.is_some() || self.reg.is_some() => ProblemKind::Logistic,
            (None, ProblemSpec::Quadratic { .. }) => ProblemKind::Quadratic,
            (None, ProblemSpec::Logistic { .. }) => ProblemKind::Logistic,
        };
        Ok(match kind {
            ProblemKind::Quadratic => {
                let (mu0, l0) = match base {
                    ProblemSpec::Quadratic { mu, lipschitz } => (mu, lipschitz),
                    _ => (1.0, 100.0),
                };
                ProblemSpec::Quadratic {
                    mu: self.mu.unwrap_or(mu0),
                    lipschitz: self.lipschitz.unwrap_or(l0),
                }
            }
            ProblemKind::Logistic => {
                let (source0, reg0) = match base {
                    ProblemSpec::Logistic { source, reg } => (Some(source), reg),
                    _ => (None, 1e-2),
                };
                let source = match (&self.data, source0) {
                    (Some(path), _) => DataSource::File {
                        path: path.clone(),
                        label_policy: self
                            .label_policy
                            .as_deref()
                            .map(label_policy)
                            .transpose()?
                            .unwrap_or_default(),
                    },
                    (
                        None,
                        Some(DataSource::File {
                            path,
                            label_policy: lp,
                        }),
                    ) => DataSource::File {
                        path,
                        label_policy: self
                            .label_policy
                            .as_deref()
                            .map(label_policy)
                            .transpose()?
                            .unwrap_or(lp),
                    },
                    (None, Some(DataSource::Synthetic { n, m })) => DataSource::Synthetic {
                        n: self.synth_n.unwrap_or(n),
                        m: self.synth_m.unwrap_or(m),
                    },
                    (None, None) => DataSource::Synthetic {
                        n: self.synth_n.unwrap_or(20),
                        m: self.synth_m.unwrap_or(200),
                    },
                };
                ProblemSpec::Logistic {
                    source,
                    reg: self.reg.unwrap_or(reg0),
                }
            }
        })
    }
}

impl SchemeArgs {
    fn build(&self, default_kind: Option<SchemeKind>, lipschitz: f64) -> Result<SchemeConfig> {
        let kind = match (&self.scheme, default_kind) {
            (Some(s), _) => s.parse::<SchemeKind>()?,
            (None, Some(k)) => k,
            (None, None) => bail!("--scheme is required"),
        };
        Ok(SchemeConfig::new(
            kind,
            self.delta1.unwrap_or(0.0),
            self.delta2.unwrap_or(0.0),
            self.step_size.unwrap_or(1.0 / lipschitz),
        )?)
    }
}

fn base_config(exp: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &exp.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_json_str(r#"{"variants":[]}"#)?,
    };
    cfg.problem = exp.problem.apply(cfg.problem)?;
    if let Some(t) = exp.tol {
        cfg.stop.tol_grad = t;
    }
    if let Some(m) = exp.max_iters {
        cfg.stop.max_iters = m;
    }
    if let Some(s) = exp.seed {
        cfg.seed = s;
    }
    if let Some(o) = &exp.out {
        cfg.output_dir = o.clone();
    }
    if exp.allow_unverified {
        for v in &mut cfg.variants {
            v.allow_unverified = true;
        }
    }
    Ok(cfg)
}

/// `(mu, L)` of the configured problem.
fn curvature(spec: &ProblemSpec, seed: u64) -> Result<(f64, f64)> {
    let h = build_handle(spec, seed)?;
    Ok((h.mu(), h.lipschitz()))
}

fn build_handle(spec: &ProblemSpec, seed: u64) -> Result<perturbode::ObjectiveHandle> {
    use perturbode::harness::BuiltProblem;
    Ok(match spec.build(seed)? {
        BuiltProblem::Quadratic(q) => q.handle()?,
        BuiltProblem::Logistic(p) => p.handle()?,
    })
}

fn report(out: &ExperimentOutcome) -> ExitCode {
    println!(
        "{:<20} {:>10} {:>14} {:>10} {:>6} {:>9}",
        "variant", "iterations", "termination", "rate", "osc", "verified"
    );
    for v in &out.variants {
        println!(
            "{:<20} {:>10} {:>14} {:>10.6} {:>6} {:>9}",
            v.spec.name,
            v.trace.iterations(),
            v.trace.termination.name(),
            v.fitted.map_or(f64::NAN, |f| f.rate),
            v.oscillations,
            v.trace.certification.verified()
        );
    }
    eprintln!("summary written to {}", out.summary_path.display());
    ExitCode::from(out.exit_code() as u8)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = base_config(&args.exp)?;
    if args.scheme.scheme.is_some() || cfg.variants.is_empty() {
        let (_, l) = curvature(&cfg.problem, cfg.seed)?;
        let scheme = args.scheme.build(None, l)?;
        cfg.variants = vec![VariantSpec {
            name: scheme.kind.name().to_string(),
            scheme,
            allow_unverified: args.exp.allow_unverified,
        }];
    }
    Ok(report(&run_experiment(&cfg)?))
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut cfg = base_config(&args.exp)?;
    let (mu, l) = curvature(&cfg.problem, cfg.seed)?;
    let s = args.step_size.unwrap_or(1.0 / l);
    cfg.variants = match &args.scheme {
        None if args.delta1.is_empty() && args.delta2.is_empty() => {
            let mut grid = paper_grid(mu, l, (mu * s).sqrt(), s.sqrt())?;
            for v in &mut grid {
                v.scheme.s = s;
            }
            grid
        }
        _ => {
            let kind = args.scheme.as_deref().unwrap_or("symplectic").parse()?;
            let d1 = if args.delta1.is_empty() {
                vec![0.0]
            } else {
                args.delta1.clone()
            };
            let d2 = if args.delta2.is_empty() {
                vec![0.0]
            } else {
                args.delta2.clone()
            };
            sweep_variants(kind, s, &d1, &d2)?
        }
    };
    Ok(report(&run_experiment(&cfg)?))
}

fn cmd_spectral(args: SpectralArgs) -> Result<ExitCode> {
    let q = QuadraticProblem::two_scale(args.mu, args.lipschitz)?;
    let s = args.step_size.unwrap_or(1.0 / args.lipschitz);
    let cfg = SchemeConfig::new(SchemeKind::Symplectic, args.delta1, args.delta2, s)?;
    let rates = coordinate_rates(&q, &cfg)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "lambda,root1_re,root1_im,root2_re,root2_im,modulus,regime,gap_rate"
    )?;
    let mut worst = (0.0f64, 0.0f64);
    for (rec, r) in &rates {
        // Adding zero turns -0 into 0.
        let [(a, b), (c, d)] = r.roots.map(|(re, im)| (re + 0.0, im + 0.0));
        writeln!(
            out,
            "{},{a:e},{b:e},{c:e},{d:e},{:e},{},{:e}",
            rec.lambda,
            r.rho,
            r.regime.name(),
            r.gap_rate()
        )?;
        if r.rho > worst.0 {
            worst = (r.rho, r.gap_rate());
        }
    }
    writeln!(out, "overall,,,,,{:e},,{:e}", worst.0, worst.1)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_continuous(args: ContinuousArgs) -> Result<ExitCode> {
    let spec = args.problem.apply(ProblemSpec::default())?;
    let loaded = load_problem(
        &spec,
        args.seed,
        perturbode::problems::DEFAULT_REFERENCE_TOL,
    )?;
    let h = &loaded.handle;
    let mut cfg = ContinuousRunConfig::new(h, args.delta1, args.delta2, args.t_end);
    if let Some(step) = args.h {
        cfg.h = step;
    }
    cfg.record_stride = args.stride;
    let traj = integrate(h, &loaded.default_x0, &Vector::zeros(h.dim()), &cfg)?;
    let rows = continuous_rows(h, &traj, &loaded.reference, args.delta1, args.delta2)?;
    let mut w = match &args.out {
        Some(p) => csv::Writer::from_writer(Box::new(fs::File::create(p)?) as Box<dyn Write>),
        None => csv::Writer::from_writer(Box::new(std::io::stdout()) as Box<dyn Write>),
    };
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let thm1 = verify_theorem1(h, &traj, &loaded.reference, args.delta1, args.delta2)?;
    eprintln!(
        "regime {:?}: bound {} (worst margin {:e}), energy monotone {}",
        thm1.regime, thm1.bound_holds, thm1.worst_margin, thm1.lyapunov_monotone
    );
    if let Ok(thm2) = verify_theorem2(h, &traj, &loaded.reference, args.delta1, args.delta2) {
        eprintln!(
            "sharpened bound {} (worst margin {:e})",
            thm2.bound_holds, thm2.worst_margin
        );
    }
    if !traj.reliable {
        eprintln!(
            "warning: step-halving error {:e} exceeds 1e-6",
            traj.richardson_error
        );
    }
    Ok(if thm1.holds {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    let spec = args.problem.apply(ProblemSpec::default())?;
    let (mu, l) = curvature(&spec, args.seed)?;
    let cfg = args.scheme.build(None, l)?;
    let report = certification_report(&cfg, mu, l);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.certifies() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

#[allow(clippy::unnecessary_map_or)]
fn cmd_grad_check(args: GradCheckArgs) -> Result<ExitCode> {
    use rand::{Rng, SeedableRng};
    let spec = args.problem.apply(ProblemSpec::default())?;
    let h = build_handle(&spec, args.seed)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let (mut grad, mut hvp) = (0.0f64, None::<f64>);
    for _ in 0..args.points {
        let x = Vector::new((0..h.dim()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let r = finite_difference_check(&h, &x, args.h);
        grad = grad.max(r.max_rel_err_grad);
        hvp = r.max_rel_err_hvp.map(|e| hvp.unwrap_or(0.0).max(e));
    }
    println!("max_rel_err_grad,{grad:e}");
    match hvp {
        Some(e) => println!("max_rel_err_hvp,{e:e}"),
        None => println!("max_rel_err_hvp,"),
    }
    let ok = grad <= 1e-5 && hvp.map_or(true, |e| e <= 1e-5);
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Spectral(a) => cmd_spectral(a),
        Command::Continuous(a) => cmd_continuous(a),
        Command::CheckConditions(a) => cmd_check(a),
        Command::GradCheck(a) => cmd_grad_check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

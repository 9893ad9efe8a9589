//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `PERTURBODE_DATASETS` to a `:`-separated list of LIBSVM files to
//! repeat the ordering checks of criterion 8 on real data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use perturbode::continuous::{
    compute_c1, continuous_rows, integrate, verify_theorem1, verify_theorem2, ContinuousRegime,
    ContinuousRunConfig,
};
use perturbode::harness::{
    fit_rate, paper_grid, run_experiment, DataSource, ExperimentConfig, ExperimentOutcome,
    ProblemSpec,
};
use perturbode::problems::{reference_solve, synth_logistic};
use perturbode::schemes::{make_algorithm2, step_implicit, step_symplectic};
use perturbode::spectral::{build_recursion, coordinate_rates, worst_coordinate_rate};
use perturbode::{
    finite_difference_check, run_scheme, DiscreteState, ObjectiveHandle, QuadraticProblem,
    ReferenceSolution, SchemeConfig, SchemeKind, StopCriteria, Termination, Vector,
};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn paper_quadratic() -> (QuadraticProblem, ObjectiveHandle, ReferenceSolution) {
    let q = QuadraticProblem::two_scale(1.0, 100.0).unwrap();
    let h = q.clone().handle().unwrap();
    let r = ReferenceSolution::at(&h, Vector::zeros(2)).unwrap();
    (q, h, r)
}

fn exhaust(iters: usize) -> StopCriteria {
    StopCriteria {
        tol_grad: f64::MIN_POSITIVE,
        max_iters: iters,
    }
}

fn half_norm_sq(terms: &[(f64, &[f64])]) -> f64 {
    let n = terms[0].1.len();
    (0..n)
        .map(|i| terms.iter().map(|(c, v)| c * v[i]).sum::<f64>().powi(2))
        .sum::<f64>()
        / 2.0
}

/// `E(0)` for the symplectic family, built straight from the Lyapunov formula
/// with a zero initial velocity. `c = 1` is the plain scheme, `c = 1 - sqrt(mu s)`
/// the modified one.
fn symplectic_family_e0(
    h: &ObjectiveHandle,
    r: &ReferenceSolution,
    cfg: &SchemeConfig,
    c: f64,
) -> f64 {
    let mu = h.mu();
    let (rs, rm) = (cfg.s.sqrt(), mu.sqrt());
    let x0 = Vector::filled(h.dim(), 1.0);
    let g0 = h.gradient(&x0).unwrap();
    let gap = h.value(&x0).unwrap() - r.f_star;
    let rr = (mu * cfg.s).sqrt();
    let step = match cfg.kind {
        SchemeKind::Symplectic => (1.0 + cfg.delta1) * cfg.s / (1.0 + 2.0 * rr),
        _ => (1.0 + cfg.delta1) * cfg.s / (1.0 + rr),
    };
    let x1 = Vector::combine(&[(1.0, &x0), (-step, &g0)]);
    let v0 = Vector::combine(&[(1.0 / rs, &x1), (-1.0 / rs, &x0)]);
    (1.0 + cfg.delta1) / c * (gap - cfg.delta2 * rs / (2.0 * c) * g0.norm_sq())
        + half_norm_sq(&[
            (1.0, &v0),
            (rm / c, &x1),
            (-rm / c, &r.x_star),
            (cfg.delta2 / c, &g0),
        ])
}

fn continuous_run() -> Result<
    (
        ObjectiveHandle,
        ReferenceSolution,
        perturbode::continuous::Trajectory,
        f64,
    ),
    String,
> {
    let (_, h, r) = paper_quadratic();
    let cfg = ContinuousRunConfig {
        delta1: 0.2,
        delta2: 0.2,
        t_end: 8.0,
        h: 1e-4,
        record_stride: 10,
    };
    let t = Instant::now();
    let traj = integrate(&h, &Vector::filled(2, 1.0), &Vector::zeros(2), &cfg).map_err(err)?;
    Ok((h, r, traj, t.elapsed().as_secs_f64()))
}

fn criterion1() -> Outcome {
    let (h, r, traj, secs) = continuous_run()?;
    let rep = verify_theorem1(&h, &traj, &r, 0.2, 0.2).map_err(err)?;
    ensure(
        rep.regime == ContinuousRegime::Balanced,
        "regime is not balanced",
    )?;
    ensure(rep.lyapunov_monotone, "E(t) increased")?;
    // Independent envelope E(0) e^{-t} / 1.2 with E(0) from the formula at x0=(1,1), v0=0.
    let e0 = 1.2 * 50.5 + 0.5 * ((1.0f64 + 0.2).powi(2) + (1.0f64 + 20.0).powi(2));
    ensure(
        (rep.lyapunov_initial - e0).abs() <= 1e-12 * e0,
        format!("E(0) = {} != {e0}", rep.lyapunov_initial),
    )?;
    let rows = continuous_rows(&h, &traj, &r, 0.2, 0.2).map_err(err)?;
    let worst = rows
        .iter()
        .map(|w| w.f_gap - e0 * (-w.t).exp() / 1.2)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(worst <= 1e-7 * e0, format!("bound violated by {worst:e}"))?;
    ensure(
        traj.reliable,
        format!("richardson error {:e}", traj.richardson_error),
    )?;
    ensure(secs < 5.0, format!("integration took {secs:.2} s"))?;
    Ok(format!(
        "{} samples, worst margin {worst:.3e}, {secs:.2} s",
        rows.len()
    ))
}

fn criterion2() -> Outcome {
    let c1 = compute_c1(1.0, 0.2, 0.2).map_err(err)?;
    let exact = 1.0 / 33.0;
    ensure(
        (c1 - exact).abs() <= 1e-15,
        format!("c1 = {c1}, expected 1/33"),
    )?;
    let (h, r, traj, _) = continuous_run()?;
    let rep = verify_theorem2(&h, &traj, &r, 0.2, 0.2).map_err(err)?;
    let e0 = rep.lyapunov_initial;
    let rows = continuous_rows(&h, &traj, &r, 0.2, 0.2).map_err(err)?;
    let worst = rows
        .iter()
        .map(|w| w.f_gap - e0 * (-(1.0 + exact) * w.t).exp() / 1.2)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(
        worst <= 1e-7 * e0,
        format!("sharpened bound violated by {worst:e}"),
    )?;
    ensure(rep.bound_holds, "library check disagrees")?;
    Ok(format!("c1 = {c1:.6}, worst margin {worst:.3e}"))
}

fn criterion3() -> Outcome {
    let (_, h, r) = paper_quadratic();
    let cfg = ContinuousRunConfig {
        delta1: 0.0,
        delta2: 0.05,
        t_end: 8.0,
        h: 1e-4,
        record_stride: 10,
    };
    let traj = integrate(&h, &Vector::filled(2, 1.0), &Vector::zeros(2), &cfg).map_err(err)?;
    let rep = verify_theorem1(&h, &traj, &r, 0.0, 0.05).map_err(err)?;
    ensure(
        rep.regime == ContinuousRegime::GradientCorrectionOnly,
        "wrong regime",
    )?;
    let rows = continuous_rows(&h, &traj, &r, 0.0, 0.05).map_err(err)?;
    let e0 = rows[0].lyapunov;
    let worst = rows
        .iter()
        .map(|w| w.f_gap - e0 * (-0.75 * w.t).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(
        worst <= 1e-7 * e0,
        format!("envelope violated by {worst:e}"),
    )?;
    ensure(rep.holds, "library check disagrees")?;
    Ok(format!("worst margin {worst:.3e}"))
}

/// Implicit run checked against an independently computed envelope.
fn implicit_case(
    h: &ObjectiveHandle,
    r: &ReferenceSolution,
    x0: &Vector,
    s: f64,
) -> Result<(), String> {
    let cfg = SchemeConfig::new(SchemeKind::Implicit, 0.2, 0.2, s).map_err(err)?;
    let trace = run_scheme(h, x0, &cfg, &exhaust(2000), r).map_err(err)?;
    let c = &trace.certification;
    ensure(
        c.lyapunov_certified && c.bound_certified,
        format!("s = {s}: not certified"),
    )?;
    ensure(
        c.lyapunov_monotone,
        format!("s = {s}: E(k) increased (ratio {})", c.worst_lyapunov_ratio),
    )?;
    ensure(
        trace.termination != Termination::Diverged,
        format!("s = {s}: diverged"),
    )?;
    let g0 = h.gradient(x0).unwrap();
    let rm = h.mu().sqrt();
    let e0 = 1.2 * (h.value(x0).unwrap() - r.f_star)
        + half_norm_sq(&[(rm, x0), (-rm, &r.x_star), (0.2, &g0)]);
    let ln_base = (1.0 + (h.mu() * s).sqrt()).ln();
    for row in &trace.rows {
        let bound = e0 / 1.2 * (-(row.k as f64) * ln_base).exp();
        ensure(
            row.f_gap <= bound + 1e-10 * e0,
            format!(
                "s = {s}, k = {}: gap {:e} > bound {bound:e}",
                row.k, row.f_gap
            ),
        )?;
    }
    ensure(
        trace.iterations() == 2000 || trace.termination == Termination::ToleranceMet,
        "short run",
    )?;
    Ok(())
}

fn criterion4() -> Outcome {
    let t = Instant::now();
    let (_, h, r) = paper_quadratic();
    for m in [1.0, 10.0, 100.0] {
        implicit_case(&h, &r, &Vector::filled(2, 1.0), m / 100.0)?;
    }
    let p = synth_logistic(5, 50, 0.01, 7).map_err(err)?;
    let lh = p.handle().map_err(err)?;
    let lr = reference_solve(&lh, 1e-10).map_err(err)?;
    let l = lh.lipschitz();
    for m in [1.0, 10.0, 100.0] {
        implicit_case(&lh, &lr, &Vector::filled(5, 1.0), m / l)?;
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.2} s"))?;
    Ok(format!("6 runs of 2000 iterations, {secs:.2} s"))
}

fn criterion5() -> Outcome {
    let (_, h, r) = paper_quadratic();
    let s: f64 = 0.01;
    let cfg =
        SchemeConfig::new(SchemeKind::Symplectic, 0.1, 2.0 * s.sqrt() / 3.0, s).map_err(err)?;
    let stop = StopCriteria {
        tol_grad: 1e-6,
        max_iters: 100_000,
    };
    let trace = run_scheme(&h, &Vector::filled(2, 1.0), &cfg, &stop, &r).map_err(err)?;
    let c = &trace.certification;
    ensure(c.conditions.certifies(), "conditions not satisfied")?;
    ensure(c.lyapunov_monotone, "E(k) increased")?;
    ensure(
        trace.termination == Termination::ToleranceMet,
        "tolerance not reached",
    )?;
    let e0 = symplectic_family_e0(&h, &r, &cfg, 1.0);
    ensure(
        (c.lyapunov_initial - e0).abs() <= 1e-12 * e0,
        format!("E(0) {} != {e0}", c.lyapunov_initial),
    )?;
    let rr: f64 = 0.1;
    let ln_base = (1.0 + rr / (1.0 + rr)).ln();
    let env = 1.0 / ((1.0 - 100.0 * cfg.delta2 * s.sqrt()) * 1.1);
    for row in &trace.rows {
        let bound = e0 * env * (-(row.k as f64) * ln_base).exp();
        ensure(
            row.f_gap <= bound + 1e-10 * e0,
            format!("k = {}: gap {:e} > bound {bound:e}", row.k, row.f_gap),
        )?;
    }
    Ok(format!("{} iterations to 1e-6", trace.iterations()))
}

fn close_log(fit: f64, exact: f64, tol: f64) -> bool {
    ((fit.ln() - exact.ln()) / exact.ln()).abs() <= tol
}

fn criterion6() -> Outcome {
    let (q, h, r) = paper_quadratic();
    let s: f64 = 0.01;
    let cases = [(0.0, 0.0), (0.0, 0.1), (0.1, 0.1)];
    let mut rates = Vec::new();
    let mut notes = Vec::new();
    for (d1, d2) in cases {
        let cfg = SchemeConfig::new(SchemeKind::Symplectic, d1, d2, s).map_err(err)?;
        let rate = worst_coordinate_rate(&q, &cfg).map_err(err)?;
        let per: Vec<f64> = coordinate_rates(&q, &cfg)
            .map_err(err)?
            .iter()
            .map(|(_, sr)| sr.gap_rate())
            .collect();
        let tie = per
            .iter()
            .filter(|&&x| (x - rate).abs() <= 0.01 * rate)
            .count()
            > 1;
        let trace =
            run_scheme(&h, &Vector::filled(2, 1.0), &cfg, &exhaust(3000), &r).map_err(err)?;
        let fit = fit_rate(&trace.rows, 0.5).map_err(err)?;
        let tol = if tie { 0.05 } else { 0.02 };
        ensure(
            close_log(fit.rate, rate, tol),
            format!("({d1}, {d2}): fitted {} vs computed {rate}", fit.rate),
        )?;
        notes.push(format!("({d1},{d2}) {rate:.6}/{:.6}", fit.rate));
        rates.push(rate);
    }
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b;
    ensure(
        rel(rates[0], 1.0 / 1.2),
        format!("unperturbed rate {}", rates[0]),
    )?;
    ensure(
        rel(rates[1], (11.0f64 / 12.0).powi(2)),
        format!("(0, 0.1) rate {}", rates[1]),
    )?;
    ensure(
        rates[2] <= (1.2 - 3.0 / 40000.0) / 1.44 * (1.0 + 1e-12),
        format!("(0.1, 0.1) rate {}", rates[2]),
    )?;
    ensure(rates[1] > rates[0] && rates[0] > rates[2], "ordering fails")?;
    Ok(notes.join(", "))
}

fn criterion7() -> Outcome {
    let (_, h, r) = paper_quadratic();
    let cfg = make_algorithm2(1.0, 100.0, 1.0 / 19.0).map_err(err)?;
    ensure(
        (cfg.delta1 - 1.0 / 19.0).abs() <= 1e-15 && cfg.s == 1.0 / 400.0,
        "unexpected parameters",
    )?;
    let trace = run_scheme(&h, &Vector::filled(2, 1.0), &cfg, &exhaust(2000), &r).map_err(err)?;
    let c = &trace.certification;
    ensure(c.conditions.certifies(), "conditions not satisfied")?;
    ensure(c.lyapunov_monotone, "E(k) increased")?;
    let rr = 0.05;
    let cc = 1.0 - rr;
    let e0 = symplectic_family_e0(&h, &r, &cfg, cc);
    ensure(
        (c.lyapunov_initial - e0).abs() <= 1e-12 * e0,
        format!("E(0) {} != {e0}", c.lyapunov_initial),
    )?;
    let env = cc / ((1.0 - cfg.delta2 * cfg.s.sqrt() * 100.0 / cc) * (1.0 + cfg.delta1));
    let ln_base = (1.0f64 + rr).ln();
    for row in &trace.rows {
        let bound = e0 * env * (-(row.k as f64) * ln_base).exp();
        ensure(
            row.f_gap <= bound + 1e-10 * e0,
            format!("k = {}: gap {:e} > bound {bound:e}", row.k, row.f_gap),
        )?;
    }
    Ok(format!("{} rows checked", trace.rows.len()))
}

fn grid_config(
    problem: ProblemSpec,
    mu: f64,
    l: f64,
    out: &Path,
) -> Result<ExperimentConfig, String> {
    let s = 1.0 / l;
    Ok(ExperimentConfig {
        problem,
        variants: paper_grid(mu, l, (mu * s).sqrt(), s.sqrt()).map_err(err)?,
        stop: StopCriteria {
            tol_grad: 1e-6,
            max_iters: 200_000,
        },
        output_dir: out.to_path_buf(),
        seed: 2024,
        x0: None,
        reference_tol: 1e-8,
    })
}

fn orderings(label: &str, out: &ExperimentOutcome) -> Result<String, String> {
    let v = |n: &str| {
        out.variant(n)
            .ok_or_else(|| format!("{label}: missing {n}"))
    };
    let (base, d1, both) = (
        v("symplectic_0_0")?,
        v("symplectic_d1_0")?,
        v("symplectic_d1_d2")?,
    );
    for x in [base, both] {
        ensure(
            x.trace.termination == Termination::ToleranceMet,
            format!("{label}: {} did not reach 1e-6", x.spec.name),
        )?;
    }
    ensure(
        d1.oscillations > both.oscillations,
        format!(
            "{label}: oscillations {} !> {}",
            d1.oscillations, both.oscillations
        ),
    )?;
    ensure(
        both.trace.iterations() < base.trace.iterations(),
        format!(
            "{label}: iterations {} !< {}",
            both.trace.iterations(),
            base.trace.iterations()
        ),
    )?;
    Ok(format!(
        "{label}: osc {}>{}, iters {}<{}",
        d1.oscillations,
        both.oscillations,
        both.trace.iterations(),
        base.trace.iterations()
    ))
}

fn logistic_lipschitz(spec: &ProblemSpec, seed: u64) -> Result<(f64, f64), String> {
    use perturbode::harness::BuiltProblem;
    match spec.build(seed).map_err(err)? {
        BuiltProblem::Logistic(p) => {
            let h = p.handle().map_err(err)?;
            Ok((h.mu(), h.lipschitz()))
        }
        BuiltProblem::Quadratic(_) => Err("expected a logistic problem".into()),
    }
}

fn criterion8() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut notes = Vec::new();

    let quad = grid_config(
        ProblemSpec::default(),
        1.0,
        100.0,
        &dir.path().join("quadratic"),
    )?;
    notes.push(orderings(
        "quadratic",
        &run_experiment(&quad).map_err(err)?,
    )?);

    let mut specs = vec![(
        "synthetic".to_string(),
        ProblemSpec::Logistic {
            source: DataSource::Synthetic { n: 20, m: 200 },
            reg: 1e-2,
        },
    )];
    if let Ok(list) = std::env::var("PERTURBODE_DATASETS") {
        for p in list.split(':').filter(|p| !p.is_empty()) {
            specs.push((
                p.to_string(),
                ProblemSpec::Logistic {
                    source: DataSource::File {
                        path: PathBuf::from(p),
                        label_policy: Default::default(),
                    },
                    reg: 1e-2,
                },
            ));
        }
    }
    for (i, (label, spec)) in specs.into_iter().enumerate() {
        let (mu, l) = logistic_lipschitz(&spec, 2024)?;
        let cfg = grid_config(spec, mu, l, &dir.path().join(format!("logistic{i}")))?;
        notes.push(orderings(&label, &run_experiment(&cfg).map_err(err)?)?);
    }
    Ok(notes.join("; "))
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let pivot = a[col].clone();
            let f = a[row][col] / pivot[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - tail) / a[i][i];
    }
    x
}

/// Solves the implicit update for `(x_{k+1}, v_{k+1})` on `f = (x-c)'A(x-c)/2`
/// as one `2n x 2n` linear system.
fn implicit_direct(
    a: &[Vec<f64>],
    c: &[f64],
    mu: f64,
    cfg: &SchemeConfig,
    x: &[f64],
    x_prev: &[f64],
) -> Vec<f64> {
    let n = x.len();
    let rs = cfg.s.sqrt();
    let d = 1.0 + 2.0 * (mu * cfg.s).sqrt();
    let w = rs * (1.0 + cfg.delta1) + cfg.delta2;
    let mut m = vec![vec![0.0; 2 * n]; 2 * n];
    let mut rhs = vec![0.0; 2 * n];
    let ac: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] * c[j]).sum())
        .collect();
    let ax: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] * x[j]).sum())
        .collect();
    for i in 0..n {
        m[i][i] = 1.0;
        m[i][n + i] = -rs;
        rhs[i] = x[i];
        for j in 0..n {
            m[n + i][j] = w * a[i][j];
        }
        m[n + i][n + i] = d;
        let v = (x[i] - x_prev[i]) / rs;
        rhs[n + i] = v + rs * (1.0 + cfg.delta1) * ac[i] + cfg.delta2 * ax[i];
    }
    solve(m, rhs)[..n].to_vec()
}

fn criterion9() -> Outcome {
    let cfg = SchemeConfig::new(SchemeKind::Implicit, 0.2, 0.2, 0.1).map_err(err)?;
    let dense_a = vec![
        vec![4.0, 1.0, 0.0],
        vec![1.0, 3.0, 0.5],
        vec![0.0, 0.5, 2.0],
    ];
    let center = vec![0.5, -1.0, 2.0];
    let diag = QuadraticProblem::diagonal(vec![1.0, 10.0, 100.0])
        .and_then(|q| q.with_center(center.clone()))
        .map_err(err)?;
    let dense = QuadraticProblem::dense(3, dense_a.iter().flatten().copied().collect())
        .and_then(|q| q.with_center(center.clone()))
        .map_err(err)?;
    let diag_a = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 10.0, 0.0],
        vec![0.0, 0.0, 100.0],
    ];
    let mut worst_implicit = 0.0f64;
    for (q, a) in [(diag, diag_a), (dense, dense_a)] {
        let h = q.handle().map_err(err)?;
        let mut st = DiscreteState::start(Vector::new(vec![3.0, -2.0, 1.0]).unwrap());
        for _ in 0..100 {
            let direct = implicit_direct(&a, &center, h.mu(), &cfg, &st.x_curr, &st.x_prev);
            st = step_implicit(&h, &st, &cfg).map_err(err)?;
            let e = (0..3)
                .map(|i| (st.x_curr[i] - direct[i]).abs())
                .fold(0.0, f64::max);
            worst_implicit = worst_implicit.max(e);
        }
    }
    ensure(
        worst_implicit <= 1e-12,
        format!("implicit mismatch {worst_implicit:e}"),
    )?;

    let eig = [1.0, 7.0, 100.0];
    let q = QuadraticProblem::diagonal(eig.to_vec()).map_err(err)?;
    let h = q.handle().map_err(err)?;
    let scfg = SchemeConfig::new(SchemeKind::Symplectic, 0.1, 0.05, 0.01).map_err(err)?;
    let x0 = [1.0, -2.0, 0.5];
    let mut st = DiscreteState::start(Vector::new(x0.to_vec()).unwrap());
    let seqs: Vec<Vec<f64>> = eig
        .iter()
        .zip(x0)
        .map(|(&l, z)| {
            build_recursion(l, 1.0, 0.01, 0.1, 0.05)
                .unwrap()
                .iterate(z, z, 101)
        })
        .collect();
    let mut worst_symp = 0.0f64;
    for k in 1..=100 {
        st = step_symplectic(&h, &st, &scfg).map_err(err)?;
        for (i, seq) in seqs.iter().enumerate() {
            worst_symp = worst_symp.max((st.x_curr[i] - seq[k + 1]).abs());
        }
    }
    ensure(
        worst_symp <= 1e-12,
        format!("symplectic mismatch {worst_symp:e}"),
    )?;

    let logistic = synth_logistic(8, 60, 0.01, 3)
        .map_err(err)?
        .handle()
        .map_err(err)?;
    let objectives = [
        (
            "diagonal",
            QuadraticProblem::diagonal(vec![1.0, 10.0, 100.0])
                .unwrap()
                .handle()
                .unwrap(),
        ),
        (
            "dense",
            QuadraticProblem::dense(3, vec![4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0])
                .unwrap()
                .handle()
                .unwrap(),
        ),
        ("logistic", logistic),
    ];
    let mut worst_fd = 0.0f64;
    for (name, obj) in &objectives {
        let x = Vector::new((0..obj.dim()).map(|i| 0.3 - 0.17 * i as f64).collect()).unwrap();
        let rep = finite_difference_check(obj, &x, 1e-5);
        let hvp = rep
            .max_rel_err_hvp
            .ok_or(format!("{name}: no hessian-vector product"))?;
        worst_fd = worst_fd.max(rep.max_rel_err_grad).max(hvp);
    }
    ensure(
        worst_fd <= 1e-5,
        format!("finite differences off by {worst_fd:e}"),
    )?;
    Ok(format!(
        "implicit {worst_implicit:.1e}, symplectic {worst_symp:.1e}, fd {worst_fd:.1e}"
    ))
}

fn criterion10() -> Outcome {
    let dirs = [
        tempfile::tempdir().map_err(err)?,
        tempfile::tempdir().map_err(err)?,
    ];
    let mut outputs = Vec::new();
    for d in &dirs {
        let spec = ProblemSpec::Logistic {
            source: DataSource::Synthetic { n: 6, m: 40 },
            reg: 1e-2,
        };
        let (mu, l) = logistic_lipschitz(&spec, 99)?;
        let mut cfg = grid_config(spec, mu, l, d.path())?;
        cfg.seed = 99;
        outputs.push(run_experiment(&cfg).map_err(err)?);
    }
    let mut files = 0;
    for v in &outputs[0].variants {
        let other = outputs[1].variant(&v.spec.name).ok_or("variant missing")?;
        let a = std::fs::read(&v.csv_path).map_err(err)?;
        let b = std::fs::read(&other.csv_path).map_err(err)?;
        ensure(a == b, format!("{} differs", v.spec.name))?;
        files += 1;
    }
    let a = std::fs::read(&outputs[0].summary_path).map_err(err)?;
    let b = std::fs::read(&outputs[1].summary_path).map_err(err)?;
    ensure(a == b, "summary differs")?;
    Ok(format!("{} identical files", files + 1))
}

fn main() -> ExitCode {
    let criteria: [Check; 10] = [
        ("continuous rate bound and monotone energy", criterion1),
        ("continuous sharpened rate", criterion2),
        ("continuous gradient-correction-only envelope", criterion3),
        ("implicit scheme at large steps", criterion4),
        ("symplectic scheme certificate", criterion5),
        ("spectral rates of the symplectic scheme", criterion6),
        ("modified symplectic algorithm", criterion7),
        (
            "perturbation orderings on quadratic and logistic",
            criterion8,
        ),
        ("oracle equivalences", criterion9),
        ("deterministic traces", criterion10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = f();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

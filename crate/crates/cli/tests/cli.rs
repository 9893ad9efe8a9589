use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_perturbode"));
    c.env_remove("PERTURBODE_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_trace_with_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "run",
        "--scheme",
        "symplectic",
        "--delta1",
        "0.1",
        "--delta2",
        "0.0667",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let trace = fs::read_to_string(out.join("symplectic.csv")).unwrap();
    assert!(trace.starts_with("k,f_gap,grad_norm,lyapunov,bound\n"));
    assert!(out.join("summary.csv").exists());
}

#[test]
fn uncertified_run_needs_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["run", "--scheme", "symplectic", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "run",
        "--scheme",
        "symplectic",
        "--allow-unverified",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn exit_codes_report_termination() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "run",
        "--scheme",
        "gradient-descent",
        "--max-iters",
        "3",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "run",
        "--scheme",
        "gradient_descent",
        "--step-size",
        "0.05",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(
        run(&["run", "--scheme", "nonsense", "--out", out])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn env_var_sets_output_dir_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("env");
    let flag_dir = dir.path().join("flag");
    let o = bin()
        .args(["run", "--scheme", "nag-sc"])
        .env("PERTURBODE_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_dir.join("nag_sc.csv").exists());
    let o = bin()
        .args([
            "run",
            "--scheme",
            "nag-sc",
            "--out",
            flag_dir.to_str().unwrap(),
        ])
        .env("PERTURBODE_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag_dir.join("nag_sc.csv").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"problem":{{"type":"logistic","source":{{"synthetic":{{"n":4,"m":40}}}},"reg":0.01}},
               "variants":[{{"name":"nag","kind":"nag_sc","delta1":0,"delta2":0,"s":0.5}}],
               "output_dir":"{}","seed":3}}"#,
            dir.path().join("from_file").display()
        ),
    )
    .unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--max-iters", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let trace = fs::read_to_string(dir.path().join("from_file/nag.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn sweep_runs_the_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    for name in [
        "symplectic_0_0",
        "symplectic_d1_0",
        "symplectic_0_d2",
        "symplectic_d1_d2",
        "nag_sc",
    ] {
        assert!(summary.contains(name), "{name}");
    }
}

#[test]
fn spectral_prints_csv() {
    let o = run(&[
        "spectral", "--mu", "1", "--L", "100", "--delta1", "0", "--delta2", "0.1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("lambda,root1_re,root1_im,root2_re,root2_im,modulus,regime,gap_rate")
    );
    let overall = text.lines().last().unwrap();
    let rate: f64 = overall.rsplit(',').next().unwrap().parse().unwrap();
    assert!((rate - (11.0f64 / 12.0).powi(2)).abs() < 1e-12);
}

#[test]
fn continuous_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let o = run(&[
        "continuous",
        "--delta1",
        "0.2",
        "--delta2",
        "0.2",
        "--t-end",
        "1",
        "--h",
        "1e-3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("t,f_gap,lyapunov,bound_thm1,bound_thm2\n"));
    assert_eq!(text.lines().count(), 1002);
}

#[test]
fn check_conditions_reports_json() {
    let o = run(&[
        "check-conditions",
        "--scheme",
        "implicit",
        "--delta1",
        "0.2",
        "--delta2",
        "0.2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["overall"], true);
    let o = run(&[
        "check-conditions",
        "--scheme",
        "implicit",
        "--delta1",
        "0",
        "--delta2",
        "0.2",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grad_check_passes_on_shipped_problems() {
    for p in ["quadratic", "logistic"] {
        let o = run(&["grad-check", "--problem", p]);
        assert_eq!(o.status.code(), Some(0), "{p}: {}", stdout(&o));
        assert!(stdout(&o).contains("max_rel_err_grad"));
    }
}

#[test]
fn logistic_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.libsvm");
    fs::write(
        &data,
        "1 1:0.5 2:-1\n0 1:-0.3 3:2\n1 2:0.7\n0 1:1 2:1 3:-1\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--reg",
        "0.1",
        "--scheme",
        "nag_sc",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = run(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--label-policy",
        "strict",
        "--scheme",
        "nag_sc",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));
}

use std::process::Command;

fn ecco() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ecco"));
    cmd.env_remove(ecco::bench::OUTPUT_DIR_ENV);
    cmd
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_prints_status_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let out = ecco()
        .args(["solve", "--fn", "rosenbrock", "--init=-2,-2", "--control", "approx", "--integrator", "fe"])
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("status: converged"));
    let rows = ecco::bench::read_trace_csv(&trace).unwrap();
    assert!(!rows.is_empty());
}

#[test]
fn solve_knobs_are_accepted() {
    let out = ecco()
        .args([
            "solve", "--fn", "booth", "--init", "5,5", "--control", "hessian", "--integrator", "rk4",
            "--delta", "2", "--no-normalize", "--alpha", "0.8", "--beta", "1.2", "--eta", "0.05",
            "--armijo-c", "0.001", "--dt-init", "fixed:0.01", "--rk4-weights", "classical",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_input_exits_nonzero() {
    let out = ecco().args(["solve", "--fn", "nope"]).output().unwrap();
    assert!(!out.status.success());
    let out = ecco().args(["solve", "--fn", "booth", "--control", "newton"]).output().unwrap();
    assert!(!out.status.success());
    let out = ecco().args(["run", "/nonexistent/spec.json"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn bench_scaling_single_n_reports_na() {
    let out = ecco().args(["bench-scaling", "--n", "16"]).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("exponent,n/a,n/a"));
}

#[test]
fn run_honors_output_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"problem":{"name":"booth"},"output_dir":"ignored-by-env","methods":[{"label":"ecco","kind":"ecco"}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("env-out");
    let out = ecco()
        .arg("run")
        .arg(&spec)
        .env(ecco::bench::OUTPUT_DIR_ENV, &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.csv").exists());
    assert!(out_dir.join("traces/ecco_rep0.csv").exists());
}

#[test]
fn run_with_no_methods_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &spec,
        format!(r#"{{"problem":{{"name":"booth"}},"output_dir":{:?},"methods":[]}}"#, out_dir),
    )
    .unwrap();
    let out = ecco().arg("run").arg(&spec).output().unwrap();
    assert!(out.status.success());
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn sweep_command() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"problem":{"name":"booth"},"output_dir":"x","methods":[{"label":"ecco","kind":"ecco"}],
            "perturbation":{"epsilon_ball":0.5,"samples":3,"seed":1}}"#,
    )
    .unwrap();
    let out = ecco()
        .arg("sweep")
        .arg(&spec)
        .arg("--output-dir")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("ecco: 3/3 converged"));
}

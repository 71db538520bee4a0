use std::path::Path;

use ecco::bench::{
    read_trace_csv, run_experiment, run_robustness_sweep, ExperimentSpec, Method, MethodSpec,
    Perturbation, ProblemSpec,
};
use ecco::control::ControlKind;
use ecco::solver::{AdamConfig, GdArmijoConfig, SolveConfig};

fn ecco_method(label: &str, kind: ControlKind, cfg: SolveConfig) -> MethodSpec {
    MethodSpec {
        label: label.into(),
        method: Method::Ecco {
            config: cfg.with_control(kind),
        },
    }
}

fn four_methods(cfg: SolveConfig) -> Vec<MethodSpec> {
    vec![
        ecco_method("ecco-hessian-fe", ControlKind::FullHessian, cfg),
        ecco_method("ecco-approx-fe", ControlKind::Approximate, cfg),
        MethodSpec {
            label: "gd-armijo".into(),
            method: Method::GdArmijo {
                config: cfg,
                line_search: GdArmijoConfig::default(),
            },
        },
        MethodSpec {
            label: "adam".into(),
            method: Method::Adam {
                config: cfg,
                adam: AdamConfig {
                    lr: 0.02,
                    ..AdamConfig::default()
                },
            },
        },
    ]
}

fn spec(problem: ProblemSpec, methods: Vec<MethodSpec>, out: &Path) -> ExperimentSpec {
    ExperimentSpec {
        problem,
        methods,
        output_dir: out.to_path_buf(),
        repetitions: 1,
        perturbation: None,
    }
}

#[test]
fn rosenbrock_experiment_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        ProblemSpec::new("rosenbrock").with_init(vec![-2.0, -2.0]),
        four_methods(SolveConfig::default()),
        dir.path(),
    );
    let summary = run_experiment(&s).unwrap();
    assert_eq!(summary.runs.len(), 4);
    let traces: Vec<_> = std::fs::read_dir(dir.path().join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 4);
    for m in &s.methods {
        let rows = read_trace_csv(dir.path().join(format!("traces/{}_rep0.csv", m.label))).unwrap();
        assert_eq!(rows.len(), summary.run(&m.label).unwrap().iterations);
    }
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let svg = std::fs::read_to_string(dir.path().join("convergence.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count() + svg.matches("<circle").count(), 4);
    assert!(dir.path().join("timing.csv").exists());
}

#[test]
fn empty_experiment_is_an_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&spec(ProblemSpec::new("booth"), vec![], dir.path())).unwrap();
    assert!(summary.runs.is_empty());
    assert!(!dir.path().join("convergence.svg").exists());
}

#[test]
fn scalar_quadratic_every_method_finds_the_minimizer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SolveConfig {
        epsilon: 1e-14,
        max_iters: 5_000,
        ..SolveConfig::default()
    };
    let mut methods = four_methods(cfg);
    if let Method::Adam { adam, .. } = &mut methods[3].method {
        adam.lr = 0.1;
    }
    let summary = run_experiment(&spec(ProblemSpec::new("scalar_quadratic"), methods, dir.path())).unwrap();
    for r in &summary.runs {
        assert!((r.x_final[0] + 0.2).abs() < 1e-4, "{}: {:?}", r.label, r.x_final);
    }
}

#[test]
fn outputs_are_reproducible() {
    let read = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        for name in ["summary.csv", "convergence.svg"] {
            files.push((name.to_string(), std::fs::read(dir.join(name)).unwrap()));
        }
        let mut traces: Vec<_> = std::fs::read_dir(dir.join("traces"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        traces.sort();
        for t in traces {
            files.push((t.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&t).unwrap()));
        }
        files
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut s = spec(
        ProblemSpec::new("himmelblau"),
        four_methods(SolveConfig::default()),
        a.path(),
    );
    s.repetitions = 2;
    run_experiment(&s).unwrap();
    s.output_dir = b.path().to_path_buf();
    run_experiment(&s).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

fn sweep_spec(methods: Vec<MethodSpec>, eps: f64, samples: usize, out: &Path) -> ExperimentSpec {
    ExperimentSpec {
        perturbation: Some(Perturbation {
            epsilon_ball: eps,
            samples,
            seed: 2024,
        }),
        ..spec(ProblemSpec::new("rosenbrock").with_init(vec![-2.0, -2.0]), methods, out)
    }
}

fn ecco_sweep(max_trials: usize, out: &Path) -> ecco::bench::MethodSweep {
    let mut cfg = SolveConfig::default();
    cfg.eatss.max_trials = max_trials;
    let s = sweep_spec(vec![ecco_method("ecco-approx-fe", ControlKind::Approximate, cfg)], 1.0, 50, out);
    let summary = run_robustness_sweep(&s).unwrap();
    assert!(out.join("sweep_summary.csv").exists());
    summary.method("ecco-approx-fe").unwrap().clone()
}

#[test]
fn ecco_sweep_failures_are_trial_budget_exhaustion() {
    let dir = tempfile::tempdir().unwrap();
    let m = ecco_sweep(60, dir.path());
    println!("ecco-approx-fe sweep, max_trials 60: {}/{} converged", m.converged, m.samples);
    let distinct: std::collections::HashSet<u64> =
        m.runs.iter().map(|r| r.params[0].1.to_bits()).collect();
    assert!(distinct.len() > 1);
    for r in m.runs.iter().filter(|r| r.run.status != "converged") {
        assert_eq!(r.run.status, "step_failure");
        assert!(r.run.message.as_deref().unwrap_or("").contains("after 60 trials"));
        let alpha = r.params.iter().find(|p| p.0 == "alpha").unwrap().1;
        assert!(alpha > 0.9, "sample {} alpha {alpha}", r.sample);
    }
}

#[test]
fn ecco_sweep_on_rosenbrock_always_converges_with_larger_trial_budget() {
    let dir = tempfile::tempdir().unwrap();
    let m = ecco_sweep(200, dir.path());
    assert_eq!(m.converged, 50);
}

#[test]
fn sweep_is_seed_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let methods = four_methods(SolveConfig::default());
    run_robustness_sweep(&sweep_spec(methods.clone(), 0.5, 5, a.path())).unwrap();
    run_robustness_sweep(&sweep_spec(methods, 0.5, 5, b.path())).unwrap();
    for f in ["sweep_samples.csv", "sweep_summary.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn gd_learning_rate_sweep_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let gd = MethodSpec {
        label: "gd-armijo".into(),
        method: Method::GdArmijo {
            config: SolveConfig::default(),
            line_search: GdArmijoConfig::default(),
        },
    };
    let summary = run_robustness_sweep(&sweep_spec(vec![gd], 1.0, 20, dir.path())).unwrap();
    let m = summary.method("gd-armijo").unwrap();
    println!("gd-armijo learning-rate sweep: {}/{} converged", m.converged, m.samples);
    assert_eq!(m.runs.len(), 20);
    assert!((0.0..=1.0).contains(&m.convergence_rate));
}

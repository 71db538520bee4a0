use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecco::bench::{
    emit_trace_csv, run_experiment, run_robustness_sweep, run_scaling_bench, ExperimentSpec,
    ProblemSpec, OUTPUT_DIR_ENV,
};
use ecco::control::ControlKind;
use ecco::integrator::{Integrator, Rk4Weights};
use ecco::solver::{ecco_solve, source_stepping_solve, DtInit, HomotopyConfig, SolveConfig};

#[derive(Parser)]
#[command(name = "ecco", version, about = "Gradient-flow optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method of an experiment spec.
    Run(SpecArgs),
    /// Run a hyperparameter robustness sweep.
    Sweep(SpecArgs),
    /// Measure control cost against problem dimension.
    BenchScaling {
        #[arg(long, value_delimiter = ',', default_value = "512,1024,2048,4096")]
        n: Vec<usize>,
    },
    /// Solve one test function and print the result.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SpecArgs {
    spec: PathBuf,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    epsilon_ball: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "fn")]
    function: String,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init: Option<Vec<f64>>,
    #[arg(long, default_value = "approx")]
    control: ControlKind,
    #[arg(long, default_value = "fe")]
    integrator: Integrator,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    armijo_c: Option<f64>,
    #[arg(long)]
    dt_init: Option<DtInit>,
    #[arg(long)]
    rk4_weights: Option<Rk4Weights>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Run source stepping with this homotopy increment.
    #[arg(long)]
    dgamma: Option<f64>,
    /// Termination tolerance for the intermediate homotopy stages.
    #[arg(long, requires = "dgamma")]
    stage_epsilon: Option<f64>,
    /// Write the trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn load_spec(args: &SpecArgs) -> ecco::Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::from_json_file(&args.spec)?;
    if let Some(dir) = &args.output_dir {
        spec.output_dir = dir.clone();
    }
    if let Some(r) = args.repetitions {
        spec.repetitions = r;
    }
    if let Some(p) = spec.perturbation.as_mut() {
        if let Some(s) = args.seed {
            p.seed = s;
        }
        if let Some(s) = args.samples {
            p.samples = s;
        }
        if let Some(e) = args.epsilon_ball {
            p.epsilon_ball = e;
        }
    }
    Ok(spec)
}

fn solve(args: &SolveArgs) -> ecco::Result<()> {
    let mut problem = ProblemSpec::new(&args.function);
    problem.dim = args.dim.or(args.init.as_ref().map(Vec::len));
    problem.init = args.init.clone();
    let (obj, x0) = problem.build()?;

    let mut cfg = SolveConfig::default()
        .with_control(args.control)
        .with_integrator(args.integrator);
    cfg.control.normalize = !args.no_normalize;
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut cfg.control.delta, args.delta);
    set(&mut cfg.eatss.alpha, args.alpha);
    set(&mut cfg.eatss.beta, args.beta);
    set(&mut cfg.eatss.eta, args.eta);
    set(&mut cfg.eatss.c, args.armijo_c);
    set(&mut cfg.epsilon, args.epsilon);
    if let Some(v) = args.dt_init {
        cfg.dt_init = v;
    }
    if let Some(v) = args.rk4_weights {
        cfg.rk4_weights = v;
    }
    if let Some(v) = args.max_iters {
        cfg.max_iters = v;
    }
    let (x, trace) = match args.dgamma {
        Some(dg) => {
            cfg.homotopy = Some(HomotopyConfig {
                epsilon: args.stage_epsilon,
                ..HomotopyConfig::new(dg)
            });
            source_stepping_solve(&obj, &x0, &cfg)?
        }
        None => ecco_solve(&obj, &x0, &cfg)?,
    };
    let grad = obj.eval_grad(&x)?;
    println!("status: {}", trace.status);
    println!("iterations: {}", trace.iterations());
    println!("x: {:?}", x.as_slice());
    println!("f: {:.16e}", trace.final_f());
    println!("grad_norm: {:.6e}", grad.norm());
    let evals = trace.total_evals();
    println!("evals: f={} grad={} hess={}", evals.f, evals.grad, evals.hess);
    if let Some(m) = &trace.message {
        println!("message: {m}");
    }
    if let Some(path) = &args.trace {
        emit_trace_csv(&trace, path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> ecco::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let spec = load_spec(&args)?;
            let summary = run_experiment(&spec)?;
            for r in &summary.runs {
                println!(
                    "{} rep {}: {} after {} iterations, f = {:.6e}, |grad| = {:.3e}",
                    r.label, r.repetition, r.status, r.iterations, r.final_f, r.grad_norm
                );
            }
            println!("wrote {}", spec.output_dir.display());
        }
        Command::Sweep(args) => {
            let spec = load_spec(&args)?;
            let summary = run_robustness_sweep(&spec)?;
            for m in &summary.methods {
                println!(
                    "{}: {}/{} converged ({:.1}%), median f = {:.6e}",
                    m.label,
                    m.converged,
                    m.samples,
                    100.0 * m.convergence_rate,
                    m.final_f_median
                );
            }
        }
        Command::BenchScaling { n } => {
            print!("{}", run_scaling_bench(&n)?.render());
        }
        Command::Solve(args) => solve(&args)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

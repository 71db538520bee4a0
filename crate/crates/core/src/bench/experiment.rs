use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv::write_trace_csv;
use super::svg::emit_convergence_svg;
use crate::functions::{default_dim, make_test_function};
use crate::solver::{
    adam_solve, ecco_solve, gd_armijo_solve, source_stepping_solve, AdamConfig, GdArmijoConfig,
    SolveConfig, Trace,
};
use crate::{Error, Objective, Point, Result};

/// Environment variable that overrides `output_dir` on the command line.
pub const OUTPUT_DIR_ENV: &str = "ECCO_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    /// Defaults to the function's natural dimension.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Defaults to the function's first listed initialization.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn new(name: &str) -> Self {
        ProblemSpec {
            name: name.to_string(),
            dim: None,
            init: None,
        }
    }

    pub fn with_init(mut self, init: Vec<f64>) -> Self {
        self.dim = Some(init.len());
        self.init = Some(init);
        self
    }

    pub fn build(&self) -> Result<(Objective, Point)> {
        let dim = match self.dim {
            Some(d) => d,
            None => default_dim(&self.name)
                .ok_or_else(|| Error::usage(format!("unknown test function '{}'", self.name)))?,
        };
        let (obj, spec) = make_test_function(&self.name, dim)?;
        let init = match &self.init {
            Some(x) => x.clone(),
            None => spec.default_inits[0].clone(),
        };
        if init.len() != dim {
            return Err(Error::usage(format!(
                "init has {} coordinates, problem has {dim}",
                init.len()
            )));
        }
        Ok((obj, Point::new(init)?))
    }
}

/// Optimizer selection. ECCO runs use source stepping when
/// `config.homotopy` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Ecco {
        #[serde(default)]
        config: SolveConfig,
    },
    GdArmijo {
        #[serde(default)]
        config: SolveConfig,
        #[serde(default)]
        line_search: GdArmijoConfig,
    },
    Adam {
        #[serde(default)]
        config: SolveConfig,
        #[serde(default)]
        adam: AdamConfig,
    },
}

impl Method {
    pub fn config(&self) -> &SolveConfig {
        match self {
            Method::Ecco { config } | Method::GdArmijo { config, .. } | Method::Adam { config, .. } => {
                config
            }
        }
    }

    pub fn config_mut(&mut self) -> &mut SolveConfig {
        match self {
            Method::Ecco { config } | Method::GdArmijo { config, .. } | Method::Adam { config, .. } => {
                config
            }
        }
    }

    pub fn solve(&self, obj: &Objective, x0: &Point) -> Result<(Point, Trace)> {
        match self {
            Method::Ecco { config } if config.homotopy.is_some() => {
                source_stepping_solve(obj, x0, config)
            }
            Method::Ecco { config } => ecco_solve(obj, x0, config),
            Method::GdArmijo {
                config,
                line_search,
            } => gd_armijo_solve(obj, x0, config, line_search),
            Method::Adam { config, adam } => adam_solve(obj, x0, config, adam),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub label: String,
    #[serde(flatten)]
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Radius of the normalized hyperparameter ball.
    pub epsilon_ball: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::usage("repetitions must be positive"));
        }
        let mut seen = HashSet::new();
        for m in &self.methods {
            if m.label.is_empty() {
                return Err(Error::usage("method labels must be non-empty"));
            }
            if !seen.insert(file_stem(&m.label)) {
                return Err(Error::usage(format!("duplicate method label '{}'", m.label)));
            }
        }
        if let Some(p) = &self.perturbation {
            if !(p.epsilon_ball >= 0.0 && p.epsilon_ball.is_finite()) {
                return Err(Error::usage("epsilon_ball must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// File-name-safe form of a method label.
pub(crate) fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Outcome of one (method, repetition) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub repetition: usize,
    /// Solver status, or `error` when the method could not run.
    pub status: String,
    pub iterations: usize,
    pub final_f: f64,
    pub grad_norm: f64,
    pub x_final: Vec<f64>,
    pub f_evals: u64,
    pub grad_evals: u64,
    pub hess_evals: u64,
    pub message: Option<String>,
    /// Not written to the deterministic summary file.
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub runs: Vec<RunSummary>,
}

impl Summary {
    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }
}

pub(crate) fn summarize(
    label: &str,
    repetition: usize,
    obj: &Objective,
    result: &Result<(Point, Trace)>,
    wall_time_s: f64,
) -> RunSummary {
    match result {
        Ok((x, trace)) => {
            let evals = trace.total_evals();
            let grad_norm = obj.eval_grad(x).map_or(f64::NAN, |g| g.norm());
            RunSummary {
                label: label.to_string(),
                repetition,
                status: trace.status.label().to_string(),
                iterations: trace.iterations(),
                final_f: trace.final_f(),
                grad_norm,
                x_final: x.as_slice().to_vec(),
                f_evals: evals.f,
                grad_evals: evals.grad,
                hess_evals: evals.hess,
                message: trace.message.clone(),
                wall_time_s,
            }
        }
        Err(e) => RunSummary {
            label: label.to_string(),
            repetition,
            status: "error".to_string(),
            iterations: 0,
            final_f: f64::NAN,
            grad_norm: f64::NAN,
            x_final: Vec::new(),
            f_evals: 0,
            grad_evals: 0,
            hess_evals: 0,
            message: Some(e.to_string()),
            wall_time_s,
        },
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn summary_csv(summary: &Summary) -> String {
    let mut out = String::from(
        "label,repetition,status,iterations,final_f,grad_norm,f_evals,grad_evals,hess_evals,x_final\n",
    );
    for r in &summary.runs {
        let x: Vec<String> = r.x_final.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{:.16e},{:.16e},{},{},{},{}",
            csv_field(&r.label),
            r.repetition,
            r.status,
            r.iterations,
            r.final_f,
            r.grad_norm,
            r.f_evals,
            r.grad_evals,
            r.hess_evals,
            x.join(";")
        );
    }
    out
}

/// Runs every (method, repetition) pair and writes, under `output_dir`:
/// `traces/<label>_rep<k>.csv`, `summary.csv`, `timing.csv` (wall time,
/// kept apart so the other files are reproducible) and `convergence.svg`.
///
/// Runs execute concurrently; files are written afterwards by the caller's
/// thread. A method that fails to run is recorded with status `error`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Summary> {
    spec.validate()?;
    let (obj, x0) = spec.problem.build()?;
    let jobs: Vec<(usize, usize)> = (0..spec.methods.len())
        .flat_map(|m| (0..spec.repetitions).map(move |r| (m, r)))
        .collect();
    let results: Vec<(Result<(Point, Trace)>, f64)> = jobs
        .par_iter()
        .map(|&(m, _)| {
            let start = Instant::now();
            let res = spec.methods[m].method.solve(&obj, &x0);
            (res, start.elapsed().as_secs_f64())
        })
        .collect();

    let out = &spec.output_dir;
    let traces_dir = out.join("traces");
    std::fs::create_dir_all(&traces_dir)?;

    let mut summary = Summary {
        problem: spec.problem.name.clone(),
        runs: Vec::with_capacity(jobs.len()),
    };
    let mut timing = String::from("label,repetition,wall_time_s\n");
    let mut plotted = Vec::new();
    for (&(m, rep), (res, wall)) in jobs.iter().zip(&results) {
        let label = &spec.methods[m].label;
        if let Ok((_, trace)) = res {
            let path = traces_dir.join(format!("{}_rep{rep}.csv", file_stem(label)));
            write_trace_csv(trace, std::io::BufWriter::new(std::fs::File::create(path)?))?;
            if rep == 0 {
                plotted.push((label.clone(), trace.clone()));
            }
        }
        let _ = writeln!(timing, "{},{rep},{wall:.6}", csv_field(label));
        summary.runs.push(summarize(label, rep, &obj, res, *wall));
    }
    std::fs::write(out.join("summary.csv"), summary_csv(&summary))?;
    std::fs::write(out.join("timing.csv"), timing)?;
    if !plotted.is_empty() {
        emit_convergence_svg(&plotted, out.join("convergence.svg"))?;
    }
    Ok(summary)
}

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{summarize, ExperimentSpec, Method, RunSummary};
use crate::{Error, Result};

/// Closed sampling interval for one hyperparameter. Open ends of the
/// admissible range are pulled in by one machine epsilon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub lo: f64,
    pub hi: f64,
}

const fn bounds(lo: f64, hi: f64) -> HyperBounds {
    HyperBounds { lo, hi }
}

pub const ETA_BOUNDS: HyperBounds = bounds(1e-4, 10.0);
pub const DELTA_BOUNDS: HyperBounds = bounds(1e-3, 1e3);
pub const ALPHA_BOUNDS: HyperBounds = bounds(f64::EPSILON, 1.0 - f64::EPSILON);
pub const BETA_BOUNDS: HyperBounds = bounds(1.0 + f64::EPSILON, 4.0);
pub const ARMIJO_C_BOUNDS: HyperBounds = bounds(0.0, 0.5 - f64::EPSILON);
pub const LEARNING_RATE_BOUNDS: HyperBounds = bounds(1e-6, 10.0);

/// Draws `θ̃ ~ U(max(θ* − ε/θ*, lo), min(θ* + ε/θ*, hi))`.
pub fn perturb<R: Rng>(theta: f64, epsilon: f64, b: HyperBounds, rng: &mut R) -> f64 {
    let radius = epsilon / theta.abs().max(f64::MIN_POSITIVE);
    let lo = (theta - radius).max(b.lo);
    let hi = (theta + radius).min(b.hi);
    if epsilon == 0.0 {
        return theta;
    }
    if !(lo < hi) {
        return theta.clamp(b.lo, b.hi);
    }
    rng.gen_range(lo..=hi)
}

/// Applies a perturbation draw to the method's tunable hyperparameters and
/// returns their names and sampled values.
fn perturb_method<R: Rng>(method: &mut Method, eps: f64, rng: &mut R) -> Vec<(&'static str, f64)> {
    match method {
        Method::Ecco { config } => {
            let e = &mut config.eatss;
            e.eta = perturb(e.eta, eps, ETA_BOUNDS, rng);
            config.control.delta = perturb(config.control.delta, eps, DELTA_BOUNDS, rng);
            e.alpha = perturb(e.alpha, eps, ALPHA_BOUNDS, rng);
            e.beta = perturb(e.beta, eps, BETA_BOUNDS, rng);
            e.c = perturb(e.c, eps, ARMIJO_C_BOUNDS, rng);
            vec![
                ("eta", e.eta),
                ("delta", config.control.delta),
                ("alpha", e.alpha),
                ("beta", e.beta),
                ("c", e.c),
            ]
        }
        Method::GdArmijo { line_search, .. } => {
            line_search.step0 = perturb(line_search.step0, eps, LEARNING_RATE_BOUNDS, rng);
            vec![("lr", line_search.step0)]
        }
        Method::Adam { adam, .. } => {
            adam.lr = perturb(adam.lr, eps, LEARNING_RATE_BOUNDS, rng);
            vec![("lr", adam.lr)]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub sample: usize,
    pub params: Vec<(String, f64)>,
    pub run: RunSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSweep {
    pub label: String,
    pub samples: usize,
    pub converged: usize,
    pub convergence_rate: f64,
    pub final_f_min: f64,
    pub final_f_median: f64,
    pub final_f_max: f64,
    pub runs: Vec<SweepSample>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub problem: String,
    pub methods: Vec<MethodSweep>,
}

impl SweepSummary {
    pub fn method(&self, label: &str) -> Option<&MethodSweep> {
        self.methods.iter().find(|m| m.label == label)
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// Robustness sweep: for each method, draws `samples` hyperparameter
/// vectors around its configured values and records how many runs end with
/// status `converged`.
///
/// Sample `s` of method `m` uses a ChaCha8 stream seeded with `seed` and
/// stream index `m·samples + s`, so results do not depend on scheduling.
/// Writes `sweep_samples.csv` and `sweep_summary.csv` under `output_dir`.
pub fn run_robustness_sweep(spec: &ExperimentSpec) -> Result<SweepSummary> {
    spec.validate()?;
    let p = spec
        .perturbation
        .ok_or_else(|| Error::usage("robustness sweep needs a perturbation block"))?;
    let (obj, x0) = spec.problem.build()?;

    let jobs: Vec<(usize, usize, Method, Vec<(&'static str, f64)>)> = spec
        .methods
        .iter()
        .enumerate()
        .flat_map(|(m, ms)| (0..p.samples).map(move |s| (m, s, ms)))
        .map(|(m, s, ms)| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream((m * p.samples + s) as u64);
            let mut method = ms.method.clone();
            let params = perturb_method(&mut method, p.epsilon_ball, &mut rng);
            (m, s, method, params)
        })
        .collect();

    let runs: Vec<RunSummary> = jobs
        .par_iter()
        .map(|(m, s, method, _)| {
            let start = std::time::Instant::now();
            let res = method.solve(&obj, &x0);
            summarize(&spec.methods[*m].label, *s, &obj, &res, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut summary = SweepSummary {
        problem: spec.problem.name.clone(),
        methods: spec
            .methods
            .iter()
            .map(|ms| MethodSweep {
                label: ms.label.clone(),
                samples: p.samples,
                converged: 0,
                convergence_rate: f64::NAN,
                final_f_min: f64::NAN,
                final_f_median: f64::NAN,
                final_f_max: f64::NAN,
                runs: Vec::with_capacity(p.samples),
            })
            .collect(),
    };
    for ((m, s, _, params), run) in jobs.into_iter().zip(runs) {
        summary.methods[m].runs.push(SweepSample {
            sample: s,
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            run,
        });
    }
    for ms in &mut summary.methods {
        ms.converged = ms.runs.iter().filter(|r| r.run.status == "converged").count();
        if ms.samples > 0 {
            ms.convergence_rate = ms.converged as f64 / ms.samples as f64;
        }
        let mut fs: Vec<f64> = ms.runs.iter().map(|r| r.run.final_f).filter(|f| f.is_finite()).collect();
        fs.sort_by(f64::total_cmp);
        if let (Some(lo), Some(hi)) = (fs.first(), fs.last()) {
            ms.final_f_min = *lo;
            ms.final_f_max = *hi;
            ms.final_f_median = median(&fs);
        }
    }

    std::fs::create_dir_all(&spec.output_dir)?;
    let mut samples_csv = String::from("label,sample,status,iterations,final_f,grad_norm,params\n");
    let mut summary_csv = String::from(
        "label,samples,converged,convergence_rate,final_f_min,final_f_median,final_f_max\n",
    );
    for ms in &summary.methods {
        for r in &ms.runs {
            let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v:.16e}")).collect();
            let _ = writeln!(
                samples_csv,
                "{},{},{},{},{:.16e},{:.16e},{}",
                ms.label,
                r.sample,
                r.run.status,
                r.run.iterations,
                r.run.final_f,
                r.run.grad_norm,
                params.join(";")
            );
        }
        let _ = writeln!(
            summary_csv,
            "{},{},{},{:.6},{:.16e},{:.16e},{:.16e}",
            ms.label, ms.samples, ms.converged, ms.convergence_rate, ms.final_f_min, ms.final_f_median, ms.final_f_max
        );
    }
    std::fs::write(spec.output_dir.join("sweep_samples.csv"), samples_csv)?;
    std::fs::write(spec.output_dir.join("sweep_summary.csv"), summary_csv)?;
    Ok(summary)
}

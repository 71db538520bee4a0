//! Optimization runs: controlled gradient flow with adaptive stepping,
//! source-stepping homotopy, and two baseline optimizers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::control::{lyapunov_energy, ControlKind, ControlSpec, ControlState};
use crate::eatss::{eatss_search, initial_dt_fe, EatssConfig};
use crate::integrator::{
    ab2_coefficients, ab2_step, fe_step, rk4_step, FlowPoint, History, HistoryRecord, Integrator,
    Rk4Weights, StepOutcome,
};
use crate::objective::{EvalCounts, Objective, Point};
use crate::{Error, Result, Vector};

/// Default gradient max-norm below which a point is treated as stationary.
pub const STATIONARY_GRAD_TOL: f64 = 1e-12;

/// How each iteration picks the first trial step.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum DtInit {
    /// Stable forward-Euler estimate at every iteration.
    Circuit,
    /// Last accepted step; the first iteration uses the circuit estimate for
    /// FE/AB2 and `dt_default` for RK4.
    #[default]
    Last,
    Fixed(f64),
}

impl std::str::FromStr for DtInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circuit" => Ok(DtInit::Circuit),
            "last" => Ok(DtInit::Last),
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::usage(format!(
                            "dt-init must be circuit, last or fixed:<value>, got '{s}'"
                        ))
                    })?;
                Ok(DtInit::Fixed(v))
            }
        }
    }
}

impl fmt::Display for DtInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtInit::Circuit => f.write_str("circuit"),
            DtInit::Last => f.write_str("last"),
            DtInit::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl Serialize for DtInit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DtInit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyConfig {
    /// Homotopy increment in (0, 1].
    pub dgamma: f64,
    /// Termination tolerance for the intermediate stages; defaults to the
    /// outer `epsilon`, which always governs the final stage.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Iteration cap for the intermediate stages; defaults to the outer
    /// `max_iters`.
    #[serde(default)]
    pub max_iters: Option<usize>,
}

impl HomotopyConfig {
    pub fn new(dgamma: f64) -> Self {
        HomotopyConfig {
            dgamma,
            epsilon: None,
            max_iters: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub control: ControlSpec,
    pub integrator: Integrator,
    pub rk4_weights: Rk4Weights,
    pub eatss: EatssConfig,
    pub dt_init: DtInit,
    /// When false every step is taken at the initial step without any
    /// accuracy or stability check.
    pub adaptive: bool,
    /// Stop when `|f_k − f_{k+1}| < epsilon`.
    pub epsilon: f64,
    /// Also stop when `‖∇f‖∞ < grad_tol`.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub homotopy: Option<HomotopyConfig>,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            control: ControlSpec::default(),
            integrator: Integrator::Fe,
            rk4_weights: Rk4Weights::Classical,
            eatss: EatssConfig::default(),
            dt_init: DtInit::Last,
            adaptive: true,
            epsilon: 1e-4,
            grad_tol: STATIONARY_GRAD_TOL,
            max_iters: 10_000,
            homotopy: None,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn with_control(mut self, kind: ControlKind) -> Self {
        self.control.kind = kind;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        self.eatss.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::usage("epsilon must be positive"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::usage("grad_tol must be nonnegative"));
        }
        if self.max_iters == 0 {
            return Err(Error::usage("max_iters must be positive"));
        }
        if let DtInit::Fixed(v) = self.dt_init {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::usage("fixed initial step must be positive"));
            }
        }
        if let Some(h) = &self.homotopy {
            if !(h.dgamma > 0.0 && h.dgamma <= 1.0) {
                return Err(Error::usage("dgamma must lie in (0, 1]"));
            }
            if h.epsilon.is_some_and(|e| !(e > 0.0)) {
                return Err(Error::usage("homotopy epsilon must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    StepFailure,
    EvaluationError,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::StepFailure => "step_failure",
            Status::EvaluationError => "evaluation_error",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One accepted iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    /// Accumulated pseudo-time.
    pub t: f64,
    pub dt: f64,
    pub x: Vector,
    pub f: f64,
    pub grad_norm: f64,
    /// `½‖∇f‖²` at `x`.
    pub lyap: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub eatss_trials: usize,
    /// `max(LTE)` of the accepted step (0 for baselines).
    pub lte_max: f64,
    /// `∇f(x_prev)ᵀd` of the accepted step's direction.
    pub slope: f64,
    /// Cumulative evaluation counts.
    pub evals: EvalCounts,
}

/// Marks the end of one homotopy stage.
#[derive(Clone, Debug, PartialEq)]
pub struct HomotopyStage {
    pub gamma: f64,
    /// Number of records in the trace when the stage finished.
    pub iter: usize,
    /// Stage steady state.
    pub x: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub x0: Vector,
    pub f0: f64,
    pub records: Vec<IterRecord>,
    pub x_final: Vector,
    pub status: Status,
    pub homotopy_boundaries: Vec<HomotopyStage>,
    /// Diagnostic for abnormal termination.
    pub message: Option<String>,
}

impl Trace {
    fn start(x0: Vector, f0: f64) -> Self {
        Trace {
            x_final: x0.clone(),
            x0,
            f0,
            records: Vec::new(),
            status: Status::MaxIters,
            homotopy_boundaries: Vec::new(),
            message: None,
        }
    }

    pub fn final_f(&self) -> f64 {
        self.records.last().map_or(self.f0, |r| r.f)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_evals(&self) -> EvalCounts {
        self.records.last().map(|r| r.evals).unwrap_or_default()
    }

    fn finish(mut self, status: Status, message: Option<String>) -> Self {
        self.status = status;
        self.message = message;
        if let Some(r) = self.records.last() {
            self.x_final = r.x.clone();
        }
        self
    }
}

fn status_for(err: &Error) -> Option<Status> {
    match err {
        Error::StepFailure { .. } | Error::StepOverflow { .. } => Some(Status::StepFailure),
        Error::Evaluation { .. } => Some(Status::EvaluationError),
        _ => None,
    }
}

/// Step-by-step driver for the controlled flow.
///
/// [`ecco_solve`] runs this to termination; callers that need to inspect or
/// compare individual iterates can drive it directly.
pub struct EccoRun {
    obj: Objective,
    cfg: SolveConfig,
    current: FlowPoint,
    state: ControlState,
    history: History,
    t: f64,
    iter: usize,
    last_dt: Option<f64>,
}

impl EccoRun {
    pub fn new(obj: &Objective, x0: &Point, cfg: &SolveConfig) -> Result<Self> {
        cfg.validate()?;
        let obj = obj.with_fresh_counters();
        let state = ControlState::empty();
        let current = FlowPoint::evaluate(&obj, &cfg.control, (**x0).clone(), &state)?;
        let mut history = History::new();
        history.push(HistoryRecord::from_point(&current, 0.0));
        Ok(EccoRun {
            obj,
            cfg: *cfg,
            current,
            state,
            history,
            t: 0.0,
            iter: 0,
            last_dt: None,
        })
    }

    pub fn current(&self) -> &FlowPoint {
        &self.current
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn objective(&self) -> &Objective {
        &self.obj
    }

    fn first_dt(&self) -> f64 {
        let eatss = &self.cfg.eatss;
        let circuit = || initial_dt_fe(&self.current.x, &self.current.grad, &self.current.z, eatss);
        match self.cfg.dt_init {
            DtInit::Fixed(v) => v,
            DtInit::Circuit => circuit(),
            DtInit::Last => match (self.last_dt, self.cfg.integrator) {
                (Some(dt), _) => dt,
                (None, Integrator::Rk4) => eatss.clamp_dt(eatss.dt_default),
                (None, _) => circuit(),
            },
        }
    }

    fn trial(&self, dt: f64) -> Result<StepOutcome> {
        let ctl = &self.cfg.control;
        match self.cfg.integrator {
            Integrator::Fe => fe_step(&self.obj, ctl, &self.current, dt),
            Integrator::Rk4 => rk4_step(
                &self.obj,
                ctl,
                &self.state,
                &self.current,
                &self.history,
                dt,
                self.cfg.rk4_weights,
            ),
            Integrator::Ab2 => match self.last_dt {
                Some(prev) if self.history.len() >= 2 => {
                    let (k1, k2) = ab2_coefficients(dt, prev);
                    ab2_step(&self.obj, ctl, &self.current, &self.history, dt, k1, k2)
                }
                _ => fe_step(&self.obj, ctl, &self.current, dt),
            },
        }
    }

    /// Takes one accepted step and returns its record.
    pub fn step(&mut self) -> Result<IterRecord> {
        let dt0 = self.first_dt();
        let (dt, outcome, trials) = if self.cfg.adaptive {
            let res = eatss_search(|dt| self.trial(dt), &self.current, dt0, &self.cfg.eatss)?;
            (res.dt, res.outcome, res.trials)
        } else {
            let outcome = self.trial(dt0)?;
            (dt0, outcome, 1)
        };
        let slope = self.current.grad.dot(&outcome.direction);
        let lte_max = outcome.max_lte();
        let prev = std::mem::replace(&mut self.current, outcome.next);
        self.state = ControlState::with_history(prev.grad, dt)?;
        self.t += dt;
        self.iter += 1;
        self.last_dt = Some(dt);
        self.history
            .push(HistoryRecord::from_point(&self.current, self.t));
        let p = &self.current;
        Ok(IterRecord {
            iter: self.iter,
            t: self.t,
            dt,
            x: p.x.clone(),
            f: p.f,
            grad_norm: p.grad.norm(),
            lyap: lyapunov_energy(&p.grad),
            z_min: p.z.min(),
            z_max: p.z.max(),
            eatss_trials: trials,
            lte_max,
            slope,
            evals: self.obj.counts(),
        })
    }
}

/// Integrates the controlled flow until `|f_k − f_{k+1}| < ε`, the iteration
/// cap, or a failed step.
///
/// Configuration errors are returned as `Err`; numerical failures end the run
/// with the corresponding [`Status`].
pub fn ecco_solve(obj: &Objective, x0: &Point, cfg: &SolveConfig) -> Result<(Point, Trace)> {
    cfg.validate()?;
    let mut run = match EccoRun::new(obj, x0, cfg) {
        Ok(run) => run,
        Err(e) => {
            let status = status_for(&e).ok_or(e)?;
            let trace = Trace::start((**x0).clone(), f64::NAN);
            return Ok((x0.clone(), trace.finish(status, Some("start point".into()))));
        }
    };
    let mut trace = Trace::start((**x0).clone(), run.current().f);
    let (status, message) = loop {
        if run.current().grad.amax() < cfg.grad_tol {
            break (Status::Converged, None);
        }
        if run.iter() >= cfg.max_iters {
            break (Status::MaxIters, None);
        }
        let f_before = run.current().f;
        match run.step() {
            Ok(rec) => {
                let df = (f_before - rec.f).abs();
                trace.records.push(rec);
                if df < cfg.epsilon {
                    break (Status::Converged, None);
                }
            }
            Err(e) => match status_for(&e) {
                Some(status) => break (status, Some(e.to_string())),
                None => return Err(e),
            },
        }
    };
    let trace = trace.finish(status, message);
    Ok((Point::from_vector(trace.x_final.clone())?, trace))
}

/// Objective of the source-stepping stage at homotopy factor `gamma`:
/// `f(x) − (1−γ)·∇f(x₀)ᵀx`, whose gradient vanishes at `x₀` when `γ = 0`.
pub fn source_stepping_stage(obj: &Objective, grad_x0: &Vector, gamma: f64) -> Result<Objective> {
    if gamma == 1.0 {
        return Ok(obj.clone());
    }
    obj.linear_shift(grad_x0.clone(), 1.0 - gamma)
}

/// Source-stepping homotopy: solves the stage problems for
/// `γ = Δγ, 2Δγ, …, 1`, each warm-started from the previous stage's
/// steady state. The last stage is the original problem.
pub fn source_stepping_solve(obj: &Objective, x0: &Point, cfg: &SolveConfig) -> Result<(Point, Trace)> {
    cfg.validate()?;
    let homotopy = cfg
        .homotopy
        .ok_or_else(|| Error::usage("source stepping needs a homotopy configuration"))?;
    let obj = obj.with_fresh_counters();
    let (f0, g0) = match obj.eval_f(x0).and_then(|f| Ok((f, obj.eval_grad(x0)?))) {
        Ok(v) => v,
        Err(e) => {
            let status = status_for(&e).ok_or(e)?;
            let trace = Trace::start((**x0).clone(), f64::NAN);
            return Ok((x0.clone(), trace.finish(status, Some("start point".into()))));
        }
    };

    let inner_cfg = SolveConfig {
        epsilon: homotopy.epsilon.unwrap_or(cfg.epsilon),
        max_iters: homotopy.max_iters.unwrap_or(cfg.max_iters),
        homotopy: None,
        ..*cfg
    };
    let final_cfg = SolveConfig {
        homotopy: None,
        ..*cfg
    };
    let n_stages = ((1.0 / homotopy.dgamma) - 1e-9).ceil().max(1.0) as usize;

    let mut trace = Trace::start((**x0).clone(), f0);
    let mut x = x0.clone();
    let mut t_offset = 0.0;
    let mut eval_offset = EvalCounts::default();
    for k in 1..=n_stages {
        let gamma = if k == n_stages {
            1.0
        } else {
            k as f64 * homotopy.dgamma
        };
        let stage_obj = source_stepping_stage(&obj, &g0, gamma)?;
        let stage_cfg = if k == n_stages { &final_cfg } else { &inner_cfg };
        let (stage_x, stage_trace) = ecco_solve(&stage_obj, &x, stage_cfg)?;
        let offset_iter = trace.records.len();
        for mut rec in stage_trace.records {
            rec.iter += offset_iter;
            rec.t += t_offset;
            rec.evals = rec.evals + eval_offset;
            trace.records.push(rec);
        }
        if let Some(last) = trace.records.last() {
            t_offset = last.t;
            eval_offset = last.evals;
        }
        trace.homotopy_boundaries.push(HomotopyStage {
            gamma,
            iter: trace.records.len(),
            x: (*stage_x).clone(),
        });
        if stage_trace.status != Status::Converged {
            let msg = format!(
                "stage gamma = {gamma} ended with {}{}",
                stage_trace.status,
                stage_trace
                    .message
                    .map(|m| format!(": {m}"))
                    .unwrap_or_default()
            );
            let trace = trace.finish(stage_trace.status, Some(msg));
            return Ok((Point::from_vector(trace.x_final.clone())?, trace));
        }
        x = stage_x;
    }
    let trace = trace.finish(Status::Converged, None);
    Ok((x, trace))
}

/// Backtracking line search parameters for the gradient-descent baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdArmijoConfig {
    /// First trial step of every line search.
    pub step0: f64,
    pub rho: f64,
    pub c: f64,
    pub max_backtracks: usize,
}

impl Default for GdArmijoConfig {
    fn default() -> Self {
        GdArmijoConfig {
            step0: 1.0,
            rho: 0.5,
            c: 1e-4,
            max_backtracks: 60,
        }
    }
}

/// Gradient descent with Armijo backtracking. Uses `cfg.epsilon` and
/// `cfg.max_iters`.
pub fn gd_armijo_solve(
    obj: &Objective,
    x0: &Point,
    cfg: &SolveConfig,
    gd: &GdArmijoConfig,
) -> Result<(Point, Trace)> {
    if !(gd.step0 > 0.0 && gd.rho > 0.0 && gd.rho < 1.0 && gd.c >= 0.0 && gd.c < 1.0) {
        return Err(Error::usage("invalid gradient-descent line-search parameters"));
    }
    let obj = obj.with_fresh_counters();
    let mut x = (**x0).clone();
    let eval = |x: &Vector| -> Result<(f64, Vector)> { Ok((obj.eval_f(x)?, obj.eval_grad(x)?)) };
    let (mut f, mut g) = match eval(&x) {
        Ok(v) => v,
        Err(e) => {
            let status = status_for(&e).ok_or(e)?;
            return Ok((x0.clone(), Trace::start(x, f64::NAN).finish(status, None)));
        }
    };
    let mut trace = Trace::start(x.clone(), f);
    let mut t = 0.0;
    let (status, message) = loop {
        if g.amax() < cfg.grad_tol {
            break (Status::Converged, None);
        }
        if trace.records.len() >= cfg.max_iters {
            break (Status::MaxIters, None);
        }
        let slope = -g.norm_squared();
        let mut step = gd.step0;
        let mut accepted = None;
        let mut backtracks = 0;
        while backtracks <= gd.max_backtracks {
            let trial = &x - &g * step;
            if let Ok(ft) = obj.eval_f(&trial) {
                if ft <= f + gd.c * step * slope {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            step *= gd.rho;
            backtracks += 1;
        }
        let Some((x_new, f_new)) = accepted else {
            break (Status::StepFailure, Some("line search exhausted".to_string()));
        };
        let g_new = match obj.eval_grad(&x_new) {
            Ok(g) => g,
            Err(e) => break (Status::EvaluationError, Some(e.to_string())),
        };
        t += step;
        let df = (f - f_new).abs();
        x = x_new;
        f = f_new;
        g = g_new;
        trace.records.push(IterRecord {
            iter: trace.records.len() + 1,
            t,
            dt: step,
            x: x.clone(),
            f,
            grad_norm: g.norm(),
            lyap: lyapunov_energy(&g),
            z_min: 1.0,
            z_max: 1.0,
            eatss_trials: backtracks + 1,
            lte_max: 0.0,
            slope,
            evals: obj.counts(),
        });
        if df < cfg.epsilon {
            break (Status::Converged, None);
        }
    };
    let trace = trace.finish(status, message);
    Ok((Point::from_vector(trace.x_final.clone())?, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Full-gradient Adam with bias correction. Uses `cfg.epsilon` and
/// `cfg.max_iters`; a non-finite value or iterate ends the run with
/// [`Status::EvaluationError`].
pub fn adam_solve(obj: &Objective, x0: &Point, cfg: &SolveConfig, adam: &AdamConfig) -> Result<(Point, Trace)> {
    if !(adam.lr > 0.0
        && (0.0..1.0).contains(&adam.beta1)
        && (0.0..1.0).contains(&adam.beta2)
        && adam.eps > 0.0)
    {
        return Err(Error::usage("invalid Adam parameters"));
    }
    let obj = obj.with_fresh_counters();
    let mut x = (**x0).clone();
    let eval = |x: &Vector| -> Result<(f64, Vector)> { Ok((obj.eval_f(x)?, obj.eval_grad(x)?)) };
    let (mut f, mut g) = match eval(&x) {
        Ok(v) => v,
        Err(e) => {
            let status = status_for(&e).ok_or(e)?;
            return Ok((x0.clone(), Trace::start(x, f64::NAN).finish(status, None)));
        }
    };
    let n = x.len();
    let mut m = Vector::zeros(n);
    let mut v = Vector::zeros(n);
    let mut trace = Trace::start(x.clone(), f);
    let (status, message) = loop {
        if g.amax() < cfg.grad_tol {
            break (Status::Converged, None);
        }
        let k = trace.records.len();
        if k >= cfg.max_iters {
            break (Status::MaxIters, None);
        }
        let step_no = (k + 1) as i32;
        m = &m * adam.beta1 + &g * (1.0 - adam.beta1);
        v = &v * adam.beta2 + g.component_mul(&g) * (1.0 - adam.beta2);
        let m_hat = &m / (1.0 - adam.beta1.powi(step_no));
        let v_hat = &v / (1.0 - adam.beta2.powi(step_no));
        let update = m_hat.zip_map(&v_hat, |mh, vh| adam.lr * mh / (vh.sqrt() + adam.eps));
        let slope = -g.dot(&update) / adam.lr;
        let x_new = &x - &update;
        let (f_new, g_new) = match eval(&x_new) {
            Ok(v) => v,
            Err(e) => break (Status::EvaluationError, Some(e.to_string())),
        };
        let df = (f - f_new).abs();
        x = x_new;
        f = f_new;
        g = g_new;
        trace.records.push(IterRecord {
            iter: k + 1,
            t: (k + 1) as f64 * adam.lr,
            dt: adam.lr,
            x: x.clone(),
            f,
            grad_norm: g.norm(),
            lyap: lyapunov_energy(&g),
            z_min: 1.0,
            z_max: 1.0,
            eatss_trials: 1,
            lte_max: 0.0,
            slope,
            evals: obj.counts(),
        });
        if df < cfg.epsilon {
            break (Status::Converged, None);
        }
    };
    let trace = trace.finish(status, message);
    Ok((Point::from_vector(trace.x_final.clone())?, trace))
}

fn agree(a: &Vector, b: &Vector, rel: f64) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b.iter())
            .all(|(p, q)| (p - q).abs() <= rel * p.abs().max(q.abs()).max(1.0))
}

/// Checks that forward Euler on the identity-controlled flow with fixed
/// step `alpha` reproduces gradient descent `x⁺ = x − α∇f(x)` for `n_steps`
/// iterates (agreement within 1e-12 relative).
///
/// An iterate is valid while the objective and gradient are finite there.
/// If gradient descent diverges, the flow must produce the same valid
/// prefix and fail at the same step.
pub fn equivalence_gd(obj: &Objective, x0: &Point, alpha: f64, n_steps: usize) -> Result<bool> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::usage("step size must be nonnegative"));
    }
    let mut gd = Vec::with_capacity(n_steps);
    let mut diverged_at = None;
    let mut x = (**x0).clone();
    let mut g = obj.eval_grad(&x)?;
    for k in 0..n_steps {
        let next = &x - &g * alpha;
        match obj.eval_f(&next).and_then(|_| obj.eval_grad(&next)) {
            Ok(g_next) => {
                gd.push(next.clone());
                x = next;
                g = g_next;
            }
            Err(Error::Evaluation { .. }) => {
                diverged_at = Some(k);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    if alpha == 0.0 {
        // A zero step leaves the flow state where it is.
        return Ok(gd.iter().all(|xk| agree(xk, x0, 1e-12)));
    }

    let cfg = SolveConfig {
        control: ControlSpec::new(ControlKind::Identity),
        integrator: Integrator::Fe,
        dt_init: DtInit::Fixed(alpha),
        adaptive: false,
        max_iters: n_steps.max(1),
        ..SolveConfig::default()
    };
    let mut run = EccoRun::new(obj, x0, &cfg)?;
    for k in 0..n_steps {
        match run.step() {
            Ok(rec) => match gd.get(k) {
                Some(xk) if agree(&rec.x, xk, 1e-12) => {}
                _ => return Ok(false),
            },
            Err(e) if status_for(&e).is_some() => return Ok(diverged_at == Some(k)),
            Err(e) => return Err(e),
        }
    }
    Ok(diverged_at.is_none())
}

/// Checks that the two-step Adams-Bashforth construction, with the previous
/// gradient replaced by the finite difference `−(x(t) − x(t−Δt))/Δt` and
/// the mapping `Δt·k1 = α`, `k2 = β`, reproduces the heavy-ball recursion
/// `x⁺ = x − α∇f(x) + β(x − x⁻)` for `n_steps` iterates (within 1e-10).
///
/// Both sequences start from `x⁻ = x₀` and `x₁ = x₀ − α∇f(x₀)`.
pub fn equivalence_heavy_ball(
    obj: &Objective,
    x0: &Point,
    alpha: f64,
    beta: f64,
    n_steps: usize,
) -> Result<bool> {
    let x_start = (**x0).clone();
    let g0 = obj.eval_grad(&x_start)?;
    let x_first = &x_start - &g0 * alpha;

    let mut heavy = Vec::with_capacity(n_steps);
    let (mut prev, mut cur) = (x_start.clone(), x_first.clone());
    for _ in 0..n_steps {
        let g = obj.eval_grad(&cur)?;
        let next = &cur - g * alpha + (&cur - &prev) * beta;
        prev = std::mem::replace(&mut cur, next);
        heavy.push(cur.clone());
    }

    let dt = if alpha > 0.0 { alpha } else { 1.0 };
    let k1 = alpha / dt;
    let identity = ControlSpec::new(ControlKind::Identity);
    let empty = ControlState::empty();
    let (mut prev, mut cur) = (x_start, x_first);
    for (k, target) in heavy.iter().enumerate() {
        let t = (k + 1) as f64 * dt;
        let surrogate = HistoryRecord {
            x: prev.clone(),
            z_inv: Vector::from_element(prev.len(), 1.0),
            grad: -(&cur - &prev) / dt,
            t: t - dt,
        };
        let start = FlowPoint::evaluate(obj, &identity, cur.clone(), &empty)?;
        let mut hist = History::new();
        hist.push(surrogate);
        hist.push(HistoryRecord::from_point(&start, t));
        let out = ab2_step(obj, &identity, &start, &hist, dt, k1, beta)?;
        if !agree(&out.next.x, target, 1e-10) {
            return Ok(false);
        }
        prev = std::mem::replace(&mut cur, out.next.x);
    }
    Ok(true)
}

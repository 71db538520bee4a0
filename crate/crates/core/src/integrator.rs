//! Explicit integration steps for `ẋ = −Z(x)⁻¹∇f(x)` with local truncation
//! error (LTE) estimates.
//!
//! Each step evaluates the flow at its end point as well, so the caller can
//! check sufficient decrease and reuse the end point (value, gradient and
//! control) as the start of the next step.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::control::{ControlKind, ControlSpec, ControlState, ZDiag};
use crate::objective::Objective;
use crate::{Error, Result, Vector};

/// Relative spacing tolerance for the multistep RK4 error estimate.
pub const HISTORY_UNIFORMITY_TOL: f64 = 0.1;
/// Number of past points the RK4 error estimate needs.
pub const RK4_HISTORY_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Fe,
    Rk4,
    Ab2,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fe" => Ok(Integrator::Fe),
            "rk4" => Ok(Integrator::Rk4),
            "ab2" => Ok(Integrator::Ab2),
            other => Err(Error::usage(format!("unknown integrator '{other}'"))),
        }
    }
}

impl Integrator {
    pub fn label(self) -> &'static str {
        match self {
            Integrator::Fe => "fe",
            Integrator::Rk4 => "rk4",
            Integrator::Ab2 => "ab2",
        }
    }
}

/// How the four RK4 stages are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Rk4Weights {
    /// `(k1 + 2k2 + 2k3 + k4)/6`.
    #[default]
    Classical,
    /// `(k1 + k2 + k3 + k4)/6`, kept for comparison runs only.
    Unnormalized,
}

impl std::str::FromStr for Rk4Weights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Rk4Weights::Classical),
            "unnormalized" => Ok(Rk4Weights::Unnormalized),
            other => Err(Error::usage(format!("unknown rk4 weights '{other}'"))),
        }
    }
}

/// The flow evaluated at one point: value, gradient and control.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowPoint {
    pub x: Vector,
    pub f: f64,
    pub grad: Vector,
    pub z: ZDiag,
}

impl FlowPoint {
    /// Evaluates value, gradient and the control rule at `x`.
    pub fn evaluate(
        obj: &Objective,
        control: &ControlSpec,
        x: Vector,
        state: &ControlState,
    ) -> Result<FlowPoint> {
        let f = obj.eval_f(&x)?;
        let grad = obj.eval_grad(&x)?;
        let z = control.evaluate(obj, &x, &grad, state)?;
        Ok(FlowPoint { x, f, grad, z })
    }

    /// `Z⁻¹∇f`; the flow velocity is its negative.
    pub fn scaled_grad(&self) -> Vector {
        self.z.apply(&self.grad)
    }
}

/// Evaluations consumed by one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepEvals {
    pub f: u64,
    pub grad: u64,
    pub hess: u64,
    pub control: u64,
}

impl StepEvals {
    fn point(control: &ControlSpec) -> Self {
        StepEvals {
            f: 1,
            grad: 1,
            hess: u64::from(control.kind == ControlKind::FullHessian),
            control: 1,
        }
    }

    fn stage(control: &ControlSpec) -> Self {
        StepEvals {
            f: 0,
            ..StepEvals::point(control)
        }
    }
}

impl std::ops::AddAssign for StepEvals {
    fn add_assign(&mut self, rhs: StepEvals) {
        self.f += rhs.f;
        self.grad += rhs.grad;
        self.hess += rhs.hess;
        self.control += rhs.control;
    }
}

/// Which estimator produced [`StepOutcome::lte`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LteSource {
    ForwardEuler,
    Multistep,
}

/// Result of one trial step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// End point of the step, fully evaluated.
    pub next: FlowPoint,
    pub lte: Vector,
    pub lte_source: LteSource,
    /// Effective search direction `(x_next − x)/dt`.
    pub direction: Vector,
    pub evals: StepEvals,
}

impl StepOutcome {
    pub fn x_next(&self) -> &Vector {
        &self.next.x
    }

    pub fn max_lte(&self) -> f64 {
        self.lte.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One past point of the trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRecord {
    pub x: Vector,
    pub z_inv: Vector,
    pub grad: Vector,
    /// Pseudo-time of the record.
    pub t: f64,
}

impl HistoryRecord {
    pub fn from_point(p: &FlowPoint, t: f64) -> Self {
        HistoryRecord {
            x: p.x.clone(),
            z_inv: p.z.z_inv.clone(),
            grad: p.grad.clone(),
            t,
        }
    }

    /// `Z⁻¹∇f` at this record.
    pub fn scaled_grad(&self) -> Vector {
        self.z_inv.component_mul(&self.grad)
    }
}

/// The last few accepted points, oldest first; the most recent record is the
/// current point.
#[derive(Clone, Debug, Default)]
pub struct History {
    records: VecDeque<HistoryRecord>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn push(&mut self, rec: HistoryRecord) {
        if let Some(last) = self.records.back() {
            debug_assert!(rec.t > last.t, "history must be time ordered");
        }
        if self.records.len() == RK4_HISTORY_LEN {
            self.records.pop_front();
        }
        self.records.push_back(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record `lag` steps before the most recent one (`lag = 0` is the
    /// current point).
    pub fn lag(&self, lag: usize) -> Option<&HistoryRecord> {
        self.records.len().checked_sub(lag + 1).map(|i| &self.records[i])
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }
}

fn at_trial<T>(r: Result<T>, dt: f64) -> Result<T> {
    match r {
        Err(Error::Evaluation { .. }) => Err(Error::StepOverflow { dt }),
        other => other,
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::usage(format!("time step must be positive, got {dt}")))
    }
}

/// Evaluates the end point `x_next` of a step of length `dt` from `start`.
/// The approximate control there uses `start` as its gradient history.
fn finish_point(
    obj: &Objective,
    control: &ControlSpec,
    start: &FlowPoint,
    x_next: Vector,
    dt: f64,
) -> Result<FlowPoint> {
    if x_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepOverflow { dt });
    }
    let state = ControlState::with_history(start.grad.clone(), dt)?;
    at_trial(FlowPoint::evaluate(obj, control, x_next, &state), dt)
}

/// `0.5·dt·|(Z⁻¹∇f)(t) − (Z⁻¹∇f)(t+dt)|` per coordinate.
pub fn fe_lte(scaled_grad_now: &Vector, scaled_grad_next: &Vector, dt: f64) -> Vector {
    (scaled_grad_now - scaled_grad_next).map(|d| 0.5 * dt * d.abs())
}

/// Forward Euler: `x⁺ = x − dt·Z⁻¹∇f(x)`.
pub fn fe_step(
    obj: &Objective,
    control: &ControlSpec,
    start: &FlowPoint,
    dt: f64,
) -> Result<StepOutcome> {
    check_dt(dt)?;
    let slope = start.scaled_grad();
    let x_next = &start.x - &slope * dt;
    let next = finish_point(obj, control, start, x_next, dt)?;
    let lte = fe_lte(&slope, &next.scaled_grad(), dt);
    Ok(StepOutcome {
        next,
        lte,
        lte_source: LteSource::ForwardEuler,
        direction: -slope,
        evals: StepEvals::point(control),
    })
}

/// Classical four-stage Runge-Kutta step.
///
/// Stage controls are evaluated at the stage points; the approximate rule
/// keeps the step-start history `state` with the stage-local gradient. The
/// LTE comes from [`rk4_lte`] when `hist` (whose last record is `start`) has
/// four uniformly spaced points, and from [`fe_lte`] otherwise.
pub fn rk4_step(
    obj: &Objective,
    control: &ControlSpec,
    state: &ControlState,
    start: &FlowPoint,
    hist: &History,
    dt: f64,
    weights: Rk4Weights,
) -> Result<StepOutcome> {
    check_dt(dt)?;
    let mut evals = StepEvals::point(control);
    let velocity = |x: Vector, evals: &mut StepEvals| -> Result<Vector> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepOverflow { dt });
        }
        let grad = at_trial(obj.eval_grad(&x), dt)?;
        let z = at_trial(control.evaluate(obj, &x, &grad, state), dt)?;
        *evals += StepEvals::stage(control);
        Ok(-z.apply(&grad))
    };

    let k1 = -start.scaled_grad();
    let k2 = velocity(&start.x + &k1 * (0.5 * dt), &mut evals)?;
    let k3 = velocity(&start.x + &k2 * (0.5 * dt), &mut evals)?;
    let k4 = velocity(&start.x + &k3 * dt, &mut evals)?;
    let direction = match weights {
        Rk4Weights::Classical => (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) / 6.0,
        Rk4Weights::Unnormalized => (&k1 + &k2 + &k3 + &k4) / 6.0,
    };
    let x_next = &start.x + &direction * dt;
    let next = finish_point(obj, control, start, x_next, dt)?;

    let (lte, lte_source) = match rk4_lte(hist, dt) {
        Some(lte) => (lte, LteSource::Multistep),
        None => (
            fe_lte(&start.scaled_grad(), &next.scaled_grad(), dt),
            LteSource::ForwardEuler,
        ),
    };
    Ok(StepOutcome {
        next,
        lte,
        lte_source,
        direction,
        evals,
    })
}

/// Multistep error estimate from the last four trajectory points:
///
/// `|(10x₋₃ + 9x₋₂ − 18x₋₁ − x₀)/30 + dt·(ẋ₋₃ + 6ẋ₋₂ + 3ẋ₋₁)/10|`
///
/// where `ẋ = −Z⁻¹∇f`. The combination vanishes on polynomial trajectories
/// up to degree five. Returns `None` when the history is short or its
/// spacing differs from `dt` by more than [`HISTORY_UNIFORMITY_TOL`].
pub fn rk4_lte(hist: &History, dt: f64) -> Option<Vector> {
    if hist.len() < RK4_HISTORY_LEN {
        return None;
    }
    let r3 = hist.lag(3)?;
    let r2 = hist.lag(2)?;
    let r1 = hist.lag(1)?;
    let r0 = hist.lag(0)?;
    let uniform = [r2.t - r3.t, r1.t - r2.t, r0.t - r1.t]
        .iter()
        .all(|&s| (s - dt).abs() <= HISTORY_UNIFORMITY_TOL * dt);
    if !uniform {
        return None;
    }
    let states = (&r3.x * 10.0 + &r2.x * 9.0 - &r1.x * 18.0 - &r0.x) / 30.0;
    let rates = -(r3.scaled_grad() + r2.scaled_grad() * 6.0 + r1.scaled_grad() * 3.0);
    let lte = (states + rates * (dt / 10.0)).map(f64::abs);
    lte.iter().all(|v| v.is_finite()).then_some(lte)
}

/// Two-step Adams-Bashforth:
/// `x⁺ = x − dt·(k1·(Z⁻¹∇f)(t) + k2·(Z⁻¹∇f)(t−Δt))`.
///
/// The `t−Δt` term comes from the record before the last in `hist`. The LTE
/// is the forward-Euler estimate.
pub fn ab2_step(
    obj: &Objective,
    control: &ControlSpec,
    start: &FlowPoint,
    hist: &History,
    dt: f64,
    k1: f64,
    k2: f64,
) -> Result<StepOutcome> {
    check_dt(dt)?;
    let prev = hist
        .lag(1)
        .ok_or_else(|| Error::usage("AB2 step needs a previous gradient record"))?;
    let slope = start.scaled_grad();
    let combined = &slope * k1 + prev.scaled_grad() * k2;
    let x_next = &start.x - &combined * dt;
    let next = finish_point(obj, control, start, x_next, dt)?;
    let lte = fe_lte(&slope, &next.scaled_grad(), dt);
    Ok(StepOutcome {
        next,
        lte,
        lte_source: LteSource::ForwardEuler,
        direction: -combined,
        evals: StepEvals::point(control),
    })
}

/// Variable-step AB2 coefficients for a step `dt` following `dt_prev`.
pub fn ab2_coefficients(dt: f64, dt_prev: f64) -> (f64, f64) {
    let r = dt / dt_prev;
    (1.0 + 0.5 * r, -0.5 * r)
}

//! Error-aware time-step search.
//!
//! Starting from a guess, the step is grown by `beta` while the trial step
//! keeps `max(LTE) ≤ eta` and satisfies the sufficient-decrease test, then
//! shrunk by `alpha` while either check fails. The accepted step is the
//! largest trialed step that passed both checks.

use serde::{Deserialize, Serialize};

use crate::control::ZDiag;
use crate::integrator::{FlowPoint, StepOutcome};
use crate::{Error, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EatssConfig {
    /// Shrink factor in (0, 1).
    pub alpha: f64,
    /// Grow factor > 1.
    pub beta: f64,
    /// LTE tolerance.
    pub eta: f64,
    /// Sufficient-decrease constant in [0, 1).
    pub c: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_default: f64,
    pub max_trials: usize,
}

impl Default for EatssConfig {
    fn default() -> Self {
        EatssConfig {
            alpha: 0.9,
            beta: 1.1,
            eta: 0.1,
            c: 1e-4,
            dt_min: 1e-14,
            dt_max: 1e3,
            dt_default: 1e-2,
            max_trials: 60,
        }
    }
}

impl EatssConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::usage(format!("eatss: {msg}")));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return bad("beta must be greater than 1");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if !(self.c >= 0.0 && self.c < 1.0) {
            return bad("c must lie in [0, 1)");
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_max && self.dt_max.is_finite()) {
            return bad("need 0 < dt_min < dt_max");
        }
        if self.max_trials == 0 {
            return bad("max_trials must be positive");
        }
        Ok(())
    }

    pub fn clamp_dt(&self, dt: f64) -> f64 {
        dt.clamp(self.dt_min, self.dt_max)
    }
}

/// Stable forward-Euler step estimate `2·xᵀI_c / Σ zᵢ·I_cᵢ²` with capacitor
/// currents `I_c = ∇f`.
///
/// Falls back to `cfg.dt_default` when the numerator or denominator is not
/// positive or the ratio is not finite; the result is clamped to
/// `[dt_min, dt_max]`.
pub fn initial_dt_fe(x: &Vector, grad: &Vector, z: &ZDiag, cfg: &EatssConfig) -> f64 {
    let numerator = 2.0 * x.dot(grad);
    let denominator: f64 = z
        .z_inv
        .iter()
        .zip(grad.iter())
        .map(|(zi, gi)| zi * gi * gi)
        .sum();
    let candidate = numerator / denominator;
    if numerator <= 0.0 || denominator <= 0.0 || !candidate.is_finite() {
        return cfg.clamp_dt(cfg.dt_default);
    }
    cfg.clamp_dt(candidate)
}

/// Strict sufficient-decrease test `f1 < f0 + c·dt·∇fᵀd`.
pub fn armijo_ok(f0: f64, f1: f64, grad: &Vector, direction: &Vector, dt: f64, c: f64) -> bool {
    f1 < f0 + c * dt * grad.dot(direction)
}

/// Accepted step from [`eatss_search`].
#[derive(Clone, Debug)]
pub struct EatssResult {
    pub dt: f64,
    pub outcome: StepOutcome,
    /// Number of trial steps evaluated, including the accepted one.
    pub trials: usize,
}

/// Whether `outcome`, a step of length `dt` from `start`, passes both the
/// accuracy and the stability check.
pub fn step_acceptable(start: &FlowPoint, outcome: &StepOutcome, dt: f64, cfg: &EatssConfig) -> bool {
    outcome.max_lte() <= cfg.eta
        && armijo_ok(
            start.f,
            outcome.next.f,
            &start.grad,
            &outcome.direction,
            dt,
            cfg.c,
        )
}

/// Searches for the largest acceptable step around `dt0`.
///
/// `step` performs one trial integration step of the given length from
/// `start`. Overflowing trials count as failures. Any other error from
/// `step` is returned unchanged.
pub fn eatss_search<F>(mut step: F, start: &FlowPoint, dt0: f64, cfg: &EatssConfig) -> Result<EatssResult>
where
    F: FnMut(f64) -> Result<StepOutcome>,
{
    let mut trials = 0usize;
    let mut last_lte = f64::NAN;
    let mut last_armijo = false;
    let mut trial = |dt: f64, trials: &mut usize| -> Result<Option<StepOutcome>> {
        *trials += 1;
        match step(dt) {
            Ok(outcome) => {
                last_lte = outcome.max_lte();
                last_armijo = armijo_ok(
                    start.f,
                    outcome.next.f,
                    &start.grad,
                    &outcome.direction,
                    dt,
                    cfg.c,
                );
                Ok(step_acceptable(start, &outcome, dt, cfg).then_some(outcome))
            }
            Err(Error::StepOverflow { .. }) => {
                last_lte = f64::INFINITY;
                last_armijo = false;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };

    let mut dt = cfg.clamp_dt(dt0);
    let mut best: Option<(f64, StepOutcome)> = None;

    // Grow while both checks hold.
    while let Some(outcome) = trial(dt, &mut trials)? {
        best = Some((dt, outcome));
        let grown = dt * cfg.beta;
        if grown > cfg.dt_max || trials >= cfg.max_trials {
            break;
        }
        dt = grown;
    }

    // `dt` now failed (or hit a limit while passing). Shrink while failing,
    // but only down to the best passing step already seen.
    if best.as_ref().is_none_or(|(b, _)| *b < dt) {
        loop {
            if trials >= cfg.max_trials {
                break;
            }
            let shrunk = dt * cfg.alpha;
            if let Some((b, _)) = &best {
                if shrunk <= *b {
                    break;
                }
            }
            if shrunk < cfg.dt_min {
                break;
            }
            dt = shrunk;
            if let Some(outcome) = trial(dt, &mut trials)? {
                best = Some((dt, outcome));
                break;
            }
        }
    }

    match best {
        Some((dt, outcome)) => Ok(EatssResult {
            dt,
            outcome,
            trials,
        }),
        None => Err(Error::StepFailure {
            trials,
            last_dt: dt,
            last_lte,
            last_armijo,
        }),
    }
}

//! Diagonal inverse-capacitance control `z = diag(Z⁻¹)` for the scaled
//! gradient flow.
//!
//! Three rules are provided:
//!
//! * identity: `z = 1`, which turns the flow into plain gradient flow;
//! * full Hessian: `zᵢ = max(δ⁻¹·gᵢ·(H g)ᵢ, 1)`;
//! * approximate: `zᵢ = sqrt(max(−δ⁻¹·gᵢ·âᵢ, 1))` with the finite-difference
//!   gradient rate `â = (g(t) − g(t−Δt)) / Δt`.
//!
//! Entries below one are truncated to one so the controlled flow never does
//! worse than the identity case, and the result can optionally be scaled so
//! its largest entry is one (the step search then sets the overall scale).
//!
//! Every routine reports an operation count in [`ZDiag::flops`] so the cost
//! of the two nontrivial rules can be compared as a function of `n`.

use serde::{Deserialize, Serialize};

use crate::objective::Objective;
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    Identity,
    #[serde(alias = "hessian")]
    FullHessian,
    #[serde(alias = "approx")]
    Approximate,
}

impl std::str::FromStr for ControlKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ControlKind::Identity),
            "hessian" | "full_hessian" => Ok(ControlKind::FullHessian),
            "approx" | "approximate" => Ok(ControlKind::Approximate),
            other => Err(Error::usage(format!("unknown control '{other}'"))),
        }
    }
}

impl ControlKind {
    pub fn label(self) -> &'static str {
        match self {
            ControlKind::Identity => "identity",
            ControlKind::FullHessian => "hessian",
            ControlKind::Approximate => "approx",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlSpec {
    pub kind: ControlKind,
    /// Regularizer δ > 0; larger values pull the control toward identity.
    pub delta: f64,
    pub normalize: bool,
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec {
            kind: ControlKind::Approximate,
            delta: 1.0,
            normalize: true,
        }
    }
}

impl ControlSpec {
    pub fn new(kind: ControlKind) -> Self {
        ControlSpec {
            kind,
            ..ControlSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::usage(format!(
                "control delta must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Evaluates the configured rule at `x`, where `grad = ∇f(x)`.
    ///
    /// The Hessian rule evaluates `∇²f(x)` through `obj`; the approximate
    /// rule reads its gradient history from `state`.
    pub fn evaluate(
        &self,
        obj: &Objective,
        x: &Vector,
        grad: &Vector,
        state: &ControlState,
    ) -> Result<ZDiag> {
        let z = match self.kind {
            ControlKind::Identity => z_identity(grad.len()),
            ControlKind::FullHessian => {
                let hess = obj.eval_hess(x)?;
                z_full_hessian(grad, &hess, self)?
            }
            ControlKind::Approximate => z_approximate(grad, state, self)?,
        };
        Ok(z)
    }
}

/// Gradient history for the approximate rule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControlState {
    history: Option<(Vector, f64)>,
}

impl ControlState {
    pub fn empty() -> Self {
        ControlState::default()
    }

    /// History holding `∇f(x(t−Δt))` and the step `Δt` that followed it.
    pub fn with_history(prev_grad: Vector, prev_dt: f64) -> Result<Self> {
        if !(prev_dt > 0.0) {
            return Err(Error::usage(format!(
                "previous time step must be positive, got {prev_dt}"
            )));
        }
        Ok(ControlState {
            history: Some((prev_grad, prev_dt)),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_none()
    }

    pub fn prev_grad(&self) -> Option<&Vector> {
        self.history.as_ref().map(|(g, _)| g)
    }

    pub fn prev_dt(&self) -> Option<f64> {
        self.history.as_ref().map(|(_, dt)| *dt)
    }
}

/// Diagonal of `Z⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZDiag {
    pub z_inv: Vector,
    /// Largest entry after truncation, before normalization.
    pub raw_max: f64,
    /// Floating-point operations spent computing this diagonal.
    pub flops: u64,
}

impl ZDiag {
    pub fn len(&self) -> usize {
        self.z_inv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_inv.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.z_inv.min()
    }

    pub fn max(&self) -> f64 {
        self.z_inv.max()
    }

    /// `Z⁻¹ g`, the negated flow direction.
    pub fn apply(&self, grad: &Vector) -> Vector {
        self.z_inv.component_mul(grad)
    }
}

pub fn z_identity(n: usize) -> ZDiag {
    ZDiag {
        z_inv: Vector::from_element(n, 1.0),
        raw_max: 1.0,
        flops: 0,
    }
}

/// Second-order rule `zᵢ = max(δ⁻¹·gᵢ·(H g)ᵢ, 1)`.
pub fn z_full_hessian(grad: &Vector, hess: &Matrix, spec: &ControlSpec) -> Result<ZDiag> {
    spec.validate()?;
    let n = grad.len();
    if hess.nrows() != n || hess.ncols() != n {
        return Err(Error::usage("Hessian shape does not match gradient"));
    }
    let mut flops = 0u64;
    let inv_delta = 1.0 / spec.delta;
    let mut z = Vector::zeros(n);
    for i in 0..n {
        let mut hg = 0.0;
        for j in 0..n {
            hg += hess[(i, j)] * grad[j];
        }
        flops += 2 * n as u64;
        let raw = inv_delta * grad[i] * hg;
        flops += 2;
        if !raw.is_finite() {
            return Err(Error::Evaluation {
                what: "Hessian control entry",
                x: grad.as_slice().to_vec(),
            });
        }
        z[i] = raw.max(1.0);
        flops += 1;
    }
    Ok(finish(z, spec.normalize, flops))
}

/// First-order rule `zᵢ = sqrt(max(−δ⁻¹·gᵢ·âᵢ, 1))`.
///
/// With no history this returns the identity control.
pub fn z_approximate(grad_now: &Vector, state: &ControlState, spec: &ControlSpec) -> Result<ZDiag> {
    spec.validate()?;
    let n = grad_now.len();
    let Some((prev_grad, prev_dt)) = state.history.as_ref() else {
        return Ok(z_identity(n));
    };
    if !(*prev_dt > 0.0) {
        return Err(Error::usage("previous time step must be positive"));
    }
    if prev_grad.len() != n {
        return Err(Error::usage("gradient history has the wrong dimension"));
    }
    let inv_delta = 1.0 / spec.delta;
    let mut flops = 0u64;
    let mut z = Vector::zeros(n);
    for i in 0..n {
        let rate = (grad_now[i] - prev_grad[i]) / prev_dt;
        let raw = -inv_delta * grad_now[i] * rate;
        flops += 4;
        if !raw.is_finite() {
            return Err(Error::Evaluation {
                what: "approximate control entry",
                x: grad_now.as_slice().to_vec(),
            });
        }
        z[i] = raw.max(1.0).sqrt();
        flops += 2;
    }
    Ok(finish(z, spec.normalize, flops))
}

fn finish(mut z: Vector, normalize: bool, mut flops: u64) -> ZDiag {
    let raw_max = z.max();
    flops += z.len() as u64;
    if normalize {
        z /= raw_max;
        flops += z.len() as u64;
    }
    ZDiag {
        z_inv: z,
        raw_max,
        flops,
    }
}

/// `∇fᵀ ∇²f Z⁻¹ ∇f`, the rate at which `½‖∇f‖²` decays along the flow.
pub fn charge_dissipation_rate(grad: &Vector, hess: &Matrix, z: &ZDiag) -> f64 {
    let scaled = z.apply(grad);
    grad.dot(&(hess * scaled))
}

/// `½‖∇f‖²`, the energy stored in the adjoint capacitors.
pub fn lyapunov_energy(grad: &Vector) -> f64 {
    0.5 * grad.norm_squared()
}

//! Objective-function abstraction with evaluation counters and
//! finite-difference derivative oracles.

use std::fmt;
use std::ops::Deref;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector};

/// Default step for [`fd_gradient`].
pub const FD_GRADIENT_STEP: f64 = 1e-6;
/// Default step for [`fd_hessian`].
pub const FD_HESSIAN_STEP: f64 = 1e-5;

/// A twice-differentiable scalar function on ℝⁿ.
///
/// Implementations must be pure: evaluating twice at the same point gives
/// bit-identical results.
pub trait Function: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;

    fn has_hessian(&self) -> bool {
        false
    }

    /// Dense symmetric Hessian, or `None` when the function does not
    /// provide second derivatives.
    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        None
    }
}

/// A point in ℝⁿ with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vector);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_vector(Vector::from_vec(coords))
    }

    pub fn from_vector(x: Vector) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::usage("point must have at least one coordinate"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage(format!(
                "point has non-finite coordinates: {:?}",
                x.as_slice()
            )));
        }
        Ok(Point(x))
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }
}

impl Deref for Point {
    type Target = Vector;

    fn deref(&self) -> &Vector {
        &self.0
    }
}

/// Snapshot of evaluation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub f: u64,
    pub grad: u64,
    pub hess: u64,
}

impl std::ops::Add for EvalCounts {
    type Output = EvalCounts;

    fn add(self, rhs: EvalCounts) -> EvalCounts {
        EvalCounts {
            f: self.f + rhs.f,
            grad: self.grad + rhs.grad,
            hess: self.hess + rhs.hess,
        }
    }
}

#[derive(Default, Debug)]
struct Counters {
    f: AtomicU64,
    grad: AtomicU64,
    hess: AtomicU64,
}

/// Shared handle to a [`Function`] plus monotone evaluation counters.
///
/// Cloning shares both the function and the counters; use
/// [`Objective::with_fresh_counters`] to start counting from zero for a new
/// solve without disturbing other users of the same function.
#[derive(Clone)]
pub struct Objective {
    func: Arc<dyn Function>,
    counters: Arc<Counters>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name())
            .field("dim", &self.dim())
            .field("counts", &self.counts())
            .finish()
    }
}

impl Objective {
    pub fn new(func: impl Function + 'static) -> Self {
        Objective {
            func: Arc::new(func),
            counters: Arc::default(),
        }
    }

    /// Builds an objective from value and gradient closures.
    pub fn from_fns<F, G>(name: impl Into<String>, dim: usize, value: F, gradient: G) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Objective::new(ClosureFunction {
            name: name.into(),
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: None,
        })
    }

    /// Like [`Objective::from_fns`] with an analytic Hessian.
    pub fn from_fns_with_hessian<F, G, H>(
        name: impl Into<String>,
        dim: usize,
        value: F,
        gradient: G,
        hessian: H,
    ) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
        H: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        Objective::new(ClosureFunction {
            name: name.into(),
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Some(Box::new(hessian)),
        })
    }

    pub fn name(&self) -> &str {
        self.func.name()
    }

    pub fn dim(&self) -> usize {
        self.func.dim()
    }

    /// Same function, counters starting at zero.
    pub fn with_fresh_counters(&self) -> Self {
        Objective {
            func: Arc::clone(&self.func),
            counters: Arc::default(),
        }
    }

    pub fn counts(&self) -> EvalCounts {
        EvalCounts {
            f: self.counters.f.load(Ordering::Relaxed),
            grad: self.counters.grad.load(Ordering::Relaxed),
            hess: self.counters.hess.load(Ordering::Relaxed),
        }
    }

    pub fn has_hessian(&self) -> bool {
        self.func.has_hessian()
    }

    fn check_input(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::usage(format!(
                "{}: expected a point of dimension {}, got {}",
                self.name(),
                self.dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "input point",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &Vector) -> Result<f64> {
        self.check_input(x)?;
        self.counters.f.fetch_add(1, Ordering::Relaxed);
        let v = self.func.value(x);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: "objective value",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(v)
    }

    pub fn eval_grad(&self, x: &Vector) -> Result<Vector> {
        self.check_input(x)?;
        self.counters.grad.fetch_add(1, Ordering::Relaxed);
        let g = self.func.gradient(x);
        debug_assert_eq!(g.len(), self.dim());
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "gradient",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(g)
    }

    pub fn eval_hess(&self, x: &Vector) -> Result<Matrix> {
        self.check_input(x)?;
        let Some(h) = self.func.hessian(x) else {
            return Err(Error::Unsupported(format!(
                "{} does not provide a Hessian",
                self.name()
            )));
        };
        self.counters.hess.fetch_add(1, Ordering::Relaxed);
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "Hessian",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(h)
    }

    /// The objective `f(x) − weight·anchorᵀx`, whose gradient is
    /// `∇f(x) − weight·anchor`. It keeps its own evaluation counters.
    pub fn linear_shift(&self, anchor: Vector, weight: f64) -> Result<Objective> {
        if anchor.len() != self.dim() {
            return Err(Error::usage("shift vector has the wrong dimension"));
        }
        let name = format!("{}-shifted", self.name());
        Ok(Objective::new(LinearShift {
            name,
            inner: self.clone(),
            shift: anchor * weight,
        }))
    }
}

type ValueFn = Box<dyn Fn(&Vector) -> f64 + Send + Sync>;
type GradientFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;
type HessianFn = Box<dyn Fn(&Vector) -> Matrix + Send + Sync>;

struct ClosureFunction {
    name: String,
    dim: usize,
    value: ValueFn,
    gradient: GradientFn,
    hessian: Option<HessianFn>,
}

impl Function for ClosureFunction {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }

    fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        self.hessian.as_ref().map(|h| h(x))
    }
}

struct LinearShift {
    name: String,
    inner: Objective,
    shift: Vector,
}

impl Function for LinearShift {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.inner.func.value(x) - self.shift.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.inner.func.gradient(x) - &self.shift
    }

    fn has_hessian(&self) -> bool {
        self.inner.has_hessian()
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        self.inner.func.hessian(x)
    }
}

/// Central-difference gradient `(f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h`.
pub fn fd_gradient(obj: &Objective, x: &Vector, h: f64) -> Result<Vector> {
    if !(h > 0.0) {
        return Err(Error::usage("finite-difference step must be positive"));
    }
    let mut g = Vector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let fp = obj.eval_f(&probe)?;
        probe[i] = xi - h;
        let fm = obj.eval_f(&probe)?;
        probe[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Central differences of the analytic gradient, symmetrized.
pub fn fd_hessian(obj: &Objective, x: &Vector, h: f64) -> Result<Matrix> {
    if !(h > 0.0) {
        return Err(Error::usage("finite-difference step must be positive"));
    }
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        let xj = x[j];
        probe[j] = xj + h;
        let gp = obj.eval_grad(&probe)?;
        probe[j] = xj - h;
        let gm = obj.eval_grad(&probe)?;
        probe[j] = xj;
        hess.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

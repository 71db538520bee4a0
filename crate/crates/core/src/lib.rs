//! Gradient-flow optimization through an equivalent-circuit lens.
//!
//! The optimizer integrates the component-wise scaled gradient flow
//! `ẋ = −Z(x)⁻¹ ∇f(x)` whose steady states are the critical points of `f`.
//! The diagonal `Z⁻¹` plays the role of inverse nonlinear capacitances and is
//! chosen by a control rule ([`control`]); the ODE is discretized with an
//! explicit integrator ([`integrator`]) whose time step is picked by an
//! error-aware search ([`eatss`]) that bounds the local truncation error and
//! enforces sufficient decrease. [`solver`] ties these together, adds a
//! source-stepping homotopy and a couple of baseline optimizers, and
//! [`bench`] drives experiments from the command line.

pub mod bench;
pub mod control;
pub mod eatss;
pub mod error;
pub mod functions;
pub mod integrator;
pub mod objective;
pub mod solver;

pub use error::{Error, Result};
pub use objective::{EvalCounts, Objective, Point};

/// Dense column vector used for points, gradients and control diagonals.
pub type Vector = nalgebra::DVector<f64>;
/// Dense square matrix used for Hessians.
pub type Matrix = nalgebra::DMatrix<f64>;

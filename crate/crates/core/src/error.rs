use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: wrong dimension, unknown name, invalid hyperparameter.
    #[error("usage error: {0}")]
    Usage(String),

    /// The objective produced a non-finite value at a finite point.
    #[error("evaluation error: {what} is not finite at x = {x:?}")]
    Evaluation { what: &'static str, x: Vec<f64> },

    /// The objective does not provide the requested derivative.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// An integration step produced a non-finite state; the caller should
    /// retry with a smaller step.
    #[error("step overflow at dt = {dt:e}")]
    StepOverflow { dt: f64 },

    /// The time-step search could not find an acceptable step.
    #[error("time-step search failed after {trials} trials (last dt = {last_dt:e}, lte = {last_lte:e}, armijo = {last_armijo})")]
    StepFailure {
        trials: usize,
        last_dt: f64,
        last_lte: f64,
        last_armijo: bool,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}

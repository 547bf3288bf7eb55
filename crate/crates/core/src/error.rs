use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("map evaluation failed at {point:?}: {reason}")]
    Evaluation { point: [f64; 2], reason: String },
    #[error("singular map: Newton inversion did not converge at {point:?} (residual {residual:e})")]
    SingularMap { point: [f64; 2], residual: f64 },
    #[error("orientation error: det H = {det:e} at {point:?}")]
    Orientation { point: [f64; 2], det: f64 },
    #[error("operator degenerate: {0}")]
    OperatorDegenerate(String),
    #[error("iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("non-finite state at t = {time}")]
    Blowup { time: f64 },
    #[error("energy plateau not reached before t_cap = {t_cap}")]
    NonDissipative { t_cap: f64 },
    #[error("exact Gromov-Hausdorff solver is capped at {cap} points, got {n}; use gh_upper")]
    ExactCapExceeded { n: usize, cap: usize },
    #[error("nonlinearity validation failed at u = {u}: {reason}")]
    Validation { u: f64, reason: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

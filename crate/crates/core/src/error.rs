use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "structural instability on axis {axis}: mode {mode} has 1 + c*beta*V = {value:.6} <= 0 (zigzag-type instability)"
    )]
    StructuralInstability { axis: char, mode: usize, value: f64 },

    #[error("resonance: drive {drive} is resonant with mode {mode} on axis {axis}")]
    Resonance { axis: char, mode: usize, drive: usize },

    #[error("infeasible screening: {0}")]
    InfeasibleScreening(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("system too large: {0}")]
    TooLarge(String),

    #[error("time step too coarse: norm drift {drift:.3e} at step {step}, refine the time grid")]
    StepTooCoarse { step: usize, drift: f64 },

    #[error("no bracketing interval: {0}")]
    NoBracket(String),

    #[error("phase diagram incomplete: {0}")]
    IncompletePhaseDiagram(String),
}

impl Error {
    /// Process exit code class: 1 validation, 2 numerical failure, 3 infeasible request.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfiguration(_) | Error::InvalidInput(_) | Error::IndexOutOfRange(_) => 1,
            Error::StructuralInstability { .. }
            | Error::Resonance { .. }
            | Error::NonConvergence { .. }
            | Error::StepTooCoarse { .. }
            | Error::NoBracket(_)
            | Error::IncompletePhaseDiagram(_) => 2,
            Error::InfeasibleScreening(_) | Error::TooLarge(_) => 3,
        }
    }
}

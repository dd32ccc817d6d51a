use thiserror::Error;

/// Errors raised by the analysis and simulation primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: &'static str },

    /// Adaptive quadrature ran out of subdivisions.
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {panels} panels")]
    Convergence { estimate: f64, error: f64, panels: usize },

    /// A least-squares fit hit its iteration budget.
    #[error("fit did not converge after {iterations} iterations (rms residual {rms:e})")]
    Fit { iterations: usize, rms: f64, best: alloc::vec::Vec<(f64, f64, f64)> },

    /// The conditioning event of a rejection sampler is too rare.
    #[error("conditioning event too rare: estimated acceptance {acceptance:e}")]
    Feasibility { acceptance: f64 },

    /// More inputs than the exact enumeration supports.
    #[error("size {size} exceeds the supported maximum {max}")]
    Size { size: usize, max: usize },

    /// The channel gain is zero, so detection is undefined.
    #[error("degenerate channel: zero gain")]
    DegenerateChannel,

    /// A context is not set up for the requested decoding stage.
    #[error("configuration error: {0}")]
    Configuration(&'static str),

    /// A named intermediate of a closed form came out non-finite.
    #[error("closed form term {term} is not finite")]
    Evaluation { term: &'static str },

    /// A composed probability fell outside [0, 1].
    #[error("probability {value} outside [0, 1] in {op}")]
    Numeric { op: &'static str, value: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

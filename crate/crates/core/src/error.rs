use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scattering length evaluated at the resonance pole B = {0} G")]
    PoleEvaluation(f64),

    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("catalog is empty")]
    EmptyCatalog,

    #[error("no catalog entry labelled {label} ({provenance})")]
    UnknownLabel { label: String, provenance: String },

    #[error("ramp from {start} G to {stop} G does not cross the pole at {pole} G with margin {margin} G")]
    RampDoesNotCross {
        start: f64,
        stop: f64,
        pole: f64,
        margin: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(
        "fit did not converge after {iterations} iterations (gradient norm {gradient_norm:e})"
    )]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("ambiguous dip assignment: chi2 {best} vs {runner_up}")]
    AmbiguousAssignment { best: f64, runner_up: f64 },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

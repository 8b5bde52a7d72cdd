use thiserror::Error;

/// Errors raised by model evaluation and the diagnostic modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("point {point:?} lies outside the {chart} domain")]
    Domain { chart: &'static str, point: Vec<f64> },

    #[error("non-finite value produced at step {step}")]
    Numeric { step: usize },

    #[error("derivative overflow at step {step}: distance {distance:e} to the singular set is below the floor")]
    DerivativeOverflow { step: usize, distance: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("resource cap exceeded: {what} requires {requested}, cap is {cap}")]
    Resource {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("no inverse branch at step {step}: {reason}")]
    NoSuchBranch { step: usize, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("trajectory left the modelled charts at time {time}")]
    OutOfChart { time: f64 },

    #[error("region is not trapping: {0}")]
    NonTrapping(String),

    #[error("singular-set saturation: {unusable} of {total} test points unusable")]
    Saturation { unusable: usize, total: usize },

    #[error("operation not supported: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn contract(msg: impl Into<String>) -> LabError {
    LabError::Contract(msg.into())
}

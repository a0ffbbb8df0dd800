use thiserror::Error;

/// Errors raised by the ternary forecast toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value {value} in {what}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("negative probability {value} in component {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, not 1")]
    NotNormalised { sum: f64 },

    #[error("cdf values are not monotone: F(x_B) = {at_below} > F(x_A) = {at_above}")]
    NonMonotoneCdf { at_below: f64, at_above: f64 },

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("L'L is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("scoring rule induces a degenerate triangle (sin phi = {sin_phi:e})")]
    DegenerateTriangle { sin_phi: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid decomposition: uncertainty {uncertainty} < resolution {resolution}")]
    InvalidDecomposition { uncertainty: f64, resolution: f64 },

    #[error("degenerate climatology: {0}")]
    DegenerateClimatology(String),

    #[error("forecast cannot be inverted to Gaussian parameters: {0}")]
    NotInvertible(String),

    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("quantile argument {0} outside (0, 1)")]
    QuantileOutOfRange(f64),

    #[error("colour channel {channel} = {value} outside [0, 1]")]
    ChannelOutOfRange { channel: &'static str, value: f64 },

    #[error("invalid palette: {0}")]
    InvalidPalette(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("schema error at {location}: {reason}")]
    Schema { location: String, reason: String },

    #[error("record at {location} supplies both ternary and Gaussian fields")]
    MixedRepresentation { location: String },

    #[error("ensemble record at {location} has no climatology series")]
    MissingClimatologySeries { location: String },

    #[error("skill circles requested but no verification history was supplied")]
    MissingVerificationHistory,
}

impl Error {
    /// True for errors caused by malformed input files rather than numerics.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Error::Schema { .. } | Error::MixedRepresentation { .. } | Error::MissingClimatologySeries { .. }
        )
    }

    pub(crate) fn schema(location: impl Into<String>, reason: impl ToString) -> Self {
        Error::Schema {
            location: location.into(),
            reason: reason.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

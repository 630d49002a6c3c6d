//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("zero-power input: {0}")]
    ZeroPower(&'static str),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("feature `{feature}` is undefined on segment {segment} (degenerate input)")]
    DegenerateSegment {
        feature: &'static str,
        segment: usize,
    },

    #[error("standardizer must be frozen before use")]
    UnfrozenStandardizer,

    #[error("standardizer cannot freeze: {0}")]
    StandardizerFreeze(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("synchronization failed: cross-correlation is identically zero")]
    DegenerateSync,

    #[error("filter pair is not a near-orthogonal Hilbert pair (|<p,pb>| ratio {0:.3e})")]
    NonOrthogonalPair(f64),

    #[error("deformed filter pair has zero energy")]
    ZeroEnergyPair,

    #[error("training aborted: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
}

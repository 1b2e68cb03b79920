use alloc::string::String;

use crate::lp::LpStatus;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("reference revenue must be positive, got {0}")]
    ZeroReference(f64),
    #[error("enumeration is limited to {limit} bids, instance has {bids}")]
    SizeGuard { bids: usize, limit: usize },
    #[error("generation exhausted after {attempts} attempts ({accepted} of {requested} bids)")]
    GenerationExhausted {
        attempts: usize,
        accepted: usize,
        requested: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("LP relaxation ended with status {0:?}")]
    Lp(LpStatus),
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("model format: {0}")]
    Model(String),
}

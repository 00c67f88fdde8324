//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("latent parameters do not match model variant: {0}")]
    VariantMismatch(String),

    #[error("graph has too few edges for rewiring dynamics ({edges} < 2)")]
    InfeasibleRewire { edges: usize },

    #[error("rewire preconditions violated: {0}")]
    RewireInvalid(String),

    #[error("could not sample a connected graph after {attempts} attempts")]
    GraphSampling { attempts: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite log-joint at event {event}")]
    PoisonedLogJoint { event: usize },

    #[error("non-finite gradient (tape node {node})")]
    NonFiniteGradient { node: usize },

    #[error("non-finite ELBO sample at epoch {epoch}")]
    SviDiverged { epoch: usize },

    #[error("non-finite gradient passed to optimizer at coordinate {coord}")]
    NonFiniteGrad { coord: usize },

    #[error("HMC acceptance rate {rate:.4} below 1% after burn-in; retune step size")]
    HmcTuning { rate: f64 },

    #[error("{0}")]
    Invalid(String),

    #[error("wall-clock limit exceeded")]
    Timeout,

    #[error("trajectory file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

/// Errors raised across the graph, oracle, spectral and exploration layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid tree address: {0}")]
    InvalidAddress(String),

    #[error("invalid vertex: {0}")]
    InvalidVertex(String),

    #[error("operation undefined for an isolated vertex")]
    IsolatedVertex,

    #[error("rejection budget exhausted after {attempts} attempts")]
    SamplingBudgetExhausted { attempts: u64 },

    #[error("eigensolver did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },

    #[error("lambda = {lambda} is not above the tree spectrum")]
    InsideSpectrum { lambda: f64 },

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("certification failed after {attempts} attempts: {reason}")]
    CertificationFailed { attempts: u64, reason: String },

    #[error("label space of {label_bits} bits cannot hold {required} vertices")]
    LabelSpaceTooSmall { label_bits: u32, required: u128 },

    #[error("label {label} outside the {label_bits}-bit label space")]
    LabelOutOfRange { label: u64, label_bits: u32 },

    #[error("query budget exhausted ({limit} queries)")]
    BudgetExhausted { limit: u64 },

    #[error("reveal() called from inside an exploration strategy")]
    RevealInExploration,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid guiding spec: {0}")]
    InvalidGuidingSpec(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

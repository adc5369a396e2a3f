use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("entry {index} is not strictly positive ({value})")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("at least {min} components are required, got {got}")]
    DimensionTooSmall { min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exp overflow while mapping log-ratio vector back to the simplex")]
    Overflow,

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("not a valid composition: {0}")]
    InvalidComposition(String),

    #[error("all multinomial counts are zero")]
    AllZeroCounts,

    #[error("matrix is not positive definite, even after jitter")]
    NotPositiveDefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("records disagree on the number of criteria: record `{id}` has {got}, expected {expected}")]
    MixedCriteriaCount { id: String, expected: usize, got: usize },

    #[error("no preference records supplied")]
    EmptyInput,

    #[error("invalid preference record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("pairwise comparison entry ({row}, {col}) is not positive")]
    NonPositivePcmEntry { row: usize, col: usize },

    #[error("pairwise comparison matrix is not reciprocal at ({row}, {col})")]
    NonReciprocal { row: usize, col: usize },

    #[error("at least two rows are required to estimate correlations, got {0}")]
    TooFewRows(usize),

    #[error("{clusters} clusters requested for {items} items")]
    TooManyClusters { clusters: usize, items: usize },

    #[error("relabeling supports at most 6 clusters, got {0}")]
    ClusterCountTooLarge(usize),

    #[error("log-posterior is not finite at the initial point")]
    NonFiniteStart,

    #[error("chain {chain} rejected every proposal during warmup")]
    AllProposalsRejected { chain: usize },

    #[error("at least two chains are required")]
    SingleChain,

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("BWM vectors are not fully consistent")]
    InconsistentInput,

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("time selection produced no columns")]
    EmptySelection,

    #[error("feeder {0} has no meters with observed data")]
    FeederWithoutMeters(String),

    #[error("class {0} has no samples")]
    EmptyClass(String),

    #[error("training rows have unequal widths")]
    RaggedRows,

    #[error("empty input")]
    EmptyInput,

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("feature row width {got} does not match training width {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("switch state {0:?} is not in the admissible catalog")]
    InadmissibleState(Vec<u8>),

    #[error("series pair ({a}, {b}) has overlap {overlap}, below the minimum {required}")]
    InsufficientOverlap {
        a: String,
        b: String,
        overlap: usize,
        required: usize,
    },

    #[error("correlation undefined: series {0} is constant on the joint overlap")]
    UndefinedCorrelation(String),

    #[error("distance matrix holds {count} invalid pair(s); fill or recompute before use")]
    InvalidPairs { count: usize },

    #[error("power flow did not converge after {iterations} iterations (worst node {node}, residual {residual:.3e} pu)")]
    PowerFlowDiverged {
        node: String,
        iterations: usize,
        residual: f64,
    },

    #[error("topology is not radial: {0}")]
    NotRadial(String),

    #[error("cluster count {k} exceeds meter count {n}")]
    TooManyClusters { k: usize, n: usize },

    #[error("need at least {required} meters, got {got}")]
    TooFewMeters { required: usize, got: usize },

    #[error("k = {k} exceeds the number of usable known meters ({known})")]
    KTooLarge { k: usize, known: usize },

    #[error("no unknown meters to assign")]
    NoUnknownMeters,

    #[error("meter sets differ: {0}")]
    MeterSetMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("TOML parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

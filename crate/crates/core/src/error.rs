use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid predictor spec: field `{field}`: {message}")]
    InvalidSpec { field: &'static str, message: String },

    #[error("predictor needs {needed} more observation(s) before it can predict")]
    NotWarmedUp { needed: usize },

    #[error("non-finite input value {value}")]
    NonFiniteInput { value: f64 },

    #[error("error margin must be finite and strictly positive, got {value}")]
    InvalidMargin { value: f64 },

    #[error("series must contain at least one value")]
    EmptySeries,

    #[error("fit window is constant within machine noise")]
    DegenerateWindow,

    #[error("fit window holds {len} value(s) but p={p}, q={q} needs at least {min}")]
    WindowTooShort { len: usize, p: usize, q: usize, min: usize },

    #[error("sink received no message while its predictor still needs {needed} warm-up value(s)")]
    ProtocolDesync { needed: usize },

    #[error("node {node_id} appears in more than one cluster")]
    DuplicateMember { node_id: u32 },

    #[error("duplicate position entry for node {node_id}")]
    DuplicatePosition { node_id: u32 },

    #[error("cluster head {head} is not listed among its own members")]
    HeadNotMember { head: u32 },

    #[error("cluster plan does not cover node {node_id}")]
    UncoveredNode { node_id: u32 },

    #[error("cluster has no members")]
    EmptyCluster,

    #[error("k must be between 1 and the node count ({n}), got {k}")]
    InvalidK { k: usize, n: usize },

    #[error("no node positions supplied")]
    NoPositions,

    #[error("no trace supplied for cluster member {node_id}")]
    MissingTrace { node_id: u32 },

    #[error("trace length mismatch: node {node_id} has {len}, expected {expected}")]
    TraceLengthMismatch { node_id: u32, len: usize, expected: usize },

    #[error("aggregate input is empty")]
    EmptyAggregate,

    #[error("series length mismatch: node {node_id} has {len}, expected {expected}")]
    SeriesLengthMismatch { node_id: u32, len: usize, expected: usize },

    #[error("invalid synthetic series parameter `{field}`: {message}")]
    InvalidSynth { field: &'static str, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("config field `{field}`: {message}")]
    ConfigField { field: &'static str, message: String },

    #[error("unknown scenario `{0}` (expected Fig5, Fig6_7, Fig9 or Aggregation97)")]
    UnknownScenario(String),

    #[error("node {node_id} not present in the dataset")]
    MissingNode { node_id: u32 },

    #[error("no position for node {node_id}")]
    MissingPosition { node_id: u32 },

    #[error("node {node_id} has only {len} reading(s), slice needs {needed}")]
    SliceOutOfRange { node_id: u32, len: usize, needed: usize },

    #[error("sweep produced no rows")]
    EmptyResult,

    #[error("unreadable sweep CSV at line {line}: {message}")]
    CsvFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by a bad configuration or invalid request
    /// (as opposed to problems with the data being processed).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec { .. }
                | Error::InvalidMargin { .. }
                | Error::InvalidK { .. }
                | Error::InvalidSynth { .. }
                | Error::Config(_)
                | Error::ConfigField { .. }
                | Error::UnknownScenario(_)
                | Error::DuplicateMember { .. }
                | Error::HeadNotMember { .. }
                | Error::UncoveredNode { .. }
                | Error::EmptyCluster
        )
    }
}

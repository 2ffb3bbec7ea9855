use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {index}: mass must be positive, got {mass}")]
    NonPositiveMass { index: usize, mass: f64 },

    #[error("cell {index}: tau must lie in (0, 1], got {tau}")]
    TauOutOfRange { index: usize, tau: f64 },

    #[error("cells {first} and {second} share tau {tau}")]
    DuplicateTau { first: usize, second: usize, tau: f64 },

    #[error("empty partition")]
    EmptyPartition,

    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("cell id {id} out of range for a partition of {len} cells")]
    CellOutOfRange { id: usize, len: usize },

    #[error("objects live on different partitions")]
    PartitionMismatch,

    #[error("kernel order {0} unsupported (maximum is 4)")]
    OrderTooLarge(usize),

    #[error("entry order mismatch: expected {expected}, found {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("contraction indices invalid: p={p}, q={q}, r={r}, l={l}")]
    ContractionRange { p: usize, q: usize, r: usize, l: usize },

    #[error("cannot evaluate an order-{order} integral on {reason}")]
    UnsupportedIntegral { order: usize, reason: &'static str },

    #[error("unsupported orders for this operation: p={p}, q={q}")]
    UnsupportedOrders { p: usize, q: usize },

    #[error("operation requires the {expected} law")]
    LawMismatch { expected: &'static str },

    #[error("sample stream mismatch: {0}")]
    StreamMismatch(&'static str),

    #[error("integrand is not adapted: coefficient of cell {cell} depends on cell {depends_on}")]
    NotAdapted { cell: usize, depends_on: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("numerical guard tripped: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Process exit status: 1 for unreadable or unparsable configuration, 3
    /// for a tripped numerical guard, 2 for any other violated precondition.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } | Error::Json { .. } => 1,
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

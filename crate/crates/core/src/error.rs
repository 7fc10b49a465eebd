use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("truncated record at byte offset {offset}: got {len} of {expected} bytes")]
    TruncatedRecord {
        offset: u64,
        len: usize,
        expected: usize,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: binary payload of {len} bytes is not a multiple of the {record_size}-byte record size", path.display())]
    PayloadLength {
        path: PathBuf,
        len: u64,
        record_size: usize,
    },

    #[error("{}:{line}: not an epoch value: {content:?}", path.display())]
    TextLine {
        path: PathBuf,
        line: usize,
        content: String,
    },

    #[error("{}:{line}: {message}", path.display())]
    Table {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("file name {0:?} does not match wc_day<D>_<P>")]
    TraceFileName(String),

    #[error("day {day} exceeds the {total_days}-day range")]
    DayOutOfRange { day: u32, total_days: u32 },

    #[error("series is empty")]
    EmptySeries,

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid normalization parameters: {0}")]
    NormalizationParams(String),

    #[error("maximum delay {max_delay} must be smaller than the series length {len}")]
    DelayTooLarge { max_delay: usize, len: usize },

    #[error("unknown exogenous column {0:?}")]
    UnknownColumn(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation is undefined for a constant sequence")]
    UndefinedCorrelation,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at pass {pass}, row {row}")]
    Divergence { pass: usize, row: usize },

    #[error("malformed model document: {0}")]
    Model(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

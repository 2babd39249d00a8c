use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure modes of the
/// pipeline stages so callers can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("malformed file {path}: {reason} (line {line})")]
    MalformedFile {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid probability p={0}, must lie in (0,1)")]
    InvalidProbability(f64),
    #[error("invalid l_p={0}: must be an odd integer >= 1")]
    InvalidLp(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("video too short: T={t} < N={n}")]
    TooShort { t: usize, n: usize },
    #[error("invalid N={0}: must be >= 2")]
    InvalidN(usize),
    #[error("zero variance distribution")]
    ZeroVariance,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("target sequence too long: {len} > max {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("unknown normalization scheme: {0}")]
    UnknownScheme(String),
    #[error("malformed manifest {path}: row {row}: {reason}")]
    MalformedManifest {
        path: String,
        row: usize,
        reason: String,
    },
    #[error("empty sequence passed to {0}")]
    EmptySequence(&'static str),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

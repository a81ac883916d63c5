use thiserror::Error;

/// Unified error type for the engine.
///
/// Variants are grouped by who is at fault: [`Error::InvalidParameter`] means
/// the caller asked for something nonsensical (maps to a usage error in the
/// CLI), the data-shaped variants mean the input files or the remote source are
/// broken, and [`Error::Internal`] flags bugs or impossible states.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Underlying I/O failure while reading fixtures, configs, or outputs.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A fixture or config line could not be parsed.
    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// A block inside the requested range is absent from the source.
    #[error("missing block {0}")]
    MissingBlock(u64),

    /// A log claimed to be a token transfer but does not decode as one.
    #[error("malformed Transfer log: {0}")]
    MalformedTransferLog(String),

    /// No exchange-rate entry exists at or before the requested timestamp.
    #[error("no price available at timestamp {0}")]
    NoPrice(u64),

    /// Snapshot-level integrity violation (gaps, dangling references, bounds).
    #[error("data error: {0}")]
    Data(String),

    /// Transport or protocol failure in a remote data source.
    #[error("data source error: {0}")]
    Source(String),

    /// A bug: an invariant the engine itself guarantees did not hold.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    ///
    /// `0` success (not represented here), `1` usage, `2` bad data, `3` bug.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) => 1,
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration length {got} does not match landscape size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error(
        "N = {n} exceeds the enumeration cap of {cap}; raise the cap explicitly \
         (e.g. `with_cap({n})`) if exhaustive enumeration of 2^{n} configurations is intended"
    )]
    EnumerationCap { n: usize, cap: usize },

    #[error("cell state {state} outside the rule alphabet of size {alphabet}")]
    AlphabetMismatch { state: u8, alphabet: u8 },

    #[error("coordination mode {0} requires a headquarters")]
    MissingHeadquarters(&'static str),

    #[error("growth schedule violation: {0}")]
    Schedule(String),

    #[error("malformed landscape dump at line {line}: {reason}")]
    Dump { line: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status: 3 for I/O failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}

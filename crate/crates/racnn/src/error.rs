use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible dimensions between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A row index outside the addressable range.
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    /// The same destination row named twice in a scatter.
    #[error("duplicate index {0} in scatter")]
    DuplicateIndex(usize),

    /// A value that is syntactically valid but outside the accepted domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// NaN or infinity where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Malformed input file (IDX dataset or model record payload).
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Model file does not start with the `RACN` magic.
    #[error("bad magic: expected \"RACN\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    /// Model file written by an incompatible format version.
    #[error("unsupported model version {found} (expected {expected})")]
    BadVersion { expected: u32, found: u32 },

    /// Stored checksum does not match the file contents.
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    /// A structural invariant (e.g. hollow kernel center) does not hold.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

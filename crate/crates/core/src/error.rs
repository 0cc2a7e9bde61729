use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures reading one of the binary containers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("truncated input: needed {needed} bytes, had {available}")]
    Truncated { needed: usize, available: usize },
    #[error("malformed payload: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("noise budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("missing Galois key for rotation step {step} (galois element {element})")]
    MissingGaloisKey { step: usize, element: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("non-finite value in layer {layer} ({stage})")]
    NonFinite { layer: usize, stage: &'static str },
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps an error with the name of the protocol stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit status for this error; every class has its own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) => 10,
            Error::Config(_) => 11,
            Error::BudgetExhausted(_) => 12,
            Error::MissingGaloisKey { .. } => 13,
            Error::Numerical(_) => 14,
            Error::NonFinite { .. } => 15,
            Error::Diverged { .. } => 16,
            Error::Wire(w) => match w {
                WireError::BadMagic { .. } => 20,
                WireError::UnsupportedVersion(_) => 21,
                WireError::ChecksumMismatch { .. } => 22,
                WireError::Truncated { .. } => 23,
                WireError::Malformed(_) => 24,
            },
            Error::Io(_) => 30,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

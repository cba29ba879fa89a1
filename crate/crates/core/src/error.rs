use alloc::string::String;

/// Errors raised by the demixing toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
    #[error("zero dictionary column {0}")]
    ZeroDictionaryColumn(usize),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
}

impl Error {
    /// Whether the error comes from the numerics rather than from the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;

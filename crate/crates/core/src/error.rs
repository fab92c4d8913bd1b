use alloc::string::String;
use core::fmt;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor or matrix dimensions do not line up.
    Shape(String),
    /// A graph or TVG violates its structural invariants.
    InvalidGraph(String),
    /// A configuration value is out of range.
    InvalidConfig(String),
    /// A caller broke an operation's precondition.
    Contract(String),
    /// The input lacks information the operation needs (e.g. node types).
    Unsupported(String),
    /// The instance cannot be used and should be regenerated.
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape mismatch: {m}"),
            Error::InvalidGraph(m) => write!(f, "invalid graph: {m}"),
            Error::InvalidConfig(m) => write!(f, "invalid config: {m}"),
            Error::Contract(m) => write!(f, "contract violation: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported input: {m}"),
            Error::Degenerate(m) => write!(f, "degenerate instance: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}
pub(crate) use shape_err;

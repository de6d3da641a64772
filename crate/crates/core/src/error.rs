use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shapes of two operands disagree, or a shape violates a size constraint.
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("config error: {0}")]
    Config(String),
    /// A value lies outside the domain an operation accepts (e.g. non-binary bit-planes).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged at step {step}: non-finite {what}")]
    Divergence { step: u64, what: &'static str },
}

macro_rules! dim_err {
    ($($arg:tt)*) => { $crate::error::Error::Dimension(alloc::format!($($arg)*)) };
}
macro_rules! cfg_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}
pub(crate) use cfg_err;
pub(crate) use dim_err;

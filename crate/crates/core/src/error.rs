use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A value violated a domain invariant (non-finite data, negative distance, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A parameter was outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Coordinates became non-finite during optimisation.
    #[error("optimisation diverged at iteration {iteration} (max |gradient| = {max_gradient:e})")]
    Diverged { iteration: usize, max_gradient: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid_arg {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}

macro_rules! invalid_input {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}

pub(crate) use invalid_arg;
pub(crate) use invalid_input;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GhrError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("shift {j} out of range 1..={n}")]
    ShiftOutOfRange { j: usize, n: usize },

    #[error("n = {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("n = {0} is not a power of four (n > 1 with even log n is required)")]
    NotPowerOfFour(usize),

    #[error("answer has {got} entries, expected {expected}")]
    AnswerLength { got: usize, expected: usize },

    #[error("invalid bit string: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty rectangle")]
    EmptyRectangle,

    #[error("distance set has zero mass under the uniform distribution")]
    ZeroUniformMass,
}

pub type Result<T> = std::result::Result<T, GhrError>;

pub(crate) fn invalid(msg: impl Into<String>) -> GhrError {
    GhrError::InvalidParameter(msg.into())
}

use thiserror::Error;

use crate::digits::Alphabet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("digit {digit} out of range for alphabet of size {size}")]
    DigitOutOfRange { digit: u32, size: u32 },

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: Alphabet, right: Alphabet },

    #[error("residue has support at or above level {level}")]
    NonCanonicalResidue { level: i64 },

    #[error("factor count mismatch: expected {expected}, got {got}")]
    FactorCount { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("depth too small: need at least {needed}, got {got}")]
    DepthTooSmall { needed: u32, got: u32 },

    #[error("window too deep: span {span} exceeds {limit}")]
    WindowTooDeep { span: i64, limit: i64 },

    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_same(left: Alphabet, right: Alphabet) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::AlphabetMismatch { left, right })
    }
}

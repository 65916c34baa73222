use num_rational::BigRational;
use thiserror::Error;

use crate::strassen::Cover;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {0} lies outside the open unit interval")]
    OutOfDomain(f64),

    #[error("cyclic shift by {shift} is undefined at {point}")]
    UndefinedPoint { shift: f64, point: f64 },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("chain of masks is not nested at position {0}")]
    NotNested(usize),

    #[error("support admits no full coupling; obstruction cover has cost {}", .0.cost)]
    DeficientSupport(Cover),

    #[error("frequency profile does not factorize (residual {0})")]
    FactorizationFailure(BigRational),

    #[error("coupling charges cell ({row}, {col}) outside the support mask")]
    UnsupportedCoupling { row: usize, col: usize },

    #[error("insufficient density in conditioning cell {cell:?}; obstruction cover has cost {}", .cover.cost)]
    InsufficientDensity { cell: Vec<usize>, cover: Cover },

    #[error("replica {replica} ran out of enumeration points")]
    DepthExhausted { replica: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("contingency table too sparse: expected count {expected:.3} in cell ({row}, {col})")]
    SparseTable { row: usize, col: usize, expected: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown token at position {pos}: {token:?}")]
    UnknownToken { pos: usize, token: String },
    #[error("invalid generator name {0:?}")]
    InvalidGenerator(String),
    #[error("missing coordinate for generator {0}")]
    MissingCoordinate(String),
    #[error("max-min form too large: {size} functionals exceeds cap {cap}")]
    MaxMinCap { size: usize, cap: usize },
    #[error("degenerate hyperplane with zero normal")]
    ZeroNormal,
    #[error("cell count exceeds cap {0}")]
    CellCap(usize),
    #[error("variable count {count} exceeds pattern cap {cap}")]
    PatternCap { count: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid admissibility space: {0}")]
    InvalidSpace(String),
    #[error("rational mode supports at most {max} generators, got {got}")]
    RationalDimension { got: usize, max: usize },
    #[error("linear program {0}")]
    Lp(String),
    #[error("evaluator is not positively homogeneous of degree {degree}: {detail}")]
    NotHomogeneous { degree: u32, detail: String },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("invalid homomorphism: {0}")]
    InvalidHom(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

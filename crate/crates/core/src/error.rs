use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("residue {value} lies outside [0, {modulus})")]
    ResidueOutOfRange { value: usize, modulus: usize },
    #[error("point ({k}, {m}) lies outside [0, {modulus})^2")]
    PointOutOfRange { k: usize, m: usize, modulus: usize },
    #[error("point ({k}, {m}) lies outside the box")]
    OutsideBox { k: usize, m: usize },
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: usize, right: usize },
    #[error("arity mismatch")]
    ArityMismatch,
    #[error("value count {got} does not cover the {expected} points of the domain")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("value at index {index} has modulus {magnitude}, outside the allowed disk")]
    OutsideDisk { index: usize, magnitude: f64 },
    #[error("box axis is empty")]
    EmptyAxis,
    #[error("box is not square: {width} x {height}")]
    NotSquare { width: usize, height: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("numerical inconsistency: {0}")]
    Numerical(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

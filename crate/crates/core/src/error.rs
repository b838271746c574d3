use thiserror::Error;

use crate::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which multiplier of the reduction a failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierKind {
    M,
    W,
}

impl std::fmt::Display for MultiplierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MultiplierKind::M => f.write_str("m"),
            MultiplierKind::W => f.write_str("w"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficients are not elliptic at ({}, {}): {detail}", point.x, point.y)]
    NonElliptic { point: Point, detail: String },

    #[error("declared {name} = {declared} is below the estimate {estimate}")]
    MisdeclaredConstant {
        name: &'static str,
        declared: f64,
        estimate: f64,
    },

    #[error("linear solve failed (relative residual {relative_residual:e}): {detail}")]
    SolverFailure { relative_residual: f64, detail: String },

    #[error("fixed-point iteration does not contract (last update ratio {ratio})")]
    NoContraction { ratio: f64, history: Vec<f64> },

    #[error("fixed-point iteration did not reach tolerance in {iterations} iterations")]
    NotConverged { iterations: usize, history: Vec<f64> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("multiplier {which}: bounds violated after {halvings} halvings (best sup|z| = {best_sup_z})")]
    RadiusExhausted {
        which: MultiplierKind,
        halvings: usize,
        best_sup_z: f64,
    },

    #[error("invalid multiplier: values in [{min}, {max}] leave the admissible range")]
    InvalidMultiplier { min: f64, max: f64 },

    #[error("ellipticity bound violated at ({}, {}): eigenvalue {eigenvalue} < {bound}", point.x, point.y)]
    EllipticityViolation { point: Point, eigenvalue: f64, bound: f64 },

    #[error("target field is not curl-free: relative defect {defect}")]
    NotCurlFree { defect: f64 },

    #[error("similarity factor failed: divided residual {divided} exceeds 10x input residual {input}")]
    SimilarityFailure { divided: f64, input: f64 },

    #[error("raster parse error at line {line}: {message}")]
    Raster { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

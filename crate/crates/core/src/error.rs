use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("degree overflow: {left} + {right} exceeds 6")]
    DegreeOverflow { left: usize, right: usize },

    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("blade index {0} outside 1..=6")]
    BadIndex(usize),

    #[error("repeated or unordered blade indices {0:?}")]
    BadBlade(Vec<usize>),

    #[error("symplectic form is degenerate")]
    DegenerateSymplectic,

    #[error("form is not stable of negative type (lambda = {lambda})")]
    NotStableNegative { lambda: String },

    #[error("cone starvation: only {accepted} of {drawn} samples landed in the cone (need 10%)")]
    ConeStarvation { accepted: usize, drawn: usize },

    #[error("reference volume form vanishes at node {node:?}")]
    DegenerateVolume { node: Vec<usize> },

    #[error("function is not strictly convex at {point:?}")]
    NotConvex { point: Vec<f64> },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("consistency check failed: {0}")]
    Inconsistent(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

use thiserror::Error;

/// Errors raised by the laboratory's modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid patch layout: {0}")]
    Layout(String),

    #[error("mesh resolution: h = {h} exceeds half the smallest patch radius ({r_min}); pass the override flag to accept an under-resolved mesh")]
    Resolution { h: f64, r_min: f64 },

    #[error("mesh would have {nodes} nodes, above the configured cap of {cap}")]
    NodeCap { nodes: usize, cap: usize },

    #[error("coefficient matrix: {0}")]
    Coefficient(String),

    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,

    #[error("finite-difference step {step} must be below a quarter of the distance {distance}")]
    StepTooLarge { step: f64, distance: f64 },

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("density: {0}")]
    Density(String),

    #[error("outer-sphere flux identity violated (max relative mismatch {mismatch:.3e}); the auxiliary series must match the kernel gradient series")]
    UnmatchedSeries { mismatch: f64 },

    #[error("problem data: {0}")]
    Problem(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error("expression `{expr}`: {msg}")]
    Expression { expr: String, msg: String },

    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

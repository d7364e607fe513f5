use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid too small on axis {axis}: {n} points, stencil needs {needed}")]
    GridTooSmall { axis: usize, n: usize, needed: usize },
    #[error("unsupported scheme order {0} (expected 2 or 4)")]
    UnsupportedScheme(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("defective pencil: {0}")]
    DefectivePencil(String),
    #[error("no eigenvalues inside the requested band")]
    EmptyBand,
    #[error("spectral parameter {0} is not in the family")]
    NotInFamily(C64),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("form is not closed: residual {residual:e}")]
    NotClosed { residual: f64 },
    #[error("no solution within tolerance: residual {residual:e}")]
    NoSolution { residual: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("kernel Omega_x is singular at x = {x}")]
    SingularOmega { x: f64 },
    #[error("inversion in {step} is ill-conditioned (condition {cond:e})")]
    IllConditioned { step: String, cond: f64 },
    #[error("leading minor of 1 + Phi is singular at k = {k}")]
    SingularMinor { k: usize },
    #[error("dressing seed has a node near x = {x}{}", stage_suffix(*.stage))]
    SeedNode { stage: Option<usize>, x: f64 },
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
    #[error("family commutator too large: {0:e}")]
    NonCommuting(f64),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn stage_suffix(stage: Option<usize>) -> String {
    match stage {
        Some(s) => format!(" (stage {s})"),
        None => String::new(),
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("quadrature needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("interval [{lo}, {hi}] must be symmetric about 0")]
    NotSymmetric { lo: f64, hi: f64 },
    #[error("measure parameter out of range: {0}")]
    InvalidMeasure(String),
    #[error("degenerate basis: norm of degree-{degree} direction is {norm:e}")]
    DegenerateBasis { degree: usize, norm: f64 },
    #[error("rank deficient fit: {distinct} distinct abscissae for degree {degree}")]
    RankDeficient { distinct: usize, degree: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
}

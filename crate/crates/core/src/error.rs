use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FmdError {
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("negative moduli K={k}, G={g}")]
    NegativeModuli { k: f64, g: f64 },
    #[error("degenerate moduli: K + G = 0")]
    DegenerateModuli,
    #[error("Hooke tensor outside the cone of {0}")]
    ConeViolation(String),
    #[error("zero stress has no optimal Hooke tensor")]
    DegenerateStress,
    #[error("zero strain has no optimal Hooke tensor")]
    DegenerateStrain,
    #[error("setting {0} is not supported by this operation")]
    UnsupportedSetting(String),
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error("unbalanced load: resultant ({rx:.3e}, {ry:.3e}), moment {moment:.3e}")]
    UnbalancedLoad { rx: f64, ry: f64, moment: f64 },
    #[error("point ({x}, {y}) lies outside the grid")]
    PointOutsideGrid { x: f64, y: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),
    #[error("solution not certified: relative gap {gap:.3e} exceeds {limit:.1e}")]
    UncertifiedInput { gap: f64, limit: f64 },
    #[error("certificate failure: expected {expected:.12e}, got {actual:.12e}")]
    CertificateFailure { expected: f64, actual: f64 },
    #[error("mass mismatch: {plus:.12e} vs {minus:.12e}")]
    MassMismatch { plus: f64, minus: f64 },
    #[error("transport cost is zero")]
    DegenerateTransport,
    #[error("domain polygon is not convex")]
    NonConvexDomain,
    #[error("atom {index} lies outside the declared domain")]
    AtomOutsideDomain { index: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
}

pub type Result<T> = std::result::Result<T, FmdError>;

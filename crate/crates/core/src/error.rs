use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signature mismatch: expected {expected}, found {found}")]
    SignatureMismatch { expected: String, found: String },

    #[error("invalid algebra descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("element is not in the compact real form (anti-Hermitian defect {defect:.3e})")]
    NotAntiHermitian { defect: f64 },

    #[error("group element is numerically singular (condition number {condition:.3e})")]
    SingularGroupElement { condition: f64 },

    #[error("coadjoint action requires a unitary element (defect {defect:.3e})")]
    NonUnitary { defect: f64 },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("function `{0}` is not strictly convex")]
    NotStrictlyConvex(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("target lies outside the gradient image (residual {residual:.3e}, |alpha| {norm:.3e})")]
    OutsideGradientImage { residual: f64, norm: f64 },

    #[error("vector is not tangent at the base point (defect {defect:.3e})")]
    NotTangent { defect: f64 },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("point is not critical (residual {residual:.3e} > {tol:.1e})")]
    NotCritical { residual: f64, tol: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("stabilizer is empty at this point")]
    EmptyStabilizer,

    #[error("surjectivity condition fails: projected Jacobian is rank deficient (smallest singular value {min_singular:.3e})")]
    RankDeficient { min_singular: f64 },

    #[error("maximal stabilizer condition fails: {0}")]
    MaximalStabilizer(String),

    #[error("no stabilizer correction found within {budget} iterations (residual {residual:.3e})")]
    CorrectionNotFound { budget: usize, residual: f64 },

    #[error("trace too short: {0} samples (need at least 3)")]
    TraceTooShort(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

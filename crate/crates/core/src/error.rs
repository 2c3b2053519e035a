use thiserror::Error;

/// Errors surfaced by measure, body and check operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tilt parameter lies outside the log-Laplace finiteness domain")]
    TiltOutsideDomain,
    #[error("degenerate spec: {0}")]
    DegenerateSpec(String),
    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,
    #[error("subspace basis is not orthonormal (deviation {0:.3e})")]
    NonOrthonormalBasis(f64),
    #[error("operation unsupported for this measure variant: {0}")]
    UnsupportedVariant(&'static str),
    #[error("body exposes no support oracle")]
    NoSupportOracle,
    #[error("body exposes no radial oracle")]
    NoRadialOracle,
    #[error("polar body requires the origin in the interior")]
    OriginNotInterior,
    #[error("p-th moment is not finite")]
    InfiniteMoment,
    #[error("support function is not differentiable at this direction")]
    NonSmoothAtDirection,
    #[error("evaluation point outside the log-Laplace finiteness domain")]
    OutsideDomain,
    #[error("root bracket expansion exhausted along a ray (level {level}, reached t = {reached:.3e})")]
    RootBracketFailure { level: f64, reached: f64 },
    #[error("point set is degenerate (affine hull below full dimension)")]
    DegenerateHull,
    #[error("dimension {0} exceeds the exact-volume cap ({1})")]
    DimTooLarge(usize, usize),
    #[error("measure is not isotropic (covariance deviates from identity by {0:.3e})")]
    NotIsotropic(f64),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("envelope config rejected: {0}")]
    EnvelopeConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

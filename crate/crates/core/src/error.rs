use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("velocity must be nonzero")]
    ZeroVelocity,
    #[error("point ({0}, {1}) lies outside the closed domain")]
    OutsideDomain(f64, f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("collision frequency depends on position; the explicit semigroup needs Σ = Σ(v)")]
    NonHomogeneousSigma,
    #[error("trace tag mismatch: {0}")]
    TagMismatch(String),
    #[error("λ is numerically singular: ess-inf |1 - m_λ²| = {margin:e} ≤ {threshold:e}")]
    NearSingular { margin: f64, threshold: f64 },
    #[error("grazing chord: τ = {tau:e} below floor {floor:e}")]
    GrazingChord { tau: f64, floor: f64 },
    #[error("empty spectral cloud")]
    EmptyCloud,
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("kernel support must satisfy 0 < a ≤ b, got a = {0}")]
    BadSupport(f64),
}

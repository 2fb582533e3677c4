use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient jet order: need {needed}, have {have}")]
    InsufficientOrder { needed: usize, have: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular covariance: det {det:e} <= threshold {threshold:e}")]
    Singular { det: f64, threshold: f64 },
    #[error("path density vanishes at the sample")]
    DegenerateDensity,
    #[error("point lies outside both branches of the jump law")]
    OutsideSupport,
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("sampler failed: {0}")]
    Sampler(String),
    #[error("{requested} active coordinates exceed the cap of {cap}")]
    CoordinateBudgetExceeded { requested: usize, cap: usize },
    #[error("I + grad_x c is not invertible at jump {jump}")]
    NonInvertibleJump { jump: usize },
    #[error("{rejected} of {total} paths were singular")]
    TooManyRejections { rejected: usize, total: usize },
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("theta is infinite")]
    InfiniteTheta,
    #[error("validity condition 4d(3q-1)/t < theta fails (q = {q}, t = {t}, theta = {theta})")]
    ValidityViolation { q: usize, t: f64, theta: f64 },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CfmmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CfmmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trade {delta} outside domain [{min}, {max}]")]
    DomainExceeded { delta: f64, min: f64, max: f64 },

    #[error("root finding failed: {0}")]
    NoRoot(String),

    #[error("closed form requires a pool at peg (g(0) = 1), got g(0) = {spot}")]
    PegRequired { spot: f64 },

    #[error("price impact function is not convex: secant slope drops from {wide} to {narrow}")]
    NonConvexDetected { narrow: f64, wide: f64 },

    #[error("price {price} not reachable, reachable range is [{min}, {max}]")]
    OutOfRange { price: f64, min: f64, max: f64 },

    #[error("no price crossing within search cap {cap}: f(cap) = {external}, g(-cap) = {secondary}")]
    NoCrossing { cap: f64, external: f64, secondary: f64 },

    #[error("kappa is zero, the curvature ratio bound is undefined")]
    KappaZero,

    #[error("mu is zero, every trade size is profitable")]
    MuZero,

    #[error("pools must share a spot price, got {first} and {second}")]
    SpotPriceMismatch { first: f64, second: f64 },

    #[error("not differentiable: {0}")]
    NotDifferentiable(String),

    #[error("singular jacobian while projecting onto the level set")]
    SingularJacobian,

    #[error("iteration diverged at step {step}")]
    Diverged { step: usize },

    #[error("quadrature residual {residual} above tolerance {tolerance}")]
    GridTooCoarse { residual: f64, tolerance: f64 },

    #[error("round {round}: {source}")]
    InRound { round: usize, source: Box<CfmmError> },
}

impl CfmmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CfmmError::InvalidParameter(msg.into())
    }

    pub(crate) fn in_round(self, round: usize) -> Self {
        CfmmError::InRound { round, source: Box::new(self) }
    }
}

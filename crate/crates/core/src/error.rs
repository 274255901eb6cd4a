use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("accuracy loss in {context}: estimated error {estimate:.3e}")]
    AccuracyLoss { context: String, estimate: f64 },

    #[error("value overflows f64 in {0}")]
    Overflow(String),

    #[error("derivative order {order} exceeds supported cap {cap}")]
    UnsupportedOrder { order: usize, cap: usize },

    #[error("invalid order {0}: must lie in the supported range")]
    InvalidOrder(f64),

    #[error("ill-conditioned Jordan decomposition (condition estimate {condition:.3e}); solve with the Talbot or Adams oracle instead")]
    IllConditioned { condition: f64 },

    #[error("series did not converge within {terms} terms")]
    SeriesDivergence { terms: usize },

    #[error("sampled functions live on incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("Laplace transform tail estimate {tail:.3e} exceeds tolerance {tol:.3e}")]
    InaccurateTransform { tail: f64, tol: f64 },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("term count exceeded the limit of {0}")]
    TruncationLimit(usize),

    #[error("orders are not rational: {0}")]
    RequiresRationalOrders(String),

    #[error("matrix does not have the required structure: {0}")]
    WrongStructure(String),

    #[error("resolvent is singular at a contour node (s = {0})")]
    NodeCollision(String),

    #[error("predictor-corrector blew up at step {step}")]
    BlowUp { step: usize },

    #[error("invalid forcing: {0}")]
    InvalidForcing(String),

    #[error("symbol is singular at frequency {0}")]
    SingularSymbol(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

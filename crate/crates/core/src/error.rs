use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("no binding for variable `{0}`")]
    MissingBinding(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("polynomial has no real roots")]
    NoRealRoots,

    #[error("root on integration contour near {re} + {im}i")]
    RootOnContour { re: f64, im: f64 },

    #[error("winding number {0} is not integral; refine the contour")]
    NonIntegralWinding(f64),

    #[error("root search budget exceeded")]
    BudgetExceeded,

    #[error("empty spectrum in region")]
    EmptySpectrum,

    #[error("matrix is not Hurwitz")]
    NotHurwitz,

    #[error("degenerate crossing: {0}")]
    DegenerateCrossing(String),

    #[error("inconsistent stability partition: {0}")]
    InconsistentPartition(String),

    #[error("configuration error: {0}")]
    Config(String),
}

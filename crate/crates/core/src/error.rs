use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector must have at least one coordinate")]
    EmptyVector,

    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("lambda must lie in [0, 1], got {0}")]
    LambdaOutOfRange(f64),

    #[error("invalid box: lower[{0}] > upper[{0}]")]
    InvalidBox(usize),

    #[error("matrix is not square: {rows} rows, {len} entries")]
    NotSquare { rows: usize, len: usize },

    #[error("operator `{0}` produced a non-finite value")]
    OperatorDefect(String),

    #[error("singular system: I - A - B is not invertible")]
    Singular,

    #[error("cannot vary arguments: the domain is a single point")]
    DegenerateDomain,

    #[error("initial point lies outside the operator domain")]
    OutsideDomain,

    #[error("{field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("unknown operator `{0}`")]
    UnknownOperator(String),

    #[error("unknown oracle kind `{0}`")]
    UnknownOracle(String),

    #[error("trace was not produced by a Krasnoselskij scheme")]
    NotKrasnoselskij,

    #[error("closed form does not converge for lambda = {0}")]
    NonConvergent(f64),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

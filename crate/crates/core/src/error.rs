use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("row error at line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("empty input")]
    EmptyInput,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("method failure: {0}")]
    MethodFailure(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("transaction {id} is ineligible: base fee {base_fee} exceeds max fee {max_fee}")]
    Ineligible { id: String, base_fee: f64, max_fee: f64 },
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("size limit exceeded: {got} > {max}")]
    SizeLimit { max: usize, got: usize },
    #[error("insufficient sample: {0}")]
    InsufficientSample(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

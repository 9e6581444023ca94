use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The delay is not an integer multiple of the grid step.
    #[error("tau = {tau} is not a multiple of h = (b - a)/{n}; {}", suggest_n(nearest_n))]
    Alignment {
        tau: f64,
        n: usize,
        nearest_n: Option<usize>,
    },

    /// Too few nodes in a range for the requested stencil.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("function `{name}` takes {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },

    /// Evaluation failed; carries the offending subexpression.
    #[error("evaluation error in `{expr}`: {message}")]
    Eval { expr: String, message: String },

    /// Evaluation failed at a particular grid node.
    #[error("at x = {x}: {source}")]
    AtNode {
        x: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("duplicate field `{0}`")]
    DuplicateField(String),

    #[error("invalid field `{field}`: {message}")]
    InvalidField { field: String, message: String },

    #[error("length mismatch: expected {expected}, got {found}")]
    Length { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("mode error: {0}")]
    Mode(String),

    #[error("sampling error: {skipped} of {trials} samples failed to evaluate")]
    Sampling { skipped: usize, trials: usize },

    #[error("solver error: {message}")]
    Solver {
        message: String,
        trajectory: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

fn suggest_n(n: &Option<usize>) -> String {
    match n {
        Some(n) => format!("nearest admissible n is {n}"),
        None => "no admissible n nearby".to_string(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn field(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

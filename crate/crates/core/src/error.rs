use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants map one-to-one onto the CLI exit codes (see [`Error::exit_code`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A function was evaluated outside its domain (never clamped silently).
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested operation does not apply to this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical error: {message} (order {order}, est. abs error {est_abs_error:e})")]
    Numerical {
        message: String,
        order: usize,
        est_abs_error: f64,
    },

    /// A bracketing search found nothing to bracket.
    #[error("search error: {0}")]
    Search(String),

    /// A computation would exceed a hard resource budget.
    #[error("resource error: {0}")]
    Resource(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Domain(_) | Error::Unsupported(_) => 1,
            Error::Numerical { .. } | Error::Search(_) => 2,
            Error::Resource(_) => 3,
            Error::Io(_) => 1,
        }
    }

    /// Prefix the message with extra context, keeping the variant.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            Error::Parameter(m) => Error::Parameter(format!("{ctx}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Unsupported(m) => Error::Unsupported(format!("{ctx}: {m}")),
            Error::Numerical {
                message,
                order,
                est_abs_error,
            } => Error::Numerical {
                message: format!("{ctx}: {message}"),
                order,
                est_abs_error,
            },
            Error::Search(m) => Error::Search(format!("{ctx}: {m}")),
            Error::Resource(m) => Error::Resource(format!("{ctx}: {m}")),
            Error::Io(m) => Error::Io(format!("{ctx}: {m}")),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

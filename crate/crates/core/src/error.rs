use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value fell outside its admissible domain. `index` locates the
    /// offending element when the input was a sequence.
    #[error("{what} = {value} outside {domain}{}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
        index: Option<usize>,
    },

    #[error("location profile must contain at least one agent")]
    EmptyProfile,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("utility table is not concave at breakpoint {index}")]
    Concavity { index: usize },

    #[error("non-finite welfare encountered at y = {y}")]
    Numerical { y: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("check skipped: {0}")]
    SkippedCheck(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn facility(y: f64) -> Self {
        Error::Domain {
            what: "facility location y",
            value: y,
            domain: "[0, 1]",
            index: None,
        }
    }
}

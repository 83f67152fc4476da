use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("window not admissible: summed window weight is zero at sample {index}")]
    WindowAdmissibility { index: usize },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("squared-window condition violated at sample {index}: sum of squares = {sum_sq}")]
    ColaCondition { index: usize, sum_sq: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("class index {class} out of range for {num_classes} classes")]
    InvalidClass { class: usize, num_classes: usize },

    #[error("training failed: {0}")]
    TrainingFailure(String),

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },

    #[error("relevance propagation failed: {0}")]
    Propagation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("spectrum does not match the signal (max deviation {max_deviation:e})")]
    StaleSpectrum { max_deviation: f64 },

    #[error("relevance map is not even-symmetric at bin {index} (deviation {deviation:e})")]
    Symmetry { index: usize, deviation: f64 },

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by malformed or inconsistent data rather than
    /// numerical breakdown.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnsupportedVersion { .. }
                | Error::Dimension { .. }
                | Error::InvalidInput(_)
                | Error::Empty(_)
                | Error::Io(_)
        )
    }
}

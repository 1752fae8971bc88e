use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("volume density is not positive at grid point {index} (value {value:e})")]
    NonPositiveDensity { index: usize, value: f64 },

    #[error("fiber block of the initial metric degenerates above base point {base} (value {value:e})")]
    SingularFiberMetric { base: usize, value: f64 },

    #[error("point {re} + {im}i lies outside the unit disk")]
    OutOfDomain { re: f64, im: f64 },

    #[error("non-finite value in {what} at grid point {index}")]
    NonFiniteValue { what: &'static str, index: usize },

    #[error("metric is singular at grid point {index} (min eigenvalue {min_eig:e})")]
    SingularMetric { index: usize, min_eig: f64 },

    #[error("interpolation stencil for ghost point {ghost} leaves the padded domain")]
    InterpolationOutOfDomain { ghost: usize },

    #[error("positivity lost at t = {t}: min relative eigenvalue {min_eig:e} at grid point {index}")]
    PositivityLost { t: f64, index: usize, min_eig: f64 },

    #[error("invalid configuration (line {line}, key `{key}`): {message}")]
    ConfigInvalid { line: usize, key: String, message: String },

    #[error("need at least {needed} samples in window [{t0}, {t1}], found {found}")]
    InsufficientSamples { needed: usize, found: usize, t0: f64, t1: f64 },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid { line: 0, key: key.into(), message: message.into() }
    }

    /// Short machine-readable tag used in CLI failure reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveDensity { .. } => "NonPositiveDensity",
            Error::SingularFiberMetric { .. } => "SingularFiberMetric",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::SingularMetric { .. } => "SingularMetric",
            Error::InterpolationOutOfDomain { .. } => "InterpolationOutOfDomain",
            Error::PositivityLost { .. } => "PositivityLost",
            Error::ConfigInvalid { .. } => "ConfigInvalid",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::Format { .. } => "Format",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

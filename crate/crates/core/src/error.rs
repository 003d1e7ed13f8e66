use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error(
        "training diverged at epoch {epoch} (loss {loss:e}); try a smaller learning rate"
    )]
    Diverged { epoch: usize, loss: f64 },

    #[error("fuzzy coverage violated: no rule fires at e={e}, edot={edot}")]
    Coverage { e: f64, edot: f64 },

    #[error("integration aborted at t={t}: {component} became non-finite")]
    Integration { t: f64, component: String },

    #[error("trajectory log is empty")]
    EmptyLog,

    #[error("malformed weights file: {0}")]
    Weights(String),

    #[error("malformed trajectory log at row {row}: {reason}")]
    MalformedLog { row: usize, reason: String },
}

impl Error {
    /// Whether the error stems from invalid input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite { .. } | Error::Diverged { .. } | Error::Integration { .. } | Error::Coverage { .. }
        )
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: what.to_string(),
        })
    }
}

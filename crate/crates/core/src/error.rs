use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Requested Fock space is larger than the configured cap.
    #[error("basis too large: ({cutoff}+1)^{n_modes} = {dimension} exceeds cap {cap}")]
    Sizing {
        n_modes: usize,
        cutoff: usize,
        dimension: u128,
        cap: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible configuration: {0}")]
    Configuration(String),

    /// A linear-optical element would move population beyond the truncation.
    #[error("state has weight {weight:e} in photon-number overflow sector of modes ({i}, {j})")]
    Overflow { i: usize, j: usize, weight: f64 },

    /// Conditioning on an outcome of vanishing probability.
    #[error("degenerate outcome: {0}")]
    DegenerateOutcome(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by the user's inputs or files, as opposed to
    /// numerical or physical degeneracies.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Sizing { .. }
                | Error::InvalidArgument(_)
                | Error::Configuration(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

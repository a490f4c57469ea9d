use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("observational cells sum to {sum}, expected 1 (tolerance 1e-9)")]
    NotNormalized { sum: f64 },

    #[error("{name} must be at least 1")]
    InvalidCount { name: &'static str },

    #[error("{0}")]
    Domain(String),

    #[error(
        "experimental {arm} arm has no samples; the causal effect for that arm cannot be estimated"
    )]
    EmptyArm { arm: TreatmentArm },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which experimental arm an [`Error::EmptyArm`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreatmentArm {
    Treated,
    Control,
}

impl std::fmt::Display for TreatmentArm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TreatmentArm::Treated => f.write_str("treated (x=1)"),
            TreatmentArm::Control => f.write_str("control (x=0)"),
        }
    }
}

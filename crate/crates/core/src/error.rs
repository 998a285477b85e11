use crate::model::State;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid input parameter or precondition violation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Leg length collapsed below the guard, or a coordinate singularity.
    #[error("singularity: {reason}")]
    Singularity {
        reason: String,
        /// Time of the failing evaluation, when known.
        time: Option<f64>,
        /// Last state accepted before the failing evaluation.
        last_good: Option<State>,
    },

    #[error("step budget of {max_steps} steps exhausted at t = {time}")]
    Budget { max_steps: usize, time: f64 },

    #[error("event not found before t = {t_max}")]
    EventNotFound { t_max: f64 },

    #[error("convergence failure after {iterations} iterations: {reason}")]
    Convergence { iterations: usize, reason: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain(_))
    }
}

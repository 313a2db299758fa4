use thiserror::Error;

use crate::certify::Decision;
use crate::confseq::ConfidenceState;
use crate::generators::GeneratorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("radius is undefined before the first sample (n = 0)")]
    NoSamples,

    #[error("violation vector has {got} flags but the constraint spec has {expected}")]
    LengthMismatch { expected: usize, got: usize },

    /// The generator failed mid-certification. `state` holds the evidence
    /// gathered before the failure.
    #[error("inference aborted after {} samples: {source}", state.n())]
    InferenceAborted {
        state: ConfidenceState,
        #[source]
        source: GeneratorError,
    },

    /// Certification finished but drawing the response sample failed. The
    /// verdict in `decision` stands.
    #[error(
        "certified {} after {} samples, but drawing the response failed: {source}",
        decision.verdict,
        decision.stopping_time
    )]
    DeliveryFailed {
        decision: Box<Decision>,
        #[source]
        source: GeneratorError,
    },

    #[error("no outcome is accepted, so conditional risk is undefined")]
    NothingAccepted,

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Generator(#[from] GeneratorError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

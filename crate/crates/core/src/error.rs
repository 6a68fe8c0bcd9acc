use thiserror::Error;

/// Everything that can go wrong while building or running a chain simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller broke a documented precondition (dimension mismatch, bad parameter, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The state stopped being finite.
    #[error("integration blew up at t = {time}")]
    BlowUp { time: f64 },

    /// The adaptive controller asked for a step below the floor.
    #[error("step size underflow ({step:e}) at t = {time}; system too stiff for the explicit pair")]
    StepUnderflow { time: f64, step: f64 },

    /// Least squares with no spread in the abscissae.
    #[error("degenerate fit: all x values are identical")]
    DegenerateFit,

    /// An amplitude sweep failed; carries the amplitude that triggered it.
    #[error("sweep failed at f = {amplitude}: {source}")]
    AtAmplitude {
        amplitude: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True when the underlying cause is numerical (blow-up or step underflow).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::BlowUp { .. } | Error::StepUnderflow { .. } => true,
            Error::AtAmplitude { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

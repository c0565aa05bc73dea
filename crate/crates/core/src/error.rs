use crate::strain::Frame;

/// Errors shared across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("matrix deviates from Hermitian symmetry by {max_dev:.3e} (tolerance {tol:.0e})")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("transverse strain amplitudes are both zero; the splitting phase is undefined")]
    DegeneratePhase,

    #[error("strain tensor is in the {found:?} frame, expected {expected:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("unknown NV orientation index {0} (valid: 1-4)")]
    UnknownOrientation(u8),

    #[error("invalid spectrum model: {0}")]
    InvalidModel(String),

    #[error("frequency grid must be strictly increasing (violated at index {0})")]
    GridNotIncreasing(usize),

    #[error("too few samples: got {n}, need at least {min}")]
    TooFewSamples { n: usize, min: usize },

    #[error("spectrum is flat: no dip deeper than three times the noise level")]
    FlatSpectrum,

    #[error("fit did not converge; strain inversion requires a converged fit")]
    NotConverged,

    #[error("both dip depths are zero; the imbalance is undefined")]
    ZeroTotalDepth,

    #[error("contrast must lie in [0, 1], got {0}")]
    ContrastOutOfRange(f64),

    #[error("photon count must be non-negative, got {0}")]
    NegativePhotonCount(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

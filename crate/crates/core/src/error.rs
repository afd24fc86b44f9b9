use thiserror::Error;

/// Errors raised by the simulation, extraction and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter range `{name}`: {reason}")]
    InvalidRange { name: String, reason: String },

    #[error("frequency {freq} Hz is not below the Nyquist limit {nyquist} Hz")]
    AboveNyquist { freq: f64, nyquist: f64 },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("recording window of {len} samples is shorter than one cycle of {freq} Hz")]
    WindowTooShort { len: usize, freq: f64 },

    #[error("base frequencies {a} Hz and {b} Hz are harmonically related")]
    HarmonicBaseFrequencies { a: f64, b: f64 },

    #[error("mislabeled rest windows: face-up z ({z_up}) must exceed face-down z ({z_down})")]
    MislabeledWindows { z_up: f64, z_down: f64 },

    #[error("zero sensitivity on axis {axis}")]
    ZeroSensitivity { axis: char },

    #[error("underdetermined calibration: {distinct} distinct orientations, need at least {required}")]
    Underdetermined { distinct: usize, required: usize },

    #[error("fingerprint is missing response at {freq} Hz, harmonic {harmonic}")]
    MissingHarmonic { freq: f64, harmonic: u32 },

    #[error("feature length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("device {device} has {count} training vectors, need at least {required}")]
    InsufficientTraining {
        device: String,
        count: usize,
        required: usize,
    },

    #[error("no rest window found for orientation {0}")]
    MissingOrientation(&'static str),

    #[error("no device with exactly two submissions")]
    NoTwoSubmissionDevices,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}

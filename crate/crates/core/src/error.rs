use alloc::string::String;

/// Errors raised by the odometry algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The gyroscope stream does not cover a required time span.
    #[error("missing gyroscope data between {from:.6} s and {to:.6} s")]
    MissingData { from: f64, to: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    /// Euler decomposition is singular (pitch at +/- 90 degrees).
    #[error("gimbal-degenerate pose at t = {timestamp:.6} s")]
    GimbalLock { timestamp: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

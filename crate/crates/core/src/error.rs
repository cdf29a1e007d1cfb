use thiserror::Error;

/// Errors raised by the simulator, controllers, and harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("differential amplitude |u_s| = {u_s} exceeds average voltage u_a = {u_a}")]
    DifferentialExceedsAverage { u_a: f64, u_s: f64 },

    #[error("time step {0} s is outside the accepted range")]
    TimeStep(f64),

    #[error("motor stalled at disk angle {angle:.4} rad")]
    MotorStall { angle: f64 },

    #[error("non-finite state at t = {t} s")]
    Integration { t: f64 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("telemetry rejected: {0}")]
    Telemetry(String),

    #[error("calibration did not converge: {0}")]
    Calibration(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value.is_finite() && value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            min,
            max,
        })
    }
}

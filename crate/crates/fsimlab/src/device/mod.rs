//! Simulated two-qutrit gmon device.

mod density;
mod evolve;
mod gates;
mod model;
mod program;
mod readout;

pub use density::*;
pub use evolve::*;
pub use gates::*;
pub use model::*;
pub use program::*;
pub use readout::*;

use crate::pulse::PulseError;

#[derive(Debug, thiserror::Error)]
pub enum DeviceError {
    #[error("invalid device model: {0}")]
    InvalidModel(String),
    #[error("{channel} bias {bias} outside ±{limit}")]
    BiasOutOfRange { channel: &'static str, bias: f64, limit: f64 },
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

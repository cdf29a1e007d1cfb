//! Live pilot bridge: one simulator stepped in real time, driven by JSON
//! commands over a WebSocket and streaming state frames back.
//!
//! The first client on `/ws` is the pilot; later ones are read-only
//! spectators until the pilot leaves. With no pilot the last command is held.

pub mod protocol;
pub mod server;
pub mod stepper;

pub use server::{serve, start, RunningServer, ServeConfig};

#[derive(Debug, thiserror::Error)]
pub enum PilotError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] yokefish_core::error::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PilotError>;

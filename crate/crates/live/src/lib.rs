//! Live human-in-the-loop sessions.
//!
//! [`SessionEngine`] runs the closed loop tick by tick and accepts live human
//! force, alpha and controller changes between ticks. [`server`] exposes it
//! over a WebSocket with a small JSON protocol ([`wire`]).

pub mod engine;
pub mod server;
pub mod wire;

pub use engine::{EngineConfig, SessionEngine, SessionError};
pub use server::{router, serve, ServerConfig, DEFAULT_PORT};
pub use wire::{ClientMessage, GainsChanged, Mode, ServerMessage, Telemetry};

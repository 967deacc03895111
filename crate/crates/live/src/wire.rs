//! JSON messages exchanged on the `/session` socket.
//!
//! Every message in either direction is an object carrying the schema
//! version `v`, the session id and a `type` tag, e.g.
//!
//! ```json
//! {"v":1,"session":"5f0c…","type":"set_alpha","alpha":0.9}
//! ```

use coopgame_core::linalg::Matrix;
use coopgame_core::GameSolution;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ModeledHuman,
    LiveHuman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    ApplyForce { force: Vec<f64> },
    SetAlpha { alpha: f64 },
    SetController { controller: String },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub tick: u64,
    pub time: f64,
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    pub u_h: Vec<f64>,
    pub u_r: Vec<f64>,
    pub u_h_nominal: Vec<f64>,
    /// Agreed reference, cooperative controllers only.
    pub z_ref: Option<Vec<f64>>,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsChanged {
    pub controller: String,
    pub alpha: f64,
    /// Row-major rows of each gain matrix.
    pub k_h: Vec<Vec<f64>>,
    pub k_r: Vec<Vec<f64>>,
    pub z_ref: Option<Vec<f64>>,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl GainsChanged {
    pub fn new(alpha: f64, solution: &GameSolution) -> Self {
        Self {
            controller: solution.controller.clone(),
            alpha,
            k_h: rows(&solution.k_h),
            k_r: rows(&solution.k_r),
            z_ref: solution.z_ref.as_ref().map(|z| z.iter().copied().collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Telemetry(Telemetry),
    GainsChanged(GainsChanged),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub v: u32,
    pub session: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(session: &str, body: T) -> Self {
        Self { v: SCHEMA_VERSION, session: session.to_string(), body }
    }
}

/// Parses a client frame and checks its version and session id.
pub fn decode_client(text: &str, session: &str) -> Result<ClientMessage, String> {
    let env: Envelope<ClientMessage> = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    if env.v != SCHEMA_VERSION {
        return Err(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", env.v));
    }
    if env.session != session {
        return Err(format!("message addressed to session {}, this is {session}", env.session));
    }
    Ok(env.body)
}

pub fn encode_server(session: &str, msg: ServerMessage) -> String {
    serde_json::to_string(&Envelope::new(session, msg)).expect("server messages always serialize")
}

use std::fmt;
use std::path::Path;

use coopgame_core::controllers::ControllerError;
use coopgame_core::dynamics::DynamicsError;
use coopgame_core::riccati::RiccatiError;
use coopgame_core::scenario::ScenarioError;
use coopgame_core::simulation::SimulationError;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Validation = 2,
    Solver = 3,
    Io = 4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Usage, message)
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(ExitKind::Io, format!("{}: {err}", path.display()))
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn riccati_kind(e: &RiccatiError) -> ExitKind {
    match e {
        RiccatiError::Dimension(_)
        | RiccatiError::TooLarge(_)
        | RiccatiError::IndefiniteWeight(_)
        | RiccatiError::InvalidWeight(_) => ExitKind::Validation,
        RiccatiError::NotHurwitz { .. } | RiccatiError::NoStabilizingSolution(_) | RiccatiError::NoConvergence { .. } => {
            ExitKind::Solver
        }
    }
}

fn dynamics_kind(e: &DynamicsError) -> ExitKind {
    match e {
        DynamicsError::NonFinite => ExitKind::Solver,
        _ => ExitKind::Validation,
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        let kind = match e {
            ScenarioError::Io { .. } => ExitKind::Io,
            _ => ExitKind::Validation,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<ControllerError> for CliError {
    fn from(e: ControllerError) -> Self {
        let kind = match &e {
            ControllerError::Riccati(r) => riccati_kind(r),
            ControllerError::Dynamics(d) => dynamics_kind(d),
            _ => ExitKind::Validation,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Controller(c) => c.into(),
            SimulationError::Dynamics(d) => Self::new(dynamics_kind(&d), d.to_string()),
            SimulationError::EmptySweep => Self::usage(e.to_string()),
            other => Self::new(ExitKind::Validation, other.to_string()),
        }
    }
}

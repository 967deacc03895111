//! Controller syntheses and the name-keyed registry that selects them.
//!
//! Each controller family implements [`GameController`]. The built-in registry
//! holds `cgt` (cooperative), `lqr` (independent regulators) and `ncgt`
//! (feedback Nash); scenario files and the live service pick one by name.

mod impedance;
mod objective;
mod synthesis;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::riccati::RiccatiError;

pub use impedance::impedance_equivalent;
pub use objective::{
    cgt_aggregate, check_alpha, control_action, shared_reference, AgentObjective, CgtAggregate, References,
    SharedReference,
};
pub use synthesis::{synthesize_cgt, synthesize_lqr, synthesize_ncgt, GameProblem, GameSolution, RiccatiRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("alpha must lie in the open interval (0, 1), got {0}")]
    AlphaDomain(f64),
    #[error("invalid objective: {0}")]
    InvalidObjective(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular weight: {0}")]
    SingularWeight(String),
    #[error("unknown controller `{name}` (available: {available})")]
    UnknownController { name: String, available: String },
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// A controller family that turns a [`GameProblem`] into feedback gains.
pub trait GameController: Send + Sync {
    /// Registry key, also used in scenario files and on the wire.
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Whether both agents track a single agreed reference.
    fn shares_reference(&self) -> bool {
        false
    }

    fn synthesize(&self, problem: &GameProblem) -> Result<GameSolution, ControllerError>;
}

pub struct Cooperative;

impl GameController for Cooperative {
    fn name(&self) -> &'static str {
        "cgt"
    }

    fn description(&self) -> &'static str {
        "cooperative game: Pareto-weighted joint cost, shared reference"
    }

    fn shares_reference(&self) -> bool {
        true
    }

    fn synthesize(&self, problem: &GameProblem) -> Result<GameSolution, ControllerError> {
        synthesize_cgt(problem)
    }
}

pub struct IndependentLqr;

impl GameController for IndependentLqr {
    fn name(&self) -> &'static str {
        "lqr"
    }

    fn description(&self) -> &'static str {
        "independent regulators, each blind to the other agent"
    }

    fn synthesize(&self, problem: &GameProblem) -> Result<GameSolution, ControllerError> {
        synthesize_lqr(problem)
    }
}

pub struct FeedbackNash;

impl GameController for FeedbackNash {
    fn name(&self) -> &'static str {
        "ncgt"
    }

    fn description(&self) -> &'static str {
        "non-cooperative game: feedback Nash equilibrium of coupled Riccati equations"
    }

    fn synthesize(&self, problem: &GameProblem) -> Result<GameSolution, ControllerError> {
        synthesize_ncgt(problem)
    }
}

/// Controllers addressable by name.
#[derive(Clone)]
pub struct ControllerRegistry {
    entries: BTreeMap<&'static str, Arc<dyn GameController>>,
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Registry with `cgt`, `lqr` and `ncgt`.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(Cooperative));
        reg.register(Arc::new(IndependentLqr));
        reg.register(Arc::new(FeedbackNash));
        reg
    }

    /// Adds a controller, replacing any previous one with the same name.
    pub fn register(&mut self, controller: Arc<dyn GameController>) -> Option<Arc<dyn GameController>> {
        self.entries.insert(controller.name(), controller)
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn GameController>, ControllerError> {
        self.entries.get(name).cloned().ok_or_else(|| ControllerError::UnknownController {
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn synthesize(&self, name: &str, problem: &GameProblem) -> Result<GameSolution, ControllerError> {
        self.get(name)?.synthesize(problem)
    }
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl std::fmt::Debug for ControllerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

//! Two-player linear-quadratic game controllers for physical human-robot
//! interaction on an impedance-modeled plant.
//!
//! The crate builds the plant ([`dynamics`]), solves the Riccati equations
//! behind each controller ([`riccati`]), synthesizes cooperative, Nash and
//! independent-LQR gains ([`controllers`]), and simulates and scores closed-loop
//! runs ([`simulation`]). Scenario files are handled by [`scenario`].

mod compensated;
mod lattice;
pub mod controllers;
pub mod dynamics;
pub mod linalg;
pub mod riccati;
pub mod scenario;
pub mod simulation;

pub use controllers::{ControllerRegistry, GameController, GameProblem, GameSolution};
pub use dynamics::{ImpedanceParams, State, StateSpace};
pub use simulation::{Scenario, Trajectory};

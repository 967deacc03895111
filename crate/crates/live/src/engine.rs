//! The authoritative session loop, independent of any transport.
//!
//! A [`SessionEngine`] owns the closed loop and advances it one fixed tick at a
//! time. Everything that can change the session (forces, alpha, controller,
//! reset) is applied between ticks, so replaying the same messages at the same
//! ticks reproduces the same telemetry.

use coopgame_core::controllers::ControllerError;
use coopgame_core::linalg::Vector;
use coopgame_core::simulation::{ClosedLoop, Sample, SimulationError};
use coopgame_core::{ControllerRegistry, GameSolution, Scenario};
use thiserror::Error;

use crate::wire::{GainsChanged, Mode, Telemetry};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Integration step; 250 Hz by default.
    pub dt: f64,
    /// Telemetry is emitted every `decimation` ticks (50 Hz by default).
    pub decimation: u64,
    /// Live force is held unchanged for this long (s) ...
    pub hold: f64,
    /// ... then ramps linearly to zero over this long (s).
    pub decay: f64,
    /// Per-axis clamp on live human force (N).
    pub force_limit: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { dt: 0.004, decimation: 5, hold: 0.2, decay: 0.1, force_limit: 50.0 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("session is closed")]
    Stale,
    #[error("invalid force: {0}")]
    InvalidForce(String),
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

#[derive(Debug, Clone, PartialEq)]
struct HeldForce {
    force: Vector,
    received_at: f64,
}

#[derive(Debug)]
pub struct SessionEngine {
    config: EngineConfig,
    registry: ControllerRegistry,
    scenario: Scenario,
    cl: ClosedLoop,
    mode: Mode,
    held: Option<HeldForce>,
    closed: bool,
}

impl SessionEngine {
    /// Synthesizes the scenario's controller and returns the engine together
    /// with the initial gains announcement. The scenario's own `dt` is replaced
    /// by the engine tick.
    pub fn start(
        mut scenario: Scenario,
        registry: ControllerRegistry,
        config: EngineConfig,
    ) -> Result<(Self, GainsChanged), SessionError> {
        if !(config.dt > 0.0 && config.dt.is_finite()) || config.decimation == 0 {
            return Err(SessionError::Config("dt must be positive and decimation at least 1".into()));
        }
        if !(config.hold >= 0.0 && config.decay >= 0.0 && config.force_limit > 0.0) {
            return Err(SessionError::Config("hold, decay and force limit must be non-negative".into()));
        }
        scenario.dt = config.dt;
        let (ss, solution) = scenario.synthesize(&registry)?;
        let cl = ClosedLoop::new(ss, solution, &scenario.initial_state, config.dt)?;
        let engine = Self { config, registry, scenario, cl, mode: Mode::ModeledHuman, held: None, closed: false };
        let gains = engine.gains();
        Ok((engine, gains))
    }

    pub fn tick(&self) -> u64 {
        self.cl.tick()
    }

    pub fn time(&self) -> f64 {
        self.cl.time()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn solution(&self) -> &GameSolution {
        self.cl.solution()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn live(&self) -> Result<(), SessionError> {
        if self.closed {
            Err(SessionError::Stale)
        } else {
            Ok(())
        }
    }

    /// Records a live human force, clamped per axis. The first call switches
    /// the session to live-human mode.
    pub fn apply_force(&mut self, force: &[f64]) -> Result<(), SessionError> {
        self.live()?;
        let n = self.cl.state_space().human_inputs();
        if force.len() != n {
            return Err(SessionError::InvalidForce(format!("expected {n} components, got {}", force.len())));
        }
        if !force.iter().all(|f| f.is_finite()) {
            return Err(SessionError::InvalidForce("components must be finite".into()));
        }
        let limit = self.config.force_limit;
        let clamped = Vector::from_iterator(n, force.iter().map(|f| f.clamp(-limit, limit)));
        self.held = Some(HeldForce { force: clamped, received_at: self.time() });
        self.mode = Mode::LiveHuman;
        Ok(())
    }

    /// Live force in effect now: held, then ramped down, then zero.
    fn live_force(&self) -> Vector {
        let n = self.cl.state_space().human_inputs();
        let Some(held) = &self.held else {
            return Vector::zeros(n);
        };
        let age = self.time() - held.received_at;
        let (hold, decay) = (self.config.hold, self.config.decay);
        // tick * dt rarely lands exactly on the boundaries
        let slack = 1e-9 * self.config.dt;
        if age <= hold + slack {
            return held.force.clone();
        }
        if age >= hold + decay - slack {
            return Vector::zeros(n);
        }
        &held.force * (1.0 - (age - hold) / decay)
    }

    fn human_override(&self) -> Option<Vector> {
        match self.mode {
            Mode::ModeledHuman => None,
            Mode::LiveHuman => Some(self.live_force()),
        }
    }

    /// Samples the current instant, then advances one tick. Returns telemetry
    /// for the sampled instant on decimation boundaries.
    pub fn step(&mut self) -> Result<Option<Telemetry>, SessionError> {
        self.live()?;
        let force = self.human_override();
        let sample = self.cl.sample(force.as_ref());
        let telemetry = sample.tick.is_multiple_of(self.config.decimation).then(|| self.telemetry(&sample));
        self.cl.advance(force.as_ref())?;
        Ok(telemetry)
    }

    /// Telemetry for the current instant without advancing.
    pub fn snapshot(&self) -> Result<Telemetry, SessionError> {
        self.live()?;
        Ok(self.telemetry(&self.cl.sample(self.human_override().as_ref())))
    }

    fn telemetry(&self, s: &Sample) -> Telemetry {
        Telemetry {
            tick: s.tick,
            time: s.time,
            pos: s.state.pos.iter().copied().collect(),
            vel: s.state.vel.iter().copied().collect(),
            u_h: s.u_h.iter().copied().collect(),
            u_r: s.u_r.iter().copied().collect(),
            u_h_nominal: s.u_h_nominal.iter().copied().collect(),
            z_ref: self.solution().z_ref.as_ref().map(|z| z.iter().copied().collect()),
            mode: self.mode,
        }
    }

    pub fn gains(&self) -> GainsChanged {
        GainsChanged::new(self.scenario.alpha, self.solution())
    }

    /// Re-synthesizes with a new alpha. On failure the previous gains stay active.
    pub fn set_alpha(&mut self, alpha: f64) -> Result<GainsChanged, SessionError> {
        self.live()?;
        let mut next = self.scenario.clone();
        next.alpha = alpha;
        self.resynthesize(next)
    }

    /// Switches controller family. On failure the previous gains stay active.
    pub fn set_controller(&mut self, name: &str) -> Result<GainsChanged, SessionError> {
        self.live()?;
        let mut next = self.scenario.clone();
        next.controller = name.to_string();
        self.resynthesize(next)
    }

    fn resynthesize(&mut self, next: Scenario) -> Result<GainsChanged, SessionError> {
        let (_, solution) = next.synthesize(&self.registry)?;
        self.scenario = next;
        self.cl.set_solution(solution);
        Ok(self.gains())
    }

    /// Back to the initial state at tick 0. The mode is kept; any held force is dropped.
    pub fn reset(&mut self) -> Result<(), SessionError> {
        self.live()?;
        self.cl.reset(&self.scenario.initial_state);
        self.held = None;
        Ok(())
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

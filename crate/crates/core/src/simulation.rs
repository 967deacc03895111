//! Closed-loop episodes, windowed costs, the normalized effort error, and
//! parameter sweeps.
//!
//! Feedback forces are re-evaluated at every Runge-Kutta stage, so a run is
//! the RK4 solution of the linear closed-loop ODE. An external human force is
//! held constant over each step.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::controllers::{
    check_alpha, impedance_equivalent, AgentObjective, ControllerError, ControllerRegistry, GameProblem,
    GameSolution, References,
};
use crate::dynamics::{self, build_state_space, DynamicsError, ImpedanceParams, State, StateSpace};
use crate::linalg::{Matrix, Vector};
use crate::riccati::CrossEffort;

/// Cost window used when a scenario does not set one, in seconds.
pub const DEFAULT_COST_WINDOW: (f64, f64) = (0.0, 3.5);

const NORMALIZER_MIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("window ({start}, {end}) is outside the trajectory span ({first}, {last})")]
    WindowOutOfRange { start: f64, end: f64, first: f64, last: f64 },
    #[error("maximum nominal effort {0:e} is too small to normalize by")]
    DegenerateNormalizer(f64),
    #[error("sweep needs at least one value")]
    EmptySweep,
}

/// Complete configuration of one closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: ImpedanceParams,
    pub human: AgentObjective,
    pub robot: AgentObjective,
    pub refs: References,
    pub alpha: f64,
    /// Registry name of the controller.
    pub controller: String,
    pub duration: f64,
    pub dt: f64,
    pub initial_state: State,
    pub cost_window: (f64, f64),
    pub cross: CrossEffort,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidScenario(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.dt > self.duration {
            return bad(format!("dt {} exceeds duration {}", self.dt, self.duration));
        }
        let (w0, w1) = self.cost_window;
        if !(w0.is_finite() && w1.is_finite() && 0.0 <= w0 && w0 <= w1) {
            return bad(format!("cost window ({w0}, {w1}) must satisfy 0 <= start <= end"));
        }
        let n = self.plant.dof();
        if self.initial_state.dof() != n || !self.initial_state.is_finite() {
            return bad(format!("initial state must have {n} finite positions and velocities"));
        }
        check_alpha(self.alpha)?;
        self.problem()?.validate()?;
        Ok(())
    }

    pub fn state_space(&self) -> Result<StateSpace, SimulationError> {
        Ok(build_state_space(&self.plant)?)
    }

    pub fn problem(&self) -> Result<GameProblem, SimulationError> {
        Ok(GameProblem {
            ss: self.state_space()?,
            human: self.human.clone(),
            robot: self.robot.clone(),
            refs: self.refs.clone(),
            alpha: self.alpha,
            cross: self.cross.clone(),
        })
    }

    /// Builds the plant and synthesizes the configured controller.
    pub fn synthesize(&self, registry: &ControllerRegistry) -> Result<(StateSpace, GameSolution), SimulationError> {
        self.validate()?;
        let problem = self.problem()?;
        let solution = registry.synthesize(&self.controller, &problem)?;
        Ok((problem.ss, solution))
    }

    /// `floor(duration / dt) + 1`
    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }

    /// Cost window clipped to the run length.
    pub fn effective_window(&self) -> (f64, f64) {
        let end = (self.n_samples() - 1) as f64 * self.dt;
        (self.cost_window.0.min(end), self.cost_window.1.min(end))
    }
}

/// Time-indexed record of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub controller: String,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub u_h: Vec<Vector>,
    pub u_r: Vec<Vector>,
    /// Force the human model would have applied at each sample.
    pub u_h_nominal: Vec<Vector>,
    pub human_target: Vector,
    pub robot_target: Vector,
    pub z_ref: Option<Vector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &State {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn peak_norm(forces: &[Vector]) -> f64 {
        forces.iter().map(|u| u.norm()).fold(0.0, f64::max)
    }
}

/// Source of measured human force, replacing the modeled human when it yields
/// a value. The force is held over the following step.
pub trait HumanForceSource {
    fn force(&mut self, tick: usize, time: f64, state: &State) -> Option<Vector>;
}

impl<F> HumanForceSource for F
where
    F: FnMut(usize, f64, &State) -> Option<Vector>,
{
    fn force(&mut self, tick: usize, time: f64, state: &State) -> Option<Vector> {
        self(tick, time, state)
    }
}

/// One recorded instant of a closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tick: u64,
    pub time: f64,
    pub state: State,
    pub u_h: Vector,
    pub u_r: Vector,
    pub u_h_nominal: Vector,
}

fn integrate<H, R>(ss: &StateSpace, z: &Vector, dt: f64, human: H, robot: R) -> Result<Vector, DynamicsError>
where
    H: Fn(&Vector) -> Vector,
    R: Fn(&Vector) -> Vector,
{
    let next = dynamics::rk4_step(z, dt, |x| &ss.a * x + &ss.b_h * human(x) + &ss.b_r * robot(x));
    dynamics::guard(next)
}

/// Plant plus synthesized feedback, advanced one fixed step at a time.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    ss: StateSpace,
    solution: GameSolution,
    dt: f64,
    z: Vector,
    tick: u64,
}

impl ClosedLoop {
    pub fn new(ss: StateSpace, solution: GameSolution, initial: &State, dt: f64) -> Result<Self, SimulationError> {
        dynamics::check_step(dt)?;
        let z = initial.stacked();
        if z.len() != ss.n_states() {
            return Err(SimulationError::InvalidScenario("initial state does not match the plant".into()));
        }
        Ok(Self { ss, solution, dt, z, tick: 0 })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self) -> State {
        State::from_stacked(&self.z).expect("plant state has even length")
    }

    pub fn solution(&self) -> &GameSolution {
        &self.solution
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.ss
    }

    /// Swaps in new gains; the state is untouched.
    pub fn set_solution(&mut self, solution: GameSolution) {
        self.solution = solution;
    }

    pub fn reset(&mut self, initial: &State) {
        self.z = initial.stacked();
        self.tick = 0;
    }

    fn check_force(&self, force: Option<&Vector>) -> Result<(), SimulationError> {
        match force {
            Some(f) if f.len() != self.ss.human_inputs() || !f.iter().all(|x| x.is_finite()) => Err(
                SimulationError::InvalidScenario(format!("human force must have {} finite entries", self.ss.human_inputs())),
            ),
            _ => Ok(()),
        }
    }

    /// Forces at the current state. `human_force` overrides the modeled human.
    pub fn sample(&self, human_force: Option<&Vector>) -> Sample {
        let nominal = self.solution.human_action(&self.z);
        Sample {
            tick: self.tick,
            time: self.time(),
            state: self.state(),
            u_h: human_force.cloned().unwrap_or_else(|| nominal.clone()),
            u_r: self.solution.robot_action(&self.z),
            u_h_nominal: nominal,
        }
    }

    pub fn advance(&mut self, human_force: Option<&Vector>) -> Result<(), SimulationError> {
        self.check_force(human_force)?;
        let sol = &self.solution;
        let robot = |x: &Vector| sol.robot_action(x);
        self.z = match human_force {
            Some(f) => integrate(&self.ss, &self.z, self.dt, |_| f.clone(), robot)?,
            None => integrate(&self.ss, &self.z, self.dt, |x| sol.human_action(x), robot)?,
        };
        self.tick += 1;
        Ok(())
    }
}

fn empty_trajectory(solution: &GameSolution, capacity: usize) -> Trajectory {
    Trajectory {
        controller: solution.controller.clone(),
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        u_h: Vec::with_capacity(capacity),
        u_r: Vec::with_capacity(capacity),
        u_h_nominal: Vec::with_capacity(capacity),
        human_target: solution.human_target.clone(),
        robot_target: solution.robot_target.clone(),
        z_ref: solution.z_ref.clone(),
    }
}

fn push(traj: &mut Trajectory, s: Sample) {
    traj.times.push(s.time);
    traj.states.push(s.state);
    traj.u_h.push(s.u_h);
    traj.u_r.push(s.u_r);
    traj.u_h_nominal.push(s.u_h_nominal);
}

/// Runs a scenario with already-synthesized gains.
pub fn run_with_solution(
    scenario: &Scenario,
    ss: StateSpace,
    solution: GameSolution,
    mut human_source: Option<&mut dyn HumanForceSource>,
) -> Result<Trajectory, SimulationError> {
    let samples = scenario.n_samples();
    let mut traj = empty_trajectory(&solution, samples);
    let mut cl = ClosedLoop::new(ss, solution, &scenario.initial_state, scenario.dt)?;
    for i in 0..samples {
        let external = match human_source.as_deref_mut() {
            Some(src) => src.force(i, cl.time(), &cl.state()),
            None => None,
        };
        cl.check_force(external.as_ref())?;
        push(&mut traj, cl.sample(external.as_ref()));
        if i + 1 < samples {
            cl.advance(external.as_ref())?;
        }
    }
    Ok(traj)
}

/// Synthesizes the scenario's controller and integrates the closed loop.
pub fn run_closed_loop(
    scenario: &Scenario,
    registry: &ControllerRegistry,
    human_source: Option<&mut dyn HumanForceSource>,
) -> Result<Trajectory, SimulationError> {
    let (ss, solution) = scenario.synthesize(registry)?;
    run_with_solution(scenario, ss, solution, human_source)
}

/// Same experiment with the robot feedback folded into the impedance: the
/// modified plant is driven by the modeled human and a constant robot force.
/// The recorded `u_r` is that constant force.
pub fn run_impedance_equivalent(scenario: &Scenario, solution: &GameSolution) -> Result<Trajectory, SimulationError> {
    let (params, force) = impedance_equivalent(&scenario.plant, &solution.k_r, &solution.robot_target)?;
    let ss = build_state_space(&params)?;
    let samples = scenario.n_samples();
    let mut traj = empty_trajectory(solution, samples);
    let mut z = scenario.initial_state.stacked();
    for i in 0..samples {
        let u_h = solution.human_action(&z);
        push(
            &mut traj,
            Sample {
                tick: i as u64,
                time: i as f64 * scenario.dt,
                state: State::from_stacked(&z)?,
                u_h: u_h.clone(),
                u_r: force.clone(),
                u_h_nominal: u_h,
            },
        );
        if i + 1 < samples {
            z = integrate(&ss, &z, scenario.dt, |x| solution.human_action(x), |_| force.clone())?;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    Human,
    Robot,
}

/// Windowed costs of both agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub j_h: f64,
    pub j_r: f64,
    pub window: (f64, f64),
}

fn check_window(times: &[f64], window: (f64, f64)) -> Result<(), SimulationError> {
    let (a, b) = window;
    let first = *times.first().unwrap_or(&0.0);
    let last = *times.last().unwrap_or(&0.0);
    let slack = 1e-9 * (1.0 + last.abs());
    if times.is_empty() || !(a <= b) || a < first - slack || b > last + slack {
        return Err(SimulationError::WindowOutOfRange { start: a, end: b, first, last });
    }
    Ok(())
}

/// Integral over `[a, b]` of the piecewise-linear interpolant through the
/// samples. On grid-aligned windows this is the trapezoidal rule.
fn integrate_samples(times: &[f64], values: &[f64], (a, b): (f64, f64)) -> f64 {
    let mut total = 0.0;
    for i in 0..times.len().saturating_sub(1) {
        let (t0, t1) = (times[i], times[i + 1]);
        let lo = a.max(t0);
        let hi = b.min(t1);
        if hi <= lo {
            continue;
        }
        let (v0, v1) = (values[i], values[i + 1]);
        let at = |t: f64| if t == t0 { v0 } else if t == t1 { v1 } else { v0 + (v1 - v0) * (t - t0) / (t1 - t0) };
        total += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    total
}

fn quad(e: &Vector, q: &Matrix) -> f64 {
    e.dot(&(q * e))
}

/// Windowed cost of one agent:
/// `int (z - z_h)^T Q_.h (z - z_h) + (z - z_r)^T Q_.r (z - z_r) + u^T R u dt`
/// with `u` the agent's own recorded effort.
pub fn agent_cost(
    traj: &Trajectory,
    objective: &AgentObjective,
    refs: &References,
    window: (f64, f64),
    agent: Agent,
) -> Result<f64, SimulationError> {
    check_window(&traj.times, window)?;
    let efforts = match agent {
        Agent::Human => &traj.u_h,
        Agent::Robot => &traj.u_r,
    };
    let integrand: Vec<f64> = traj
        .states
        .iter()
        .zip(efforts)
        .map(|(s, u)| {
            let z = s.stacked();
            quad(&(&z - &refs.human), &objective.q_on_href)
                + quad(&(&z - &refs.robot), &objective.q_on_rref)
                + quad(u, &objective.r_self)
        })
        .collect();
    Ok(integrate_samples(&traj.times, &integrand, window))
}

pub fn cost_report(traj: &Trajectory, scenario: &Scenario, window: (f64, f64)) -> Result<CostReport, SimulationError> {
    Ok(CostReport {
        j_h: agent_cost(traj, &scenario.human, &scenario.refs, window, Agent::Human)?,
        j_r: agent_cost(traj, &scenario.robot, &scenario.refs, window, Agent::Robot)?,
        window,
    })
}

/// `(1 / max ||u_h,n||) int ||u_h - u_h,n|| dt` over the window.
pub fn effort_error(traj: &Trajectory, window: (f64, f64)) -> Result<f64, SimulationError> {
    check_window(&traj.times, window)?;
    let (a, b) = window;
    let slack = 1e-9 * (1.0 + b.abs());
    let mut normalizer = 0.0f64;
    for (t, u) in traj.times.iter().zip(&traj.u_h_nominal) {
        if *t >= a - slack && *t <= b + slack {
            normalizer = normalizer.max(u.norm());
        }
    }
    // windows falling between two samples
    let norms: Vec<f64> = traj.u_h_nominal.iter().map(|u| u.norm()).collect();
    for t in [a, b] {
        if let Some(i) = traj.times.windows(2).position(|w| w[0] <= t && t <= w[1]) {
            let (t0, t1) = (traj.times[i], traj.times[i + 1]);
            let v = norms[i] + (norms[i + 1] - norms[i]) * (t - t0) / (t1 - t0);
            normalizer = normalizer.max(v);
        }
    }
    if !(normalizer >= NORMALIZER_MIN) {
        return Err(SimulationError::DegenerateNormalizer(normalizer));
    }
    let gap: Vec<f64> = traj.u_h.iter().zip(&traj.u_h_nominal).map(|(u, n)| (u - n).norm()).collect();
    Ok(integrate_samples(&traj.times, &gap, window) / normalizer)
}

/// Scenario parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    /// Multiplies the robot's weight on its own reference.
    QrrScale,
    /// Robot effort weight, set to `value * I`.
    Rr,
}

impl SweepParam {
    pub const ALL: [SweepParam; 3] = [SweepParam::Alpha, SweepParam::QrrScale, SweepParam::Rr];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::QrrScale => "q_rr_scale",
            SweepParam::Rr => "r_r",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario, SimulationError> {
        let mut s = base.clone();
        match self {
            SweepParam::Alpha => s.alpha = value,
            SweepParam::QrrScale => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(SimulationError::InvalidScenario(format!("q_rr_scale must be non-negative, got {value}")));
                }
                s.robot.q_on_rref = &base.robot.q_on_rref * value;
            }
            SweepParam::Rr => {
                let m = base.robot.r_self.nrows();
                s.robot.r_self = Matrix::identity(m, m) * value;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown sweep parameter `{s}` (expected alpha, q_rr_scale or r_r)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    pub costs: CostReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub value: f64,
    pub outcome: Result<SweepRun, SimulationError>,
}

/// One full run per value, in input order. Failures are recorded per value.
pub fn sweep(
    base: &Scenario,
    param: SweepParam,
    values: &[f64],
    registry: &ControllerRegistry,
) -> Result<Vec<SweepEntry>, SimulationError> {
    if values.is_empty() {
        return Err(SimulationError::EmptySweep);
    }
    Ok(values
        .par_iter()
        .map(|&value| {
            let outcome = param.apply(base, value).and_then(|scenario| {
                let trajectory = run_closed_loop(&scenario, registry, None)?;
                let costs = cost_report(&trajectory, &scenario, scenario.effective_window())?;
                Ok(SweepRun { scenario, trajectory, costs })
            });
            SweepEntry { value, outcome }
        })
        .collect())
}

//! Gain synthesis for the three controller families.

use crate::dynamics::StateSpace;
use crate::linalg::{self, Matrix, Vector};
use crate::riccati::{self, CareProblem, CareSolution, CoupledOptions, CrossEffort};

use super::objective::{cgt_aggregate, shared_reference, AgentObjective, References};
use super::ControllerError;

/// Everything a controller needs to produce gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GameProblem {
    pub ss: StateSpace,
    pub human: AgentObjective,
    pub robot: AgentObjective,
    pub refs: References,
    pub alpha: f64,
    pub cross: CrossEffort,
}

impl GameProblem {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let ns = self.ss.n_states();
        for (who, obj, inputs) in [
            ("human", &self.human, self.ss.human_inputs()),
            ("robot", &self.robot, self.ss.robot_inputs()),
        ] {
            obj.validate()?;
            if obj.n_states() != ns {
                return Err(ControllerError::Dimension(format!("{who} state weights must be {ns}x{ns}")));
            }
            if obj.n_inputs() != inputs {
                return Err(ControllerError::Dimension(format!("{who} effort weight must be {inputs}x{inputs}")));
            }
        }
        if self.refs.human.len() != ns || self.refs.robot.len() != ns {
            return Err(ControllerError::Dimension(format!("references must have {ns} entries")));
        }
        Ok(())
    }
}

/// A Riccati solution backing part of a [`GameSolution`].
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiRecord {
    pub label: &'static str,
    pub p: Matrix,
    pub residual: f64,
}

/// Gains for both agents plus the references each one feeds back on.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    /// Registry name of the controller that produced this solution.
    pub controller: String,
    pub k_h: Matrix,
    pub k_r: Matrix,
    /// Agreed reference (cooperative controllers only).
    pub z_ref: Option<Vector>,
    /// Reference the human feedback acts on.
    pub human_target: Vector,
    /// Reference the robot feedback acts on.
    pub robot_target: Vector,
    pub riccati: Vec<RiccatiRecord>,
}

impl GameSolution {
    /// `A - B_h K_h - B_r K_r`
    pub fn closed_loop(&self, ss: &StateSpace) -> Matrix {
        &ss.a - &ss.b_h * &self.k_h - &ss.b_r * &self.k_r
    }

    pub fn closed_loop_eigenvalues(&self, ss: &StateSpace) -> Vec<nalgebra::Complex<f64>> {
        linalg::eigenvalues(&self.closed_loop(ss))
    }

    pub fn human_action(&self, z: &Vector) -> Vector {
        -(&self.k_h * (z - &self.human_target))
    }

    pub fn robot_action(&self, z: &Vector) -> Vector {
        -(&self.k_r * (z - &self.robot_target))
    }

    /// Equilibrium of the closed loop with both feedbacks active:
    /// `(A - B_h K_h - B_r K_r) z* = -(B_h K_h t_h + B_r K_r t_r)`.
    pub fn steady_state(&self, ss: &StateSpace) -> Result<Vector, ControllerError> {
        let rhs = -(&ss.b_h * &self.k_h * &self.human_target + &ss.b_r * &self.k_r * &self.robot_target);
        self.closed_loop(ss)
            .lu()
            .solve(&rhs)
            .ok_or_else(|| ControllerError::SingularWeight("closed loop has no unique equilibrium".into()))
    }
}

/// Cooperative controller: one Riccati equation on the aggregated cost with
/// stacked input `[B_h B_r]`; both agents track the agreed reference.
pub fn synthesize_cgt(problem: &GameProblem) -> Result<GameSolution, ControllerError> {
    problem.validate()?;
    let agg = cgt_aggregate(problem.alpha, &problem.human, &problem.robot)?;
    let shared = shared_reference(&agg, &problem.refs)?;
    let b = problem.ss.stacked_input();
    let sol = riccati::solve_care(&CareProblem {
        a: problem.ss.a.clone(),
        b,
        q: agg.q_gt.clone(),
        r: agg.r_gt.clone(),
    })?;
    let m_h = problem.ss.human_inputs();
    let m_r = problem.ss.robot_inputs();
    let k_h = sol.gain.rows(0, m_h).into_owned();
    let k_r = sol.gain.rows(m_h, m_r).into_owned();
    Ok(GameSolution {
        controller: "cgt".into(),
        k_h,
        k_r,
        human_target: shared.z_ref.clone(),
        robot_target: shared.z_ref.clone(),
        z_ref: Some(shared.z_ref),
        riccati: vec![RiccatiRecord { label: "joint", p: sol.p, residual: sol.residual }],
    })
}

/// Single-agent Riccati solve; an agent with no state weight exerts no effort.
fn single_agent(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<CareSolution, ControllerError> {
    if q.iter().all(|x| *x == 0.0) {
        return Ok(CareSolution {
            p: Matrix::zeros(a.nrows(), a.nrows()),
            gain: Matrix::zeros(b.ncols(), a.nrows()),
            residual: 0.0,
        });
    }
    Ok(riccati::solve_care(&CareProblem { a: a.clone(), b: b.clone(), q: q.clone(), r: r.clone() })?)
}

/// Independent regulators: each agent ignores the other's input and tracks its
/// own reference, with state weights aggregated as in the cooperative case.
pub fn synthesize_lqr(problem: &GameProblem) -> Result<GameSolution, ControllerError> {
    problem.validate()?;
    let agg = cgt_aggregate(problem.alpha, &problem.human, &problem.robot)?;
    let ss = &problem.ss;
    let h = single_agent(&ss.a, &ss.b_h, &agg.q_h_agg, &problem.human.r_self)?;
    let r = single_agent(&ss.a, &ss.b_r, &agg.q_r_agg, &problem.robot.r_self)?;
    Ok(GameSolution {
        controller: "lqr".into(),
        k_h: h.gain,
        k_r: r.gain,
        z_ref: None,
        human_target: problem.refs.human.clone(),
        robot_target: problem.refs.robot.clone(),
        riccati: vec![
            RiccatiRecord { label: "human", p: h.p, residual: h.residual },
            RiccatiRecord { label: "robot", p: r.p, residual: r.residual },
        ],
    })
}

/// Feedback Nash controller from the coupled Riccati equations.
pub fn synthesize_ncgt(problem: &GameProblem) -> Result<GameSolution, ControllerError> {
    problem.validate()?;
    let agg = cgt_aggregate(problem.alpha, &problem.human, &problem.robot)?;
    let opts = CoupledOptions { cross: problem.cross.clone(), ..CoupledOptions::default() };
    let nash = riccati::solve_coupled_care(
        &problem.ss,
        &agg.q_h_agg,
        &agg.q_r_agg,
        &problem.human.r_self,
        &problem.robot.r_self,
        &opts,
    )?;
    Ok(GameSolution {
        controller: "ncgt".into(),
        k_h: nash.human.gain,
        k_r: nash.robot.gain,
        z_ref: None,
        human_target: problem.refs.human.clone(),
        robot_target: problem.refs.robot.clone(),
        riccati: vec![
            RiccatiRecord { label: "human", p: nash.human.p, residual: nash.human.residual },
            RiccatiRecord { label: "robot", p: nash.robot.p, residual: nash.robot.residual },
        ],
    })
}

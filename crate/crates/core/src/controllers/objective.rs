//! Agent objectives, the cooperative aggregation of the two costs, and the
//! agreed reference both agents track under cooperation.

use crate::linalg::{self, Matrix, Vector};

use super::ControllerError;

/// One agent's quadratic cost: weights on the distance to the human
/// reference, to the robot reference, and on its own effort.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentObjective {
    pub q_on_href: Matrix,
    pub q_on_rref: Matrix,
    pub r_self: Matrix,
}

impl AgentObjective {
    pub fn new(q_on_href: Matrix, q_on_rref: Matrix, r_self: Matrix) -> Result<Self, ControllerError> {
        let obj = Self { q_on_href, q_on_rref, r_self };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let ns = self.q_on_href.nrows();
        if self.q_on_href.shape() != (ns, ns) || self.q_on_rref.shape() != (ns, ns) || ns == 0 {
            return Err(ControllerError::InvalidObjective("state weights must be square and equal-sized".into()));
        }
        for (name, q) in [("q_on_href", &self.q_on_href), ("q_on_rref", &self.q_on_rref)] {
            if !linalg::all_finite(q) || !linalg::is_positive_semidefinite(q) {
                return Err(ControllerError::InvalidObjective(format!("{name} must be symmetric positive semi-definite")));
            }
        }
        if !linalg::all_finite(&self.r_self) || !self.r_self.is_square() || !linalg::is_positive_definite(&self.r_self) {
            return Err(ControllerError::InvalidObjective("r_self must be symmetric positive definite".into()));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.q_on_href.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.r_self.nrows()
    }
}

/// The two agents' target states.
#[derive(Debug, Clone, PartialEq)]
pub struct References {
    pub human: Vector,
    pub robot: Vector,
}

impl References {
    pub fn new(human: Vector, robot: Vector) -> Result<Self, ControllerError> {
        if human.len() != robot.len() {
            return Err(ControllerError::Dimension("reference lengths differ".into()));
        }
        if !human.iter().chain(robot.iter()).all(|x| x.is_finite()) {
            return Err(ControllerError::Dimension("references must be finite".into()));
        }
        Ok(Self { human, robot })
    }

    /// Set-point references `[x; 0]` from two positions.
    pub fn set_points(human_pos: &Vector, robot_pos: &Vector) -> Result<Self, ControllerError> {
        let lift = |p: &Vector| {
            let mut z = Vector::zeros(2 * p.len());
            z.rows_mut(0, p.len()).copy_from(p);
            z
        };
        Self::new(lift(human_pos), lift(robot_pos))
    }
}

/// Weighted combination `alpha J_h + (1 - alpha) J_r` in tracking form.
#[derive(Debug, Clone, PartialEq)]
pub struct CgtAggregate {
    pub alpha: f64,
    pub q_gt: Matrix,
    pub r_gt: Matrix,
    /// Weight collected on the human reference.
    pub q_h_agg: Matrix,
    /// Weight collected on the robot reference.
    pub q_r_agg: Matrix,
}

pub fn check_alpha(alpha: f64) -> Result<(), ControllerError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(ControllerError::AlphaDomain(alpha))
    }
}

/// Collects the cooperative weights:
/// `Q_h = a Q_hh + (1-a) Q_rh`, `Q_r = a Q_hr + (1-a) Q_rr`, `Q_gt = Q_h + Q_r`,
/// `R_gt = blockdiag(a R_h, (1-a) R_r)`.
pub fn cgt_aggregate(alpha: f64, human: &AgentObjective, robot: &AgentObjective) -> Result<CgtAggregate, ControllerError> {
    check_alpha(alpha)?;
    if human.n_states() != robot.n_states() {
        return Err(ControllerError::Dimension("human and robot objectives have different state sizes".into()));
    }
    let beta = 1.0 - alpha;
    let q_h_agg = &human.q_on_href * alpha + &robot.q_on_href * beta;
    let q_r_agg = &human.q_on_rref * alpha + &robot.q_on_rref * beta;
    let q_gt = &q_h_agg + &q_r_agg;
    let r_gt = linalg::block_diag(&(&human.r_self * alpha), &(&robot.r_self * beta));
    Ok(CgtAggregate { alpha, q_gt, r_gt, q_h_agg, q_r_agg })
}

/// Agreed reference plus the number of state directions `Q_gt` leaves unweighted
/// (those components are set to zero).
#[derive(Debug, Clone, PartialEq)]
pub struct SharedReference {
    pub z_ref: Vector,
    pub free_directions: usize,
}

/// `z_ref = Q_gt^-1 (Q_h z_ref_h + Q_r z_ref_r)`, falling back to the
/// pseudo-inverse when `Q_gt` is singular.
pub fn shared_reference(agg: &CgtAggregate, refs: &References) -> Result<SharedReference, ControllerError> {
    let ns = agg.q_gt.nrows();
    if refs.human.len() != ns || refs.robot.len() != ns {
        return Err(ControllerError::Dimension(format!("references must have {ns} entries")));
    }
    let rhs = &agg.q_h_agg * &refs.human + &agg.q_r_agg * &refs.robot;
    if linalg::rcond(&agg.q_gt) >= 1e-12 {
        // one-sided weighting: return that reference exactly, without round-off
        let zero = |m: &Matrix| m.iter().all(|x| *x == 0.0);
        if zero(&agg.q_r_agg) {
            return Ok(SharedReference { z_ref: refs.human.clone(), free_directions: 0 });
        }
        if zero(&agg.q_h_agg) {
            return Ok(SharedReference { z_ref: refs.robot.clone(), free_directions: 0 });
        }
        let z_ref = agg
            .q_gt
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| ControllerError::SingularWeight("q_gt".into()))?;
        return Ok(SharedReference { z_ref, free_directions: 0 });
    }
    let (pinv, free) = linalg::pseudo_inverse(&agg.q_gt, 1e-12);
    let z_ref = pinv * &rhs;
    if (&agg.q_gt * &z_ref - &rhs).norm() > 1e-9 * (1.0 + rhs.norm()) {
        return Err(ControllerError::SingularWeight(
            "q_gt is singular and leaves a weighted reference component undetermined".into(),
        ));
    }
    Ok(SharedReference { z_ref, free_directions: free })
}

/// `u = -K (z - ref)`
pub fn control_action(gain: &Matrix, z: &Vector, reference: &Vector) -> Result<Vector, ControllerError> {
    if gain.ncols() != z.len() || z.len() != reference.len() {
        return Err(ControllerError::Dimension(format!(
            "gain is {}x{}, state has {}, reference has {}",
            gain.nrows(),
            gain.ncols(),
            z.len(),
            reference.len()
        )));
    }
    Ok(-(gain * (z - reference)))
}

//! Impedance-modeled plant: construction of the two-input state-space model
//! `z' = A z + B_h u_h + B_r u_r` and its fixed-step integration.
//!
//! The state stacks displacement and velocity, `z = [dx; v]`, so a plant with
//! `n` Cartesian degrees of freedom has `2n` states and two `n`-dimensional
//! force inputs (human and robot).

use thiserror::Error;

use crate::linalg::{self, Matrix, Vector};

/// Inertia matrices with a reciprocal condition number below this are rejected.
pub const INERTIA_RCOND_MIN: f64 = 1e-12;

/// Any state entry beyond this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Default integration step in seconds.
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid impedance parameters: {0}")]
    InvalidParams(String),
    #[error("inertia matrix is singular (reciprocal condition {rcond:.3e} < {INERTIA_RCOND_MIN:e})")]
    SingularInertia { rcond: f64 },
    #[error("inertia matrix is not positive definite")]
    IndefiniteInertia,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("state diverged (non-finite or |z| > {DIVERGENCE_LIMIT:e})")]
    NonFinite,
}

/// Desired inertia, damping, and stiffness of the virtual mass-spring-damper.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceParams {
    m: Matrix,
    d: Matrix,
    k: Matrix,
}

impl ImpedanceParams {
    pub fn new(m: Matrix, d: Matrix, k: Matrix) -> Result<Self, DynamicsError> {
        let n = m.nrows();
        if n == 0 {
            return Err(DynamicsError::InvalidParams("at least one degree of freedom is required".into()));
        }
        for (name, mat) in [("inertia", &m), ("damping", &d), ("stiffness", &k)] {
            if mat.shape() != (n, n) {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} must be {n}x{n}, got {}x{}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if !linalg::all_finite(mat) {
                return Err(DynamicsError::InvalidParams(format!("{name} has non-finite entries")));
            }
        }
        if !linalg::is_symmetric(&m, 1e-12) {
            return Err(DynamicsError::InvalidParams("inertia must be symmetric".into()));
        }
        if d.diagonal().iter().any(|x| *x < 0.0) {
            return Err(DynamicsError::InvalidParams("damping diagonal must be non-negative".into()));
        }
        Ok(Self { m, d, k })
    }

    /// Isotropic parameters: `m I`, `d I`, `k I` over `n` degrees of freedom.
    pub fn isotropic(n: usize, m: f64, d: f64, k: f64) -> Result<Self, DynamicsError> {
        let eye = Matrix::identity(n, n);
        Self::new(&eye * m, &eye * d, &eye * k)
    }

    pub fn dof(&self) -> usize {
        self.m.nrows()
    }

    pub fn inertia(&self) -> &Matrix {
        &self.m
    }

    pub fn damping(&self) -> &Matrix {
        &self.d
    }

    pub fn stiffness(&self) -> &Matrix {
        &self.k
    }
}

/// Linear plant with separate human and robot input matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b_h: Matrix,
    pub b_r: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, b_h: Matrix, b_r: Matrix) -> Result<Self, DynamicsError> {
        let ns = a.nrows();
        if !a.is_square() || ns == 0 {
            return Err(DynamicsError::Dimension("system matrix must be square and non-empty".into()));
        }
        if b_h.nrows() != ns || b_r.nrows() != ns || b_h.ncols() == 0 || b_r.ncols() == 0 {
            return Err(DynamicsError::Dimension(format!(
                "input matrices must have {ns} rows and at least one column"
            )));
        }
        Ok(Self { a, b_h, b_r })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn human_inputs(&self) -> usize {
        self.b_h.ncols()
    }

    pub fn robot_inputs(&self) -> usize {
        self.b_r.ncols()
    }

    /// `[B_h B_r]`, the input matrix of the joint control `u = [u_h; u_r]`.
    pub fn stacked_input(&self) -> Matrix {
        linalg::hstack(&self.b_h, &self.b_r)
    }

    pub fn derivative(&self, z: &Vector, u_h: &Vector, u_r: &Vector) -> Vector {
        &self.a * z + &self.b_h * u_h + &self.b_r * u_r
    }
}

/// Displacement from the spring rest point and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub pos: Vector,
    pub vel: Vector,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        Self { pos: Vector::zeros(n), vel: Vector::zeros(n) }
    }

    pub fn new(pos: Vector, vel: Vector) -> Result<Self, DynamicsError> {
        if pos.len() != vel.len() {
            return Err(DynamicsError::Dimension("position and velocity lengths differ".into()));
        }
        Ok(Self { pos, vel })
    }

    pub fn dof(&self) -> usize {
        self.pos.len()
    }

    /// Splits a stacked `[pos; vel]` vector of even length.
    pub fn from_stacked(z: &Vector) -> Result<Self, DynamicsError> {
        if !z.len().is_multiple_of(2) || z.is_empty() {
            return Err(DynamicsError::Dimension(format!("stacked state length {} is not even", z.len())));
        }
        let n = z.len() / 2;
        Ok(Self { pos: z.rows(0, n).into_owned(), vel: z.rows(n, n).into_owned() })
    }

    pub fn stacked(&self) -> Vector {
        let n = self.dof();
        let mut z = Vector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(&self.pos);
        z.rows_mut(n, n).copy_from(&self.vel);
        z
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(self.vel.iter()).all(|x| x.is_finite())
    }
}

/// Builds `A = [[0, I], [-M^-1 K, -M^-1 D]]` and `B_h = B_r = [[0], [M^-1]]`.
pub fn build_state_space(params: &ImpedanceParams) -> Result<StateSpace, DynamicsError> {
    let n = params.dof();
    let rc = linalg::rcond(&params.m);
    if !(rc >= INERTIA_RCOND_MIN) {
        return Err(DynamicsError::SingularInertia { rcond: rc });
    }
    if !linalg::is_positive_definite(&params.m) {
        return Err(DynamicsError::IndefiniteInertia);
    }
    let m_inv = params
        .m
        .clone()
        .try_inverse()
        .ok_or(DynamicsError::SingularInertia { rcond: rc })?;

    let mut a = Matrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-&m_inv * &params.k));
    a.view_mut((n, n), (n, n)).copy_from(&(-&m_inv * &params.d));

    let mut b = Matrix::zeros(2 * n, n);
    b.view_mut((n, 0), (n, n)).copy_from(&m_inv);

    Ok(StateSpace { a, b_h: b.clone(), b_r: b })
}

/// One classical fourth-order Runge-Kutta step of `z' = f(z)`.
pub fn rk4_step<F>(z: &Vector, dt: f64, f: F) -> Vector
where
    F: Fn(&Vector) -> Vector,
{
    let k1 = f(z);
    let k2 = f(&(z + &k1 * (0.5 * dt)));
    let k3 = f(&(z + &k2 * (0.5 * dt)));
    let k4 = f(&(z + &k3 * dt));
    z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

pub(crate) fn check_step(dt: f64) -> Result<(), DynamicsError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::InvalidStep(dt))
    }
}

pub(crate) fn guard(z: Vector) -> Result<Vector, DynamicsError> {
    if z.iter().all(|x| x.is_finite() && x.abs() <= DIVERGENCE_LIMIT) {
        Ok(z)
    } else {
        Err(DynamicsError::NonFinite)
    }
}

/// Advances a stacked state by `dt` with both forces held constant over the step.
pub fn step_vector(
    ss: &StateSpace,
    z: &Vector,
    u_h: &Vector,
    u_r: &Vector,
    dt: f64,
) -> Result<Vector, DynamicsError> {
    check_step(dt)?;
    if z.len() != ss.n_states() || u_h.len() != ss.human_inputs() || u_r.len() != ss.robot_inputs() {
        return Err(DynamicsError::Dimension("state or input length does not match the plant".into()));
    }
    if !z.iter().chain(u_h.iter()).chain(u_r.iter()).all(|x| x.is_finite()) {
        return Err(DynamicsError::NonFinite);
    }
    let forcing = &ss.b_h * u_h + &ss.b_r * u_r;
    guard(rk4_step(z, dt, |x| &ss.a * x + &forcing))
}

/// Advances a [`State`] by `dt` under constant human and robot forces.
pub fn step(ss: &StateSpace, z: &State, u_h: &Vector, u_r: &Vector, dt: f64) -> Result<State, DynamicsError> {
    let next = step_vector(ss, &z.stacked(), u_h, u_r, dt)?;
    State::from_stacked(&next)
}

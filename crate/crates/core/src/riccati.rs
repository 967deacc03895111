//! Lyapunov and algebraic Riccati equation solvers.
//!
//! * [`solve_lyapunov`]: `A^T X + X A + Q = 0` by a direct Kronecker-product solve.
//! * [`solve_care`]: stabilizing solution of `A^T P + P A - P B R^-1 B^T P + Q = 0`
//!   by Newton-Kleinman iteration, started from a Bass-type stabilizing gain.
//! * [`solve_coupled_care`]: feedback Nash equilibrium of the two-player game,
//!   found by damped Gauss-Seidel best-response iteration.

use nalgebra::{Cholesky, Dyn};
use thiserror::Error;

use crate::compensated::Dot2;
use crate::dynamics::StateSpace;
use crate::lattice;
use crate::linalg::{self, Matrix, Vector};

/// Largest state dimension handled by the dense Kronecker Lyapunov kernel.
pub const MAX_KRONECKER_STATES: usize = 20;

/// Closed-loop eigenvalues must lie left of `-STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-10;

const LYAPUNOV_HURWITZ_MARGIN: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
const CARE_REL_TOL: f64 = 1e-9;
const NEWTON_STEP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state dimension {0} exceeds the dense solver limit of {MAX_KRONECKER_STATES}")]
    TooLarge(usize),
    #[error("weight {0} must be symmetric positive definite")]
    IndefiniteWeight(&'static str),
    #[error("weight {0} must be symmetric positive semi-definite")]
    InvalidWeight(&'static str),
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { abscissa: f64 },
    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),
    #[error("no convergence after {iterations} iterations (residuals {residuals:?}){detail}")]
    NoConvergence { iterations: usize, residuals: Vec<f64>, detail: String },
}

/// Continuous-time algebraic Riccati problem `(A, B, Q, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CareProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: Matrix,
    /// `K = R^-1 B^T P`
    pub gain: Matrix,
    /// Frobenius norm of the Riccati residual at `p`.
    pub residual: f64,
}

/// Solves `a^T X + X a + q = 0` for Hurwitz `a`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix, RiccatiError> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(RiccatiError::Dimension("lyapunov: a and q must be square of equal size".into()));
    }
    if n > MAX_KRONECKER_STATES {
        return Err(RiccatiError::TooLarge(n));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let abscissa = linalg::spectral_abscissa(a);
    if !(abscissa < -LYAPUNOV_HURWITZ_MARGIN) {
        return Err(RiccatiError::NotHurwitz { abscissa });
    }

    // vec(A^T X + X A) = (I (x) A^T + A^T (x) I) vec(X), column-major vec.
    let eye = Matrix::identity(n, n);
    let at = a.transpose();
    let op = linalg::kron(&eye, &at) + linalg::kron(&at, &eye);
    let rhs = -Matrix::from_column_slice(n * n, 1, q.as_slice());
    let lu = op.clone().lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or(RiccatiError::NotHurwitz { abscissa })?;
    // one step of iterative refinement
    let correction = lu.solve(&(&rhs - &op * &x)).unwrap_or_else(|| Matrix::zeros(n * n, 1));
    x += correction;

    let x = Matrix::from_column_slice(n, n, x.as_slice());
    if linalg::is_symmetric(q, 1e-14) {
        Ok(linalg::symmetrize(&x))
    } else {
        Ok(x)
    }
}

/// Frobenius norm of `A^T P + P A - P S P + Q` with `S = B R^-1 B^T`.
pub fn care_residual(a: &Matrix, s: &Matrix, q: &Matrix, p: &Matrix) -> f64 {
    (a.transpose() * p + p * a - p * s * p + q).norm()
}

fn validate_care(prob: &CareProblem) -> Result<Cholesky<f64, Dyn>, RiccatiError> {
    let n = prob.a.nrows();
    let m = prob.b.ncols();
    if !prob.a.is_square() || n == 0 {
        return Err(RiccatiError::Dimension("a must be square and non-empty".into()));
    }
    if prob.b.nrows() != n || m == 0 {
        return Err(RiccatiError::Dimension(format!("b must be {n} x m with m >= 1")));
    }
    if prob.q.shape() != (n, n) {
        return Err(RiccatiError::Dimension(format!("q must be {n}x{n}")));
    }
    if prob.r.shape() != (m, m) {
        return Err(RiccatiError::Dimension(format!("r must be {m}x{m}")));
    }
    if n > MAX_KRONECKER_STATES {
        return Err(RiccatiError::TooLarge(n));
    }
    if !linalg::is_positive_semidefinite(&prob.q) {
        return Err(RiccatiError::InvalidWeight("q"));
    }
    if !linalg::is_positive_definite(&prob.r) {
        return Err(RiccatiError::IndefiniteWeight("r"));
    }
    linalg::symmetrize(&prob.r)
        .cholesky()
        .ok_or(RiccatiError::IndefiniteWeight("r"))
}

/// Riccati defect `A^T P + P A - P B R^-1 B^T P + Q` and gain `R^-1 B^T P`,
/// both accumulated in twice working precision. `S = B R^-1 B^T` is never
/// rounded: for large `P`, rounding `S` alone moves the defect by
/// `eps |S| |P|^2`, which can dwarf the tolerance. `p` must be exactly symmetric.
fn care_defect(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, chol: &Cholesky<f64, Dyn>, p: &Matrix) -> (Matrix, Matrix) {
    let (n, m) = b.shape();
    // G = B^T P as hi + lo
    let mut g_hi = Matrix::zeros(m, n);
    let mut g_lo = Matrix::zeros(m, n);
    for l in 0..m {
        for j in 0..n {
            let mut d = Dot2::new();
            for k in 0..n {
                d.add_product(b[(k, l)], p[(k, j)]);
            }
            (g_hi[(l, j)], g_lo[(l, j)]) = d.split();
        }
    }
    // Y = R^-1 G by iterative refinement; kept as an unevaluated sum of parts
    let mut y = vec![chol.solve(&g_hi)];
    for _ in 0..2 {
        let mut rest = Matrix::zeros(m, n);
        for l in 0..m {
            for j in 0..n {
                let mut d = Dot2::new();
                d.add(g_hi[(l, j)]);
                d.add(g_lo[(l, j)]);
                for part in &y {
                    for t in 0..m {
                        d.add_product(-r[(l, t)], part[(t, j)]);
                    }
                }
                rest[(l, j)] = d.value();
            }
        }
        y.push(chol.solve(&rest));
    }

    let mut defect = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut d = Dot2::new();
            d.add(q[(i, j)]);
            for k in 0..n {
                d.add_product(a[(k, i)], p[(k, j)]);
                d.add_product(p[(i, k)], a[(k, j)]);
            }
            // P B = G^T since P is symmetric
            for l in 0..m {
                for part in &y {
                    d.add_product(-g_hi[(l, i)], part[(l, j)]);
                    d.add_product(-g_lo[(l, i)], part[(l, j)]);
                }
            }
            defect[(i, j)] = d.value();
        }
    }
    let mut gain = Matrix::zeros(m, n);
    for l in 0..m {
        for j in 0..n {
            let mut d = Dot2::new();
            for part in &y {
                d.add(part[(l, j)]);
            }
            gain[(l, j)] = d.value();
        }
    }
    (linalg::symmetrize(&defect), gain)
}

/// Stabilizing feedback for `(a, b)` in the style of Bass: with
/// `beta > max |Re(lambda)|`, solve `(A + beta I) Z + Z (A + beta I)^T = 2 B B^T`
/// and take `K = B^T Z^+`. Returns zero when `a` is already Hurwitz.
fn initial_stabilizing_gain(a: &Matrix, b: &Matrix) -> Result<Matrix, RiccatiError> {
    let n = a.nrows();
    if linalg::is_hurwitz(a, STABILITY_MARGIN) {
        return Ok(Matrix::zeros(b.ncols(), n));
    }
    let shift = linalg::eigenvalues(a)
        .iter()
        .map(|l| l.re.abs())
        .fold(0.0, f64::max)
        + 0.5;
    let shifted = -(a + Matrix::identity(n, n) * shift).transpose();
    let z = solve_lyapunov(&shifted, &(b * b.transpose() * 2.0))?;
    let (z_pinv, _) = linalg::pseudo_inverse(&z, 1e-12);
    let k0 = b.transpose() * z_pinv;
    if linalg::is_hurwitz(&(a - b * &k0), STABILITY_MARGIN) {
        Ok(k0)
    } else {
        Err(RiccatiError::NoStabilizingSolution("(a, b) is not stabilizable".into()))
    }
}

/// Largest number of free entries of `P` the rounding polish works on.
const MAX_POLISH_UNKNOWNS: usize = 36;

/// When `P` is large, even the correctly rounded solution can miss the
/// residual tolerance: a one-ulp change of an entry moves the defect by
/// `ulp |A - S P|`. The defect is near-linear in ulp-sized moves, so choosing
/// the `f64` matrix with the smallest defect is a closest-vector problem on the
/// lattice spanned by the ulp-scaled Jacobian.
fn polish_rounding(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    chol: &Cholesky<f64, Dyn>,
    p: &Matrix,
    tol: f64,
) -> Option<(Matrix, Matrix, f64)> {
    let n = a.nrows();
    let coords: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
    if coords.len() > MAX_POLISH_UNKNOWNS {
        return None;
    }
    let weight = |i: usize, j: usize| if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
    let floor = f64::EPSILON * p.amax();

    let mut p = p.clone();
    let (mut defect, mut gain) = care_defect(a, b, q, r, chol, &p);
    let mut residual = defect.norm();
    for _ in 0..4 {
        if residual <= tol {
            return Some((p, gain, residual));
        }
        let closed = a - b * &gain;
        let steps: Vec<f64> = coords
            .iter()
            .map(|&(i, j)| {
                let x = p[(i, j)].abs().max(floor);
                x.next_up() - x
            })
            .collect();
        let mut jac = Matrix::zeros(coords.len(), coords.len());
        for (c, &(i, j)) in coords.iter().enumerate() {
            let mut e = Matrix::zeros(n, n);
            e[(i, j)] = steps[c];
            e[(j, i)] = steps[c];
            let d = closed.transpose() * &e + &e * &closed;
            for (row, &(k, l)) in coords.iter().enumerate() {
                jac[(row, c)] = weight(k, l) * d[(k, l)];
            }
        }
        let target = Vector::from_iterator(coords.len(), coords.iter().map(|&(i, j)| -weight(i, j) * defect[(i, j)]));
        let k = lattice::closest_vector(&jac, &target)?;
        if k.iter().all(|&x| x == 0) {
            return None;
        }
        let mut next = p.clone();
        for (c, &(i, j)) in coords.iter().enumerate() {
            next[(i, j)] += k[c] as f64 * steps[c];
            next[(j, i)] = next[(i, j)];
        }
        let (d, g) = care_defect(a, b, q, r, chol, &next);
        if d.norm() >= residual {
            return None;
        }
        (p, defect, gain, residual) = (next, d.clone(), g, d.norm());
    }
    (residual <= tol).then_some((p, gain, residual))
}

/// Stabilizing solution of the continuous-time algebraic Riccati equation.
pub fn solve_care(prob: &CareProblem) -> Result<CareSolution, RiccatiError> {
    let chol = validate_care(prob)?;
    let CareProblem { a, b, q, r } = prob;
    let tol = CARE_REL_TOL * (1.0 + q.norm());

    let lost = |e: RiccatiError| match e {
        RiccatiError::NotHurwitz { abscissa } => RiccatiError::NoStabilizingSolution(format!(
            "Newton iterate lost stability (abscissa {abscissa:.3e})"
        )),
        e => e,
    };
    let k0 = initial_stabilizing_gain(a, b)?;
    let p0 = solve_lyapunov(&(a - b * &k0), &(q + k0.transpose() * r * &k0)).map_err(lost)?;
    let mut p = linalg::symmetrize(&p0);
    let mut step = f64::INFINITY;
    let mut last_step = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut polished = false;

    // After the first Kleinman solve, iterate in correction form: solve for the
    // Newton update from the current defect. Same iterates in exact arithmetic,
    // but with an accurate defect the attainable residual no longer scales
    // with |P|.
    for _ in 0..NEWTON_MAX_ITER {
        let (defect, mut k) = care_defect(a, b, q, r, &chol, &p);
        residual = defect.norm();

        // Stop once the residual is met and the iteration has settled: either the
        // step is negligible or it stopped shrinking (round-off floor).
        let negligible = step <= NEWTON_STEP_TOL * (1.0 + p.norm());
        let settled = step.is_finite() && (negligible || step >= last_step);
        if negligible && residual > tol && !polished {
            polished = true;
            if let Some((polished, gain, res)) = polish_rounding(a, b, q, r, &chol, &p, tol) {
                (p, k, residual) = (polished, gain, res);
            }
        }
        if residual <= tol && settled {
            if !linalg::is_hurwitz(&(a - b * &k), STABILITY_MARGIN) {
                return Err(RiccatiError::NoStabilizingSolution(
                    "closed loop is not strictly stable at the converged solution".into(),
                ));
            }
            return Ok(CareSolution { p, gain: k, residual });
        }
        let delta = solve_lyapunov(&(a - b * &k), &defect).map_err(lost)?;
        last_step = step;
        step = delta.norm();
        p = linalg::symmetrize(&(p + delta));
    }
    Err(RiccatiError::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        residuals: vec![residual],
        detail: format!(": Newton-Kleinman stalled above the tolerance {tol:.3e}"),
    })
}

/// Effort weights a player places on the *other* player's input.
/// Both default to absent (zero).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossEffort {
    /// Weight on `u_r` inside the human cost.
    pub human_on_robot: Option<Matrix>,
    /// Weight on `u_h` inside the robot cost.
    pub robot_on_human: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOptions {
    /// Relaxation factor in `P <- (1 - gamma) P + gamma P_best_response`.
    pub damping: f64,
    pub max_iter: usize,
    /// Residuals must fall below `rel_tol * (1 + max ||Q_i||)`.
    pub rel_tol: f64,
    pub cross: CrossEffort,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        Self { damping: 0.5, max_iter: 500, rel_tol: 1e-8, cross: CrossEffort::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashSolution {
    pub human: CareSolution,
    pub robot: CareSolution,
    pub iterations: usize,
}

struct Player<'a> {
    b: &'a Matrix,
    q: &'a Matrix,
    r: &'a Matrix,
    r_inv: Matrix,
    s: Matrix,
    /// Weight on the opponent's input inside this player's cost.
    cross: Option<&'a Matrix>,
}

impl<'a> Player<'a> {
    fn new(
        b: &'a Matrix,
        q: &'a Matrix,
        r: &'a Matrix,
        cross: Option<&'a Matrix>,
        label: &'static str,
    ) -> Result<Self, RiccatiError> {
        if r.shape() != (b.ncols(), b.ncols()) {
            return Err(RiccatiError::Dimension(format!("{label}: effort weight does not match input count")));
        }
        if !linalg::is_positive_definite(r) {
            return Err(RiccatiError::IndefiniteWeight(label));
        }
        if !linalg::is_positive_semidefinite(q) {
            return Err(RiccatiError::InvalidWeight(label));
        }
        let r_inv = linalg::symmetrize(r)
            .cholesky()
            .ok_or(RiccatiError::IndefiniteWeight(label))?
            .inverse();
        let s = b * &r_inv * b.transpose();
        Ok(Self { b, q, r, r_inv, s, cross })
    }

    fn gain(&self, p: &Matrix) -> Matrix {
        &self.r_inv * self.b.transpose() * p
    }

    /// `Q_i + P_j B_j R_jj^-1 R_ij R_jj^-1 B_j^T P_j`
    fn effective_q(&self, other: &Player<'_>, p_other: &Matrix) -> Matrix {
        match self.cross {
            Some(w) => {
                let k_other = other.gain(p_other);
                self.q + k_other.transpose() * w * k_other
            }
            None => self.q.clone(),
        }
    }

    fn residual(&self, a: &Matrix, other: &Player<'_>, p: &Matrix, p_other: &Matrix) -> f64 {
        let closed = a - &other.s * p_other;
        care_residual(&closed, &self.s, &self.effective_q(other, p_other), p)
    }

    fn inactive(&self) -> bool {
        self.q.iter().all(|x| *x == 0.0)
            && self.cross.is_none_or(|w| w.iter().all(|x| *x == 0.0))
    }

    fn best_response(&self, a: &Matrix, other: &Player<'_>, p_other: &Matrix) -> Result<Matrix, RiccatiError> {
        if self.inactive() {
            return Ok(Matrix::zeros(a.nrows(), a.nrows()));
        }
        let prob = CareProblem {
            a: a - &other.s * p_other,
            b: self.b.clone(),
            q: linalg::symmetrize(&self.effective_q(other, p_other)),
            r: self.r.clone(),
        };
        solve_care(&prob).map(|s| s.p)
    }
}

/// Feedback Nash equilibrium of the two-player linear-quadratic game.
///
/// Player `i` satisfies
/// `0 = (A - S_j P_j)^T P_i + P_i (A - S_j P_j) - P_i S_i P_i + Q_i (+ cross term)`
/// with `S_i = B_i R_i^-1 B_i^T`. A player with zero state weight and no cross
/// weight is inactive and keeps `P = 0`.
pub fn solve_coupled_care(
    ss: &StateSpace,
    q_h: &Matrix,
    q_r: &Matrix,
    r_h: &Matrix,
    r_r: &Matrix,
    opts: &CoupledOptions,
) -> Result<NashSolution, RiccatiError> {
    let n = ss.n_states();
    if q_h.shape() != (n, n) || q_r.shape() != (n, n) {
        return Err(RiccatiError::Dimension(format!("state weights must be {n}x{n}")));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(RiccatiError::Dimension("damping must lie in (0, 1]".into()));
    }
    let human = Player::new(&ss.b_h, q_h, r_h, opts.cross.human_on_robot.as_ref(), "r_h")?;
    let robot = Player::new(&ss.b_r, q_r, r_r, opts.cross.robot_on_human.as_ref(), "r_r")?;
    let a = &ss.a;
    let tol = opts.rel_tol * (1.0 + q_h.norm().max(q_r.norm()));
    let gamma = opts.damping;

    let mut p_h = Matrix::zeros(n, n);
    let mut p_r = Matrix::zeros(n, n);
    let mut residuals = vec![f64::INFINITY, f64::INFINITY];
    // Best iterate once the tolerance is met; iteration continues until the
    // residual stops improving so the fixed point is resolved to round-off.
    let mut best: Option<(Matrix, Matrix, f64, f64, usize)> = None;

    for it in 1..=opts.max_iter {
        let fail = |e: RiccatiError, residuals: &[f64]| RiccatiError::NoConvergence {
            iterations: it,
            residuals: residuals.to_vec(),
            detail: format!(": best response failed: {e}"),
        };
        let next_h = match human.best_response(a, &robot, &p_r) {
            Ok(p) => p,
            Err(_) if best.is_some() => break,
            Err(e) => return Err(fail(e, &residuals)),
        };
        let cand_h = &p_h * (1.0 - gamma) + next_h * gamma;
        let next_r = match robot.best_response(a, &human, &cand_h) {
            Ok(p) => p,
            Err(_) if best.is_some() => break,
            Err(e) => return Err(fail(e, &residuals)),
        };
        p_h = cand_h;
        p_r = &p_r * (1.0 - gamma) + next_r * gamma;

        let res_h = human.residual(a, &robot, &p_h, &p_r);
        let res_r = robot.residual(a, &human, &p_r, &p_h);
        residuals = vec![res_h, res_r];
        if !(res_h.is_finite() && res_r.is_finite()) {
            if best.is_some() {
                break;
            }
            return Err(RiccatiError::NoConvergence { iterations: it, residuals, detail: ": diverged".into() });
        }
        if res_h <= tol && res_r <= tol {
            let worst = res_h.max(res_r);
            match &best {
                Some((.., prev_h, prev_r, _)) if worst >= prev_h.max(*prev_r) => break,
                _ => best = Some((p_h.clone(), p_r.clone(), res_h, res_r, it)),
            }
        }
    }

    if let Some((p_h, p_r, res_h, res_r, it)) = best {
        let joint = a - &human.s * &p_h - &robot.s * &p_r;
        if !linalg::is_hurwitz(&joint, STABILITY_MARGIN) {
            return Err(RiccatiError::NoStabilizingSolution(
                "joint closed loop of the Nash gains is not stable".into(),
            ));
        }
        return Ok(NashSolution {
            human: CareSolution { gain: human.gain(&p_h), p: p_h, residual: res_h },
            robot: CareSolution { gain: robot.gain(&p_r), p: p_r, residual: res_r },
            iterations: it,
        });
    }
    Err(RiccatiError::NoConvergence { iterations: opts.max_iter, residuals, detail: String::new() })
}

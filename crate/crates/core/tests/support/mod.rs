//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use coopgame_core::controllers::{AgentObjective, References};
use coopgame_core::dynamics::{ImpedanceParams, State};
use coopgame_core::linalg::{Matrix, Vector};
use coopgame_core::riccati::CrossEffort;
use coopgame_core::simulation::{Scenario, DEFAULT_COST_WINDOW};
use nalgebra::{Complex, DMatrix, Schur, SVD};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

pub fn diag(v: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(v))
}

pub fn scalar(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

/// The desk-scale experiment: M = 10, D = 25, K = 0, targets 1.0 m and 0.5 m,
/// Q_hh = Q_rr = diag(1, 1e-4), R_h = R_r = 5e-4.
pub fn desk_scenario(controller: &str, alpha: f64) -> Scenario {
    desk_scenario_with(controller, alpha, diag(&[1.0, 1e-4]), 5e-4)
}

pub fn desk_scenario_with(controller: &str, alpha: f64, q_rr: Matrix, r_r: f64) -> Scenario {
    Scenario {
        plant: ImpedanceParams::isotropic(1, 10.0, 25.0, 0.0).unwrap(),
        human: AgentObjective::new(diag(&[1.0, 1e-4]), Matrix::zeros(2, 2), scalar(5e-4)).unwrap(),
        robot: AgentObjective::new(Matrix::zeros(2, 2), q_rr, scalar(r_r)).unwrap(),
        refs: References::new(Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![0.5, 0.0])).unwrap(),
        alpha,
        controller: controller.to_string(),
        duration: 10.0,
        dt: 1e-3,
        initial_state: State::zeros(1),
        cost_window: DEFAULT_COST_WINDOW,
        cross: CrossEffort::default(),
    }
}

/// Stabilizing CARE solution from the stable invariant subspace of the
/// Hamiltonian `H = [[A, -B R^-1 B^T], [-Q, -A^T]]`: `P = U2 U1^-1`.
/// Eigenvectors first; the matrix sign function (same subspace, no
/// eigenvectors) covers the rare inputs where that route cannot converge.
pub fn hamiltonian_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Matrix {
    let n = a.nrows();
    let s = b * r.clone().try_inverse().unwrap() * b.transpose();
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    eigenvector_care(&h, n).unwrap_or_else(|| sign_function_care(h, n))
}

pub fn eigenvector_care(h: &Matrix, n: usize) -> Option<Matrix> {
    const SWEEPS: usize = 10_000;
    let stable: Vec<Complex<f64>> = Schur::try_new(h.clone(), f64::EPSILON, SWEEPS)?
        .complex_eigenvalues()
        .iter()
        .copied()
        .filter(|l| l.re < 0.0)
        .collect();
    assert_eq!(stable.len(), n, "Hamiltonian must split evenly");
    // nearly repeated eigenvalues make the null vectors ill-determined
    for (i, l) in stable.iter().enumerate() {
        if stable[..i].iter().any(|m| (l - m).norm() <= 1e-6 * (1.0 + l.norm())) {
            return None;
        }
    }

    let hc: DMatrix<Complex<f64>> = h.map(|x| Complex::new(x, 0.0));
    let mut u = DMatrix::<Complex<f64>>::zeros(2 * n, n);
    for (j, lambda) in stable.iter().enumerate() {
        let shifted = &hc - DMatrix::<Complex<f64>>::identity(2 * n, 2 * n) * *lambda;
        let svd = SVD::try_new(shifted, false, true, f64::EPSILON, SWEEPS)?;
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
        let v_t = svd.v_t?;
        for i in 0..2 * n {
            u[(i, j)] = v_t[(imin, i)].conj();
        }
    }
    let u1 = u.rows(0, n).into_owned();
    let u2 = u.rows(n, n).into_owned();
    let p = u2 * u1.try_inverse()?;
    Some(p.map(|c| c.re))
}

/// `[W12; W22 + I] P = -[W11 + I; W21]` with `W = sign(H)`, least squares.
pub fn sign_function_care(h: Matrix, n: usize) -> Matrix {
    // Newton iteration with determinant scaling
    let mut z = h;
    for _ in 0..200 {
        let lu = z.clone().lu();
        let det = lu.determinant().abs();
        let inv = lu.try_inverse().expect("Hamiltonian has imaginary-axis eigenvalues");
        let c = if det.is_finite() && det > 0.0 { det.powf(-1.0 / (2 * n) as f64) } else { 1.0 };
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm();
        z = next;
        if change <= 1e-14 * z.norm() {
            break;
        }
    }
    let eye = Matrix::identity(n, n);
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let qr = lhs.qr();
    let qtb = qr.q().transpose() * rhs;
    let p = qr.r().solve_upper_triangular(&qtb).expect("sign-function system is rank deficient");
    (&p + p.transpose()) * 0.5
}

/// Undamped best-response fixed point of the scalar two-player game, by plain
/// scalar algebra (each best response is the positive root of a quadratic).
pub fn scalar_nash_fixed_point(a: f64, b_h: f64, b_r: f64, q_h: f64, q_r: f64, r_h: f64, r_r: f64) -> Option<(f64, f64)> {
    let s_h = b_h * b_h / r_h;
    let s_r = b_r * b_r / r_r;
    // 0 = 2 (a - s_j p_j) p - s_i p^2 + q_i, stabilizing root
    let respond = |a_cl: f64, s: f64, q: f64| (a_cl + (a_cl * a_cl + s * q).sqrt()) / s;
    let (mut p_h, mut p_r) = (0.0, 0.0);
    for _ in 0..100_000 {
        let nh = respond(a - s_r * p_r, s_h, q_h);
        let nr = respond(a - s_h * nh, s_r, q_r);
        let done = (nh - p_h).abs() < 1e-15 && (nr - p_r).abs() < 1e-15;
        p_h = 0.5 * p_h + 0.5 * nh;
        p_r = 0.5 * p_r + 0.5 * nr;
        if done {
            return Some((p_h, p_r));
        }
    }
    None
}

/// Minimizer of `(z - z_h)^T Q_h (z - z_h) + (z - z_r)^T Q_r (z - z_r)` by
/// gradient descent with exact line search.
pub fn quadratic_minimizer(q_h: &Matrix, z_h: &Vector, q_r: &Matrix, z_r: &Vector) -> Vector {
    let mut z = Vector::zeros(z_h.len());
    for _ in 0..10_000 {
        let g = (q_h * (&z - z_h) + q_r * (&z - z_r)) * 2.0;
        let hg = (q_h + q_r) * &g * 2.0;
        let denom = g.dot(&hg);
        if denom <= 0.0 || g.norm() < 1e-16 {
            break;
        }
        z -= &g * (g.dot(&g) / denom);
    }
    z
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Random `(A, B, Q, R)` with PSD `Q = C^T C` and PD `R`.
pub fn random_care<R: Rng>(rng: &mut R, max_states: usize) -> (Matrix, Matrix, Matrix, Matrix) {
    let n = rng.random_range(1..=max_states);
    let m = rng.random_range(1..=n);
    let p = rng.random_range(1..=n);
    let a = random_matrix(rng, n, n, 1.0);
    let b = random_matrix(rng, n, m, 1.0);
    let c = random_matrix(rng, p, n, 1.0);
    let q = c.transpose() * c;
    let d = random_matrix(rng, m, m, 1.0);
    let r = &d * d.transpose() + Matrix::identity(m, m) * 0.1;
    (a, b, q, r)
}

type Exact = Vec<Vec<BigRational>>;

fn exact(m: &Matrix) -> Exact {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| BigRational::from_float(m[(i, j)]).expect("finite entry")).collect())
        .collect()
}

fn exact_mul(x: &Exact, y: &Exact) -> Exact {
    let inner = y.len();
    x.iter()
        .map(|row| {
            (0..y[0].len())
                .map(|j| (0..inner).fold(BigRational::zero(), |acc, k| acc + &row[k] * &y[k][j]))
                .collect()
        })
        .collect()
}

fn exact_transpose(x: &Exact) -> Exact {
    (0..x[0].len()).map(|j| x.iter().map(|row| row[j].clone()).collect()).collect()
}

/// Solves `R Y = G` by Gauss-Jordan elimination over the rationals.
fn exact_solve(r: &Exact, g: &Exact) -> Exact {
    let m = r.len();
    let mut aug: Exact = r.iter().zip(g).map(|(ri, gi)| ri.iter().chain(gi).cloned().collect()).collect();
    for col in 0..m {
        let pivot = (col..m).find(|&i| !aug[i][col].is_zero()).expect("R is singular");
        aug.swap(col, pivot);
        let inv = aug[col][col].recip();
        for v in aug[col].iter_mut() {
            *v *= &inv;
        }
        for i in 0..m {
            if i != col && !aug[i][col].is_zero() {
                let f = aug[i][col].clone();
                for j in 0..aug[i].len() {
                    let d = &f * &aug[col][j];
                    aug[i][j] -= d;
                }
            }
        }
    }
    aug.into_iter().map(|row| row[m..].to_vec()).collect()
}

/// Frobenius norm of `A^T P + P A - P B R^-1 B^T P + Q`, evaluated exactly on
/// the given `f64` data and rounded once at the end. Unlike an `f64`
/// evaluation, this carries no `eps |S| |P|^2` noise when `P` is large.
pub fn exact_care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> f64 {
    let (ae, be, qe, re, pe) = (exact(a), exact(b), exact(q), exact(r), exact(p));
    let at_p = exact_mul(&exact_transpose(&ae), &pe);
    let p_a = exact_mul(&pe, &ae);
    let bt_p = exact_mul(&exact_transpose(&be), &pe);
    let p_b = exact_mul(&pe, &be);
    let psp = exact_mul(&p_b, &exact_solve(&re, &bt_p));
    let mut sq = BigRational::zero();
    for i in 0..a.nrows() {
        for j in 0..a.nrows() {
            let e = &at_p[i][j] + &p_a[i][j] - &psp[i][j] + &qe[i][j];
            sq += &e * &e;
        }
    }
    sq.to_f64().expect("representable").sqrt()
}

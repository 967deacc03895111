//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Complex, DMatrix, DVector, Schur, SVD};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &Matrix) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    // nalgebra's uncapped QR iteration can cycle forever on some inputs;
    // a failed decomposition reports NaN so stability checks fail closed.
    match Schur::try_new(m.clone(), f64::EPSILON, MAX_QR_SWEEPS * m.nrows()) {
        Some(schur) => schur.complex_eigenvalues().iter().copied().collect(),
        None => vec![Complex::new(f64::NAN, f64::NAN); m.nrows()],
    }
}

const MAX_QR_SWEEPS: usize = 1000;

/// Largest real part among the eigenvalues (spectral abscissa).
pub fn spectral_abscissa(m: &Matrix) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, |acc, re| if re.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(re) })
}

pub fn is_hurwitz(m: &Matrix, margin: f64) -> bool {
    spectral_abscissa(m) < -margin
}

/// Reciprocal 2-norm condition number, `sigma_min / sigma_max`. Zero for the zero matrix.
pub fn rcond(m: &Matrix) -> f64 {
    let Some(svd) = SVD::try_new(m.clone(), false, false, f64::EPSILON, MAX_QR_SWEEPS * m.nrows().max(1))
    else {
        return 0.0;
    };
    let sv = svd.singular_values;
    let max = sv.max();
    if max == 0.0 || !max.is_finite() {
        return 0.0;
    }
    sv.min() / max
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &Matrix, rel_tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).norm() <= rel_tol * (1.0 + m.norm())
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_positive_semidefinite(m: &Matrix) -> bool {
    is_symmetric(m, 1e-10) && min_symmetric_eigenvalue(m) >= -1e-12 * (1.0 + m.norm())
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    is_symmetric(m, 1e-10) && symmetrize(m).cholesky().is_some()
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Block-diagonal matrix from two square blocks.
pub fn block_diag(top: &Matrix, bottom: &Matrix) -> Matrix {
    let (r1, c1) = top.shape();
    let (r2, c2) = bottom.shape();
    let mut out = Matrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(top);
    out.view_mut((r1, c1), (r2, c2)).copy_from(bottom);
    out
}

/// `[left right]`, both with the same row count.
pub fn hstack(left: &Matrix, right: &Matrix) -> Matrix {
    assert_eq!(left.nrows(), right.nrows(), "hstack row mismatch");
    let mut out = Matrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    out
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
/// Returns the inverse together with the dimension of the discarded null space.
pub fn pseudo_inverse(m: &Matrix, rel_cutoff: f64) -> (Matrix, usize) {
    let sweeps = MAX_QR_SWEEPS * m.nrows().max(m.ncols()).max(1);
    let Some(svd) = SVD::try_new(m.clone(), true, true, f64::EPSILON, sweeps) else {
        return (Matrix::from_element(m.ncols(), m.nrows(), f64::NAN), 0);
    };
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let max = svd.singular_values.max();
    let cutoff = rel_cutoff * max.max(f64::MIN_POSITIVE);
    let mut dropped = 0;
    let mut sigma_inv = Matrix::zeros(v_t.nrows(), u.ncols());
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > cutoff {
            sigma_inv[(i, i)] = 1.0 / s;
        } else {
            dropped += 1;
        }
    }
    (v_t.transpose() * sigma_inv * u.transpose(), dropped)
}

//! Approximate closest-vector search on a small integer lattice: LLL
//! reduction followed by Babai's nearest-plane rounding.

use crate::linalg::{Matrix, Vector};

const LLL_DELTA: f64 = 0.99;
const MAX_LLL_STEPS: usize = 100_000;
const MAX_COEFFICIENT: f64 = (1u64 << 52) as f64;

fn gram_schmidt(b: &Matrix) -> (Matrix, Matrix) {
    let d = b.ncols();
    let mut q = b.clone();
    let mut mu = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..i {
            let qj = q.column(j).into_owned();
            let denom = qj.norm_squared();
            mu[(i, j)] = if denom > 0.0 { b.column(i).dot(&qj) / denom } else { 0.0 };
            let shifted = q.column(i) - qj * mu[(i, j)];
            q.set_column(i, &shifted);
        }
    }
    (q, mu)
}

/// LLL-reduces the columns of `basis`. Returns the reduced basis and the
/// unimodular `u` (column-major, `d x d`) with `reduced = basis * u`.
fn lll(basis: &Matrix) -> Option<(Matrix, Vec<i64>)> {
    let d = basis.ncols();
    let mut b = basis.clone();
    let mut u: Vec<i64> = (0..d * d).map(|i| i64::from(i % (d + 1) == 0)).collect();
    let (mut q, mut mu) = gram_schmidt(&b);
    let mut k = 1;
    let mut steps = 0;
    while k < d {
        steps += 1;
        if steps > MAX_LLL_STEPS {
            return None;
        }
        for j in (0..k).rev() {
            let c = mu[(k, j)].round();
            if c != 0.0 {
                let col = b.column(k) - b.column(j) * c;
                b.set_column(k, &col);
                let c = c as i64;
                for row in 0..d {
                    u[k * d + row] -= c * u[j * d + row];
                }
                (q, mu) = gram_schmidt(&b);
            }
        }
        let lovasz = (LLL_DELTA - mu[(k, k - 1)].powi(2)) * q.column(k - 1).norm_squared();
        if q.column(k).norm_squared() >= lovasz {
            k += 1;
        } else {
            b.swap_columns(k, k - 1);
            for row in 0..d {
                u.swap(k * d + row, (k - 1) * d + row);
            }
            (q, mu) = gram_schmidt(&b);
            k = (k - 1).max(1);
        }
    }
    Some((b, u))
}

/// Integer `k` with `basis * k` close to `target`. `None` when the basis is
/// degenerate or reduction does not finish.
pub fn closest_vector(basis: &Matrix, target: &Vector) -> Option<Vec<i64>> {
    let d = basis.ncols();
    if d == 0 || basis.nrows() != target.len() || !basis.iter().all(|x| x.is_finite()) {
        return None;
    }
    let (b, u) = lll(basis)?;
    let (q, _) = gram_schmidt(&b);
    let mut rest = target.clone();
    let mut c = vec![0i64; d];
    for j in (0..d).rev() {
        let qj = q.column(j);
        let denom = qj.norm_squared();
        if denom == 0.0 {
            return None;
        }
        let cj = (rest.dot(&qj) / denom).round();
        if !(cj.abs() < MAX_COEFFICIENT) {
            return None;
        }
        rest -= b.column(j) * cj;
        c[j] = cj as i64;
    }
    (0..d)
        .map(|row| {
            let k: i128 = (0..d).map(|col| i128::from(u[col * d + row]) * i128::from(c[col])).sum();
            i64::try_from(k).ok()
        })
        .collect()
}

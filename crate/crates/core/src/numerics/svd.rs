//! One-sided Jacobi (Hestenes) singular value decomposition.
//!
//! Orthogonalises the columns of the tall orientation of the input by plane
//! rotations until every pair is orthogonal to working precision. Slower
//! than bidiagonalisation, but it stays accurate on exactly and nearly
//! rank-deficient matrices, which reservoir state matrices frequently are.

use super::{Matrix, Vector};
use crate::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `m = u * diag(singular_values) * v^T` with `k = min(rows, cols)`
/// columns in `u` and `v`. Singular values are not sorted.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vector,
    pub v: Matrix,
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    let (rows, cols) = m.shape();
    if rows >= cols {
        jacobi(m)
    } else {
        let t = jacobi(&m.transpose())?;
        Ok(Svd { u: t.v, singular_values: t.singular_values, v: t.u })
    }
}

// Requires rows >= cols.
fn jacobi(m: &Matrix) -> Result<Svd> {
    let (rows, n) = m.shape();
    // Column-major: column j occupies a[j*rows..(j+1)*rows].
    let mut a: Vec<f64> = m.as_slice().to_vec();
    let mut v: Vec<f64> = Matrix::identity(n, n).as_slice().to_vec();
    let tol = f64::EPSILON * rows as f64;
    // Columns this small are rounding noise; they only feed singular values
    // far below any pseudo-inverse cutoff.
    let frob = m.norm();
    let negligible = (f64::EPSILON * frob).powi(2);

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = &a[p * rows..(p + 1) * rows];
                    let cq = &a[q * rows..(q + 1) * rows];
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || alpha <= negligible || beta <= negligible {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, rows, p, q, c, s);
                rotate(&mut v, n, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps >= MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi SVD of {rows}x{n} matrix did not converge after {sweeps} sweeps"
            )));
        }
    }

    let mut sigma = Vector::zeros(n);
    let mut u = Matrix::from_column_slice(rows, n, &a);
    for j in 0..n {
        let norm = u.column(j).norm();
        sigma[j] = norm;
        if norm > 0.0 {
            u.column_mut(j).unscale_mut(norm);
        }
    }
    Ok(Svd { u, singular_values: sigma, v: Matrix::from_column_slice(n, n, &v) })
}

#[inline]
fn rotate(data: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(q * len);
    let cp = &mut head[p * len..(p + 1) * len];
    let cq = &mut tail[..len];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(s: &Svd) -> Matrix {
        &s.u * Matrix::from_diagonal(&s.singular_values) * s.v.transpose()
    }

    #[test]
    fn reconstructs_rank_one() {
        let col = [0.3, -0.7, 0.1, 0.9];
        let mut m = Matrix::zeros(4, 3);
        for j in 0..3 {
            for i in 0..4 {
                m[(i, j)] = col[i];
            }
        }
        let s = svd(&m).unwrap();
        assert!((reconstruct(&s) - &m).norm() < 1e-14);
        let mut sv: Vec<f64> = s.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let want = (3.0f64 * col.iter().map(|x| x * x).sum::<f64>()).sqrt();
        assert!((sv[0] - want).abs() < 1e-14);
        assert!(sv[1] < 1e-15 && sv[2] < 1e-15);
    }

    #[test]
    fn wide_input_uses_transpose() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s = svd(&m).unwrap();
        assert_eq!(s.u.shape(), (2, 2));
        assert_eq!(s.v.shape(), (3, 2));
        assert!((reconstruct(&s) - &m).norm() < 1e-13);
    }

    #[test]
    fn orthonormal_factors() {
        let m = Matrix::from_fn(7, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let s = svd(&m).unwrap();
        assert!((s.v.transpose() * &s.v - Matrix::identity(5, 5)).amax() < 1e-13);
        assert!((reconstruct(&s) - &m).norm() < 1e-12);
    }
}

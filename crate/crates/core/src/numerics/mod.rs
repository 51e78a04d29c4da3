//! Dense/sparse matrix kernels shared by the rest of the pipeline.

mod eigen;
mod rng;
mod svd;

use rand::seq::index;
use rand::Rng;

pub use eigen::{eigenvalues, spectral_radius};
pub use rng::SeededRng;
pub use svd::{svd, Svd};

use crate::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// Relative singular-value cutoff used when the caller gives none.
pub fn default_pinv_tolerance(rows: usize, cols: usize) -> f64 {
    1e-12 * rows.max(cols) as f64
}

pub(crate) fn ensure_finite(m: &Matrix, context: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{context}: matrix contains NaN or infinite entries")))
    }
}

pub(crate) fn ensure_nonempty(m: &Matrix, context: &'static str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        Err(Error::shape(context, "at least 1x1", format!("{}x{}", m.nrows(), m.ncols())))
    } else {
        Ok(())
    }
}

/// Random `rows x cols` matrix with exactly `round(density * rows * cols)`
/// nonzero entries at positions drawn without replacement, each uniform in
/// `[low, high]`.
pub fn sparse_random_matrix(
    rows: usize,
    cols: usize,
    density: f64,
    low: f64,
    high: f64,
    rng: &SeededRng,
) -> Result<Matrix> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Parameter(format!("density must be in (0, 1], got {density}")));
    }
    if !(low.is_finite() && high.is_finite() && low < high) {
        return Err(Error::Parameter(format!("empty value range [{low}, {high}]")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::shape("sparse_random_matrix", "at least 1x1", format!("{rows}x{cols}")));
    }
    let total = rows * cols;
    let nnz = ((density * total as f64).round() as usize).min(total);

    let mut rng = rng.rng();
    let mut m = Matrix::zeros(rows, cols);
    for flat in index::sample(&mut rng, total, nnz) {
        // A drawn exact zero would silently drop the count below nnz.
        let value = loop {
            let v = rng.random_range(low..=high);
            if v != 0.0 {
                break v;
            }
        };
        m[(flat / cols, flat % cols)] = value;
    }
    Ok(m)
}

/// Dense matrix with every entry uniform in `[low, high]`.
pub fn dense_random_matrix(rows: usize, cols: usize, low: f64, high: f64, rng: &SeededRng) -> Result<Matrix> {
    if !(low.is_finite() && high.is_finite() && low <= high) {
        return Err(Error::Parameter(format!("empty value range [{low}, {high}]")));
    }
    let mut rng = rng.rng();
    // Row-major fill so the draw order matches the documented layout.
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = if low == high { low } else { rng.random_range(low..=high) };
        }
    }
    Ok(m)
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values at or below
/// `tolerance * sigma_max` are treated as zero.
pub fn pinv(m: &Matrix, tolerance: f64) -> Result<Matrix> {
    ensure_nonempty(m, "pinv")?;
    ensure_finite(m, "pinv")?;
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Error::Parameter(format!("pinv tolerance must be finite and >= 0, got {tolerance}")));
    }
    let decomposition = svd::svd(m)?;
    let cutoff = tolerance * decomposition.singular_values.max();
    let (rows, cols) = m.shape();
    let mut out = Matrix::zeros(cols, rows);
    for (k, &sigma) in decomposition.singular_values.iter().enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            let v = decomposition.v.column(k);
            let u = decomposition.u.column(k);
            out.ger(1.0 / sigma, &v, &u, 1.0);
        }
    }
    ensure_finite(&out, "pinv result")?;
    Ok(out)
}

/// Rescales `w` so its spectral radius equals `target`.
pub fn scale_to_spectral_radius(w: &Matrix, target: f64) -> Result<Matrix> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Parameter(format!("spectral radius target must be > 0, got {target}")));
    }
    ensure_nonempty(w, "scale_to_spectral_radius")?;
    ensure_finite(w, "scale_to_spectral_radius")?;
    let rho = spectral_radius(w)?;
    let scale = w.amax();
    if rho <= 1e-12 * scale || rho == 0.0 {
        return Err(Error::DegenerateMatrix(format!(
            "spectral radius {rho:e} of {}x{} matrix is zero; cannot rescale a nilpotent reservoir",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(w * (target / rho))
}

/// Frobenius norm.
pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_nonzero(m: &Matrix) -> usize {
        let mut n = 0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn full_density_fills_every_entry() {
        let m = sparse_random_matrix(3, 3, 1.0, -1.0, 1.0, &SeededRng::new(7, "w")).unwrap();
        assert_eq!(count_nonzero(&m), 9);
        assert!(m.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn ecg200_reservoir_nonzero_count() {
        let m = sparse_random_matrix(150, 150, 0.1, -1.0, 1.0, &SeededRng::new(1, "w")).unwrap();
        assert_eq!(count_nonzero(&m), 2250);
    }

    #[test]
    fn brute_force_nonzero_scan() {
        let m = sparse_random_matrix(50, 50, 0.05, -1.0, 1.0, &SeededRng::new(3, "w")).unwrap();
        assert_eq!(count_nonzero(&m), 125);
    }

    #[test]
    fn sparse_rejects_bad_parameters() {
        let rng = SeededRng::new(0, "w");
        for density in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(sparse_random_matrix(4, 4, density, -1.0, 1.0, &rng), Err(Error::Parameter(_))));
        }
        assert!(matches!(sparse_random_matrix(4, 4, 0.5, 1.0, 1.0, &rng), Err(Error::Parameter(_))));
        assert!(matches!(sparse_random_matrix(4, 4, 0.5, 1.0, -1.0, &rng), Err(Error::Parameter(_))));
    }

    #[test]
    fn sparse_is_deterministic() {
        let a = sparse_random_matrix(40, 40, 0.2, -1.0, 1.0, &SeededRng::new(9, "w")).unwrap();
        let b = sparse_random_matrix(40, 40, 0.2, -1.0, 1.0, &SeededRng::new(9, "w")).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn pinv_identity() {
        let i4 = Matrix::identity(4, 4);
        let p = pinv(&i4, default_pinv_tolerance(4, 4)).unwrap();
        assert!((p - i4).amax() < 1e-15);
    }

    #[test]
    fn pinv_zero_singular_value() {
        let d = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pinv(&d, default_pinv_tolerance(2, 2)).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!((p - want).amax() < 1e-15);
    }

    #[test]
    fn pinv_tall_full_rank_reconstructs() {
        let m = dense_random_matrix(10, 6, -1.0, 1.0, &SeededRng::new(11, "m")).unwrap();
        let p = pinv(&m, default_pinv_tolerance(10, 6)).unwrap();
        assert_eq!(p.shape(), (6, 10));
        let resid = (&m * &p * &m - &m).norm() / m.norm();
        assert!(resid < 1e-10, "{resid}");
    }

    #[test]
    fn pinv_of_zero_matrix_is_zero() {
        let p = pinv(&Matrix::zeros(3, 2), 1e-12).unwrap();
        assert_eq!(p, Matrix::zeros(2, 3));
    }

    #[test]
    fn pinv_rejects_non_finite() {
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(pinv(&m, 1e-12), Err(Error::Parameter(_))));
        assert!(matches!(pinv(&Matrix::identity(2, 2), -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn spectral_radius_of_diagonal() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![0.3, -0.9]));
        assert!((spectral_radius(&d).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn spectral_radius_of_zero() {
        assert_eq!(spectral_radius(&Matrix::zeros(5, 5)).unwrap(), 0.0);
    }

    #[test]
    fn scale_diagonal() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0]));
        let s = scale_to_spectral_radius(&d, 0.9).unwrap();
        let want = Matrix::from_diagonal(&Vector::from_vec(vec![0.9, 0.45]));
        assert!((s - want).amax() < 1e-15);
    }

    #[test]
    fn scale_is_identity_at_current_radius() {
        let w = Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let s = scale_to_spectral_radius(&w, 0.5).unwrap();
        assert!((s - w).amax() < 1e-12);
    }

    #[test]
    fn scale_rejects_nilpotent() {
        let w = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(scale_to_spectral_radius(&w, 0.9), Err(Error::DegenerateMatrix(_))));
        assert!(matches!(scale_to_spectral_radius(&Matrix::zeros(3, 3), 0.9), Err(Error::DegenerateMatrix(_))));
    }
}

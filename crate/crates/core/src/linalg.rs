//! Small dense linear-algebra helpers shared by the cost families and the
//! reductions. Everything here works on `nalgebra` dynamic matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry accepted when checking that a matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn require_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Largest `|a_ij - a_ji|`, scaled by `max(1, max |a_ij|)`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Eigendecomposition of a symmetric positive-definite matrix, with the
/// eigenvalues sorted ascending.
pub fn spd_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    require_square(m)?;
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sort_eigen(sym.symmetric_eigen());
    let min = eig.eigenvalues[0];
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(eig)
}

fn sort_eigen(
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let n = eig.eigenvalues.len();
    let mut order: alloc::vec::Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    SymmetricEigen {
        eigenvalues,
        eigenvectors,
    }
}

/// `U f(Λ) Uᵀ` for an SPD matrix with eigendecomposition `U Λ Uᵀ`.
pub fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let out = u * d * u.transpose();
    (&out + out.transpose()) * 0.5
}

pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spectral_map(&spd_eigen(m)?, libm::sqrt))
}

pub fn spd_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spectral_map(&spd_eigen(m)?, |x| 1.0 / libm::sqrt(x)))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    require_square(m)?;
    let sym = (m + m.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().min())
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    require_square(m)?;
    let sym = (m + m.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().max())
}

/// Smallest and largest singular values.
pub fn singular_range(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = m.clone().singular_values();
    (sv.min(), sv.max())
}

pub fn norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

pub fn dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm()
}

pub fn half_sq_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    0.5 * (a - b).norm_squared()
}

pub fn check_dim(v: &DVector<f64>, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = spd_sqrt(&m).unwrap();
        assert_relative_eq!(&s * &s, m, epsilon = 1e-12);
        let is = spd_inv_sqrt(&m).unwrap();
        assert_relative_eq!(&is * &s, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let indefinite = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![1.0, -1.0]));
        assert!(matches!(spd_eigen(&indefinite), Err(Error::NotPositiveDefinite { .. })));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spd_eigen(&asym), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn eigenvalues_sorted_ascending() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![5.0, 2.0, 9.0]));
        let e = spd_eigen(&m).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[2.0, 5.0, 9.0]);
    }
}

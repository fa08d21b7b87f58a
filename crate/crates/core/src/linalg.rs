//! Small dense helpers shared by the spatial codebook, channel and analysis modules.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{CMatrix, Cx};

/// Eigenvalues of the Hermitian 2x2 matrix `[[a, b], [conj(b), c]]`, descending, clamped at 0.
pub(crate) fn hermitian2_eigenvalues(a: f64, b: Cx, c: f64) -> [f64; 2] {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let radius = (half_diff * half_diff + b.norm_sqr()).sqrt();
    [(mean + radius).max(0.0), (mean - radius).max(0.0)]
}

/// Eigenvalues of `D^H D` for an `n x 2` matrix `D`, descending.
pub(crate) fn gram2_eigenvalues(diff: &CMatrix) -> [f64; 2] {
    debug_assert_eq!(diff.ncols(), 2);
    let c0 = diff.column(0);
    let c1 = diff.column(1);
    hermitian2_eigenvalues(c0.norm_squared(), c0.dotc(&c1), c1.norm_squared())
}

/// Principal square root of a real symmetric positive-semidefinite matrix.
///
/// Negative eigenvalues (rounding only) are clamped to zero.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&roots) * v.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian2_matches_trace_and_determinant() {
        let (a, b, c) = (3.0, Cx::new(1.0, -0.5), 1.5);
        let [l1, l2] = hermitian2_eigenvalues(a, b, c);
        assert!((l1 + l2 - (a + c)).abs() < 1e-12);
        assert!((l1 * l2 - (a * c - b.norm_sqr())).abs() < 1e-12);
        assert!(l1 >= l2);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        let s = psd_sqrt(&m);
        assert!((&s * &s - &m).norm() < 1e-12);
        assert!((&s - s.transpose()).norm() < 1e-14);
    }
}

//! Pairwise error probabilities from difference-Gram spectra.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::SymmetricEigen;
use statrs::function::erf::erfc;

use super::quadrature::{integrate, QuadOptions};
use crate::error::{invalid, Error, Result};
use crate::linalg::gram2_eigenvalues;
use crate::CMatrix;

/// Eigenvalues at or below this are treated as zero when counting rank.
pub const RANK_TOL: f64 = 1e-12;

/// Nonzero spectrum of `(Xa - Xb)^H (Xa - Xb)` plus the label distance of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PepSpectrum {
    /// Descending, all above [`RANK_TOL`].
    pub eigenvalues: Vec<f64>,
    pub hamming_errors: u32,
}

impl PepSpectrum {
    pub fn from_eigenvalues(mut values: Vec<f64>, hamming_errors: u32) -> Self {
        values.retain(|&v| v > RANK_TOL);
        values.sort_by(|a, b| b.total_cmp(a));
        PepSpectrum {
            eigenvalues: values,
            hamming_errors,
        }
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Spectrum of the difference of two `Nt x 2` codewords via the 2x2 Gram.
pub fn gram_spectrum(xa: &CMatrix, xb: &CMatrix) -> Result<PepSpectrum> {
    if xa.shape() != xb.shape() || xa.ncols() != 2 {
        return Err(Error::ShapeMismatch {
            expected: format!("two Nt x 2 matrices, first is {:?}", xa.shape()),
            got: format!("{:?}", xb.shape()),
        });
    }
    let [l1, l2] = gram2_eigenvalues(&(xa - xb));
    Ok(PepSpectrum::from_eigenvalues(vec![l1, l2], 0))
}

/// Nonzero eigenvalues of `W W^H` for any `W` (dense Hermitian solver).
pub fn dense_spectrum(w: &CMatrix) -> Vec<f64> {
    let gram = if w.nrows() <= w.ncols() {
        w * w.adjoint()
    } else {
        w.adjoint() * w
    };
    let eig = SymmetricEigen::new(gram);
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().filter(|&v| v > RANK_TOL).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

fn check_rank(spectrum: &PepSpectrum, es_over_n0: f64, num_rx: usize) -> Result<()> {
    if spectrum.rank() == 0 {
        return Err(invalid("PEP undefined for identical codewords (rank 0)"));
    }
    if num_rx == 0 {
        return Err(invalid("Nr must be at least 1"));
    }
    if !(es_over_n0 >= 0.0) {
        return Err(invalid("Es/N0 must be nonnegative"));
    }
    Ok(())
}

/// `(1/pi) int_0^{pi/2} prod_m (1 + Es lambda_m / (4 N0 sin^2 t))^{-Nr} dt`.
///
/// `es_over_n0` is linear and must already include any transmit power scale.
pub fn pep_exact(spectrum: &PepSpectrum, es_over_n0: f64, num_rx: usize) -> Result<f64> {
    check_rank(spectrum, es_over_n0, num_rx)?;
    let coeffs: Vec<f64> = spectrum.eigenvalues.iter().map(|l| 0.25 * es_over_n0 * l).collect();
    let nr = num_rx as i32;
    let integrand = |t: f64| {
        let s2 = t.sin().powi(2);
        coeffs.iter().map(|&c| (s2 / (s2 + c)).powi(nr)).product::<f64>()
    };
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-11,
        ..QuadOptions::default()
    };
    let r = integrate(integrand, 0.0, FRAC_PI_2, opts)?;
    Ok((r.value / PI).clamp(0.0, 0.5))
}

/// Two-exponential approximation of the PEP, no quadrature.
pub fn pep_approx(spectrum: &PepSpectrum, es_over_n0: f64, num_rx: usize) -> Result<f64> {
    check_rank(spectrum, es_over_n0, num_rx)?;
    let nr = num_rx as i32;
    let prod = |div: f64| {
        spectrum
            .eigenvalues
            .iter()
            .map(|l| (1.0 + es_over_n0 * l / div).powi(-nr))
            .product::<f64>()
    };
    Ok(prod(4.0) / 12.0 + prod(3.0) / 4.0)
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `Q(x) ~ exp(-x^2/2)/12 + exp(-2x^2/3)/4`, accurate for large `x`.
pub fn q_approx(x: f64) -> f64 {
    (-0.5 * x * x).exp() / 12.0 + (-2.0 * x * x / 3.0).exp() / 4.0
}

//! Noncoherent M-ary detection error of the despreading stage.

use super::quadrature::{integrate, QuadOptions};
use crate::error::{invalid, Result};

/// `e^{-x} sum_{k<D} x^k / k!`: upper regularized incomplete gamma `Q(D, x)` for integer `D`.
fn poisson_tail(d: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..d {
        term *= x / k as f64;
        sum += term;
    }
    // log form keeps large x from overflowing the partial sum
    (sum.ln() - x).exp()
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Smallest doubling point beyond which `(Nc - 1) Q(D, x / scale)` drops below `tail`.
fn tail_limit(d: u32, scale: f64, weight: f64, tail: f64) -> f64 {
    let mut u = (d as f64 + 10.0) * scale;
    while weight * poisson_tail(d, u / scale) > tail {
        u *= 2.0;
    }
    u
}

/// Average symbol error probability of picking the strongest of `Nc`
/// square-law branches with diversity `D` and average branch SNR `gamma`.
///
/// Evaluated in complement form `int f(x) [1 - P(D, x)^{Nc-1}] dx` so small
/// error probabilities keep full relative precision.
pub fn despreading_error(avg_branch_snr: f64, diversity: u32, num_codes: u32) -> Result<f64> {
    if !(avg_branch_snr >= 0.0) || !avg_branch_snr.is_finite() {
        return Err(invalid(format!("average branch SNR must be finite and >= 0, got {avg_branch_snr}")));
    }
    if diversity == 0 {
        return Err(invalid("diversity order must be at least 1"));
    }
    if num_codes < 2 {
        return Err(invalid("despreading error needs Nc >= 2"));
    }
    let scale = 1.0 + avg_branch_snr;
    let others = (num_codes - 1) as f64;
    let d = diversity;
    let log_norm = d as f64 * scale.ln() + ln_factorial(d - 1);
    let integrand = |x: f64| {
        let log_pdf = if d == 1 {
            -x / scale - log_norm
        } else {
            (d - 1) as f64 * x.ln() - x / scale - log_norm
        };
        let q = poisson_tail(d, x).min(1.0);
        let wrong = -(others * (-q).ln_1p()).exp_m1();
        log_pdf.exp() * wrong
    };
    let upper = tail_limit(d, scale, 1.0, 1e-16).min(tail_limit(d, 1.0, others, 1e-18));
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 8000,
        initial_pieces: 16,
    };
    let r = integrate(integrand, 0.0, upper, opts)?;
    Ok(r.value.clamp(0.0, 1.0))
}

/// Bit error probability of the code-index bits: `Nc / (2Nc - 2) * Pe`.
pub fn abep_despreading_bits(pe: f64, num_codes: u32) -> Result<f64> {
    if num_codes < 2 {
        return Err(invalid("despreading bit error needs Nc >= 2"));
    }
    if !(0.0..=1.0).contains(&pe) {
        return Err(invalid(format!("pe = {pe} outside [0, 1]")));
    }
    Ok(num_codes as f64 / (2.0 * num_codes as f64 - 2.0) * pe)
}

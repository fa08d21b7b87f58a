use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Points with fewer errors than this get a wide, unreliable interval.
pub const RELIABLE_ERRORS: u64 = 100;

/// Measured bit error rate at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub bit_errors: u64,
    pub bits_simulated: u64,
    pub ber: f64,
    pub ci95_halfwidth: f64,
    pub blocks: u64,
    /// Blocks with at least one bit error.
    pub block_errors: u64,
    /// `false` when `bit_errors < 100`.
    pub reliable: bool,
}

impl BerPoint {
    pub fn from_counts(snr_db: f64, bit_errors: u64, bits_simulated: u64, blocks: u64, block_errors: u64) -> Self {
        let ber = if bits_simulated == 0 {
            0.0
        } else {
            bit_errors as f64 / bits_simulated as f64
        };
        BerPoint {
            snr_db,
            bit_errors,
            bits_simulated,
            ber,
            ci95_halfwidth: ci95_halfwidth(bit_errors, bits_simulated),
            blocks,
            block_errors,
            reliable: bit_errors >= RELIABLE_ERRORS,
        }
    }
}

/// Normal-approximation half width `1.96 sqrt(p (1 - p) / n)`.
pub fn ci95_halfwidth(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    1.96 * (p * (1.0 - p) / n).sqrt()
}

/// Pooled two-proportion z statistic for `p_a > p_b`.
pub fn two_proportion_z(a: &BerPoint, b: &BerPoint) -> Result<f64> {
    if a.bits_simulated == 0 || b.bits_simulated == 0 {
        return Err(invalid("both points need simulated bits"));
    }
    let (na, nb) = (a.bits_simulated as f64, b.bits_simulated as f64);
    let pooled = (a.bit_errors + b.bit_errors) as f64 / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return Ok(0.0);
    }
    Ok((a.ber - b.ber) / se)
}

/// SNR (dB) at which a curve crosses `level`, by linear interpolation of
/// `log10(BER)` against SNR. Uses the first bracketing pair of nonzero points.
pub fn snr_at_ber(points: &[(f64, f64)], level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("BER level {level} must be in (0, 1)")));
    }
    let target = level.log10();
    for w in points.windows(2) {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if !(b0 > 0.0 && b1 > 0.0) || !s0.is_finite() || !s1.is_finite() {
            continue;
        }
        let (l0, l1) = (b0.log10(), b1.log10());
        if (l0 - target) * (l1 - target) > 0.0 {
            continue;
        }
        if l0 == l1 {
            return Ok(s0);
        }
        return Ok(s0 + (target - l0) * (s1 - s0) / (l1 - l0));
    }
    Err(Error::LevelNotBracketed { level })
}

/// `snr_b - snr_a` at `level`: positive when curve `a` needs less SNR.
pub fn gap_db(a: &[(f64, f64)], b: &[(f64, f64)], level: f64) -> Result<f64> {
    Ok(snr_at_ber(b, level)? - snr_at_ber(a, level)?)
}

//! Data rate, energy saving and complexity counts.

use serde::{Deserialize, Serialize};

use crate::codebook::floor_pow2;
use crate::error::{invalid, Result};
use crate::modem::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Ml,
    Lc,
}

impl Detector {
    pub fn as_str(self) -> &'static str {
        match self {
            Detector::Ml => "ml",
            Detector::Lc => "lc",
        }
    }
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn log2_exact(v: u64, what: &str) -> Result<u32> {
    if v == 0 || !v.is_power_of_two() {
        return Err(invalid(format!("{what} = {v} must be a power of two")));
    }
    Ok(v.trailing_zeros())
}

/// `Nz = 2^floor(log2 C(Nt, 2))`.
pub fn stbc_codeword_count(num_tx: u64) -> Result<u64> {
    if num_tx < 2 {
        return Err(invalid("Nt must be at least 2"));
    }
    Ok(floor_pow2(num_tx * (num_tx - 1) / 2))
}

/// `Ns = 2^floor(log2 C(Nc, 2))`.
pub fn sequence_pair_count(num_codes: u64) -> Result<u64> {
    if num_codes < 2 {
        return Err(invalid("Nc must be at least 2"));
    }
    Ok(floor_pow2(num_codes * (num_codes - 1) / 2))
}

/// Bits conveyed implicitly per symbol interval, in half bits: `(b1 + b3)`.
fn implicit_half_bits(scheme: Scheme, nt: u64, nc: u64) -> Result<u32> {
    Ok(match scheme {
        Scheme::SmCim => 2 * (log2_exact(nt, "Nt")? + log2_exact(nc, "Nc")?),
        Scheme::StbcSmCim => log2_exact(stbc_codeword_count(nt)?, "Nz")? + log2_exact(nc, "Nc")?,
        Scheme::EstbcSmCim => {
            log2_exact(stbc_codeword_count(nt)?, "Nz")? + log2_exact(sequence_pair_count(nc)?, "Ns")?
        }
    })
}

/// Bits per symbol interval `b_t` (may be a half integer for the STBC schemes).
pub fn bits_per_interval(scheme: Scheme, num_tx: u64, num_codes: u64, modulation_order: u64) -> Result<f64> {
    let log2m = log2_exact(modulation_order, "M")?;
    let symbols_half = match scheme {
        Scheme::SmCim | Scheme::StbcSmCim => 2 * log2m,
        Scheme::EstbcSmCim => 4 * log2m,
    };
    Ok((implicit_half_bits(scheme, num_tx, num_codes)? + symbols_half) as f64 / 2.0)
}

/// Bits carried by antenna and code indices per symbol interval, `b1 + b3`.
pub fn implicit_bits(scheme: Scheme, num_tx: u64, num_codes: u64) -> Result<f64> {
    Ok(implicit_half_bits(scheme, num_tx, num_codes)? as f64 / 2.0)
}

/// `R_t = (1 - Pb) bt / Ts` in bits per second.
pub fn data_rate(bits_per_interval: f64, pb: f64, symbol_duration: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pb) {
        return Err(invalid(format!("pb = {pb} outside [0, 1]")));
    }
    if !(symbol_duration > 0.0) {
        return Err(invalid("symbol duration must be positive"));
    }
    Ok((1.0 - pb) * bits_per_interval / symbol_duration)
}

/// `(1 - b2/bt) * 100`, the share of bits sent without constellation energy.
pub fn energy_saving(b2: f64, bt: f64) -> Result<f64> {
    if !(bt > 0.0) || !(0.0..=bt).contains(&b2) {
        return Err(invalid(format!("need 0 <= b2 <= bt and bt > 0 (b2 = {b2}, bt = {bt})")));
    }
    Ok((1.0 - b2 / bt) * 100.0)
}

/// Truncates a percentage to two decimals, the way the published tables print it.
pub fn truncate_2dp(value: f64) -> f64 {
    ((value * 100.0) + 1e-9).floor() / 100.0
}

/// Parameters for the complexity formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityParams {
    pub length: u64,
    pub num_rx: u64,
    pub num_tx: u64,
    pub num_codes: u64,
    pub modulation_order: u64,
}

pub fn complexity_formula(scheme: Scheme, detector: Detector) -> &'static str {
    match (scheme, detector) {
        (Scheme::SmCim, Detector::Ml) => "4L + (4LNrNt + 4LNr)2^bt",
        (Scheme::SmCim, Detector::Lc) => "4L + 8LNcNr + 8NrNtM",
        (Scheme::StbcSmCim, Detector::Ml) => "8L + (4LNrNt + 4LNr)2^bt",
        (Scheme::StbcSmCim, Detector::Lc) => "8L + 4LNcNr + 4NcNr + 16NrNzM",
        (Scheme::EstbcSmCim, Detector::Ml) => "16L + (4LNtNr + 4LNr)2^bt",
        (Scheme::EstbcSmCim, Detector::Lc) => "16L + 4LNcNr + 4NcNr + 32NrNzM",
    }
}

/// Real multiplications per symbol duration.
///
/// ML counts need an integral `bt`; fractional rates are rejected.
pub fn complexity_count(scheme: Scheme, detector: Detector, p: ComplexityParams) -> Result<u128> {
    let (l, nr, nt, nc, m) = (
        p.length as u128,
        p.num_rx as u128,
        p.num_tx as u128,
        p.num_codes as u128,
        p.modulation_order as u128,
    );
    let spreading = match scheme {
        Scheme::SmCim => 4 * l,
        Scheme::StbcSmCim => 8 * l,
        Scheme::EstbcSmCim => 16 * l,
    };
    match detector {
        Detector::Lc => {
            let nz = || -> Result<u128> { Ok(stbc_codeword_count(p.num_tx)? as u128) };
            Ok(match scheme {
                Scheme::SmCim => spreading + 8 * l * nc * nr + 8 * nr * nt * m,
                Scheme::StbcSmCim => spreading + 4 * l * nc * nr + 4 * nc * nr + 16 * nr * nz()? * m,
                Scheme::EstbcSmCim => spreading + 4 * l * nc * nr + 4 * nc * nr + 32 * nr * nz()? * m,
            })
        }
        Detector::Ml => {
            let bt = bits_per_interval(scheme, p.num_tx, p.num_codes, p.modulation_order)?;
            if bt.fract() != 0.0 {
                return Err(invalid(format!("ML count needs an integral bt, got {bt}")));
            }
            let hyps = 1u128
                .checked_shl(bt as u32)
                .filter(|_| bt < 100.0)
                .ok_or_else(|| invalid("bt too large"))?;
            Ok(spreading + (4 * l * nr * nt + 4 * l * nr) * hyps)
        }
    }
}

/// One row of the data-rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub num_tx: u64,
    pub num_codes: u64,
    pub modulation_order: u64,
    pub sm_cim: f64,
    pub stbc_sm_cim: f64,
    pub estbc_sm_cim: f64,
}

/// `(Nt, Nc, M)` rows of the published rate and energy tables.
pub const TABLE_ROWS: [(u64, u64, u64); 3] = [(4, 4, 4), (4, 8, 4), (8, 16, 8)];

/// Common `bt` each energy-table row is normalized to.
pub const ENERGY_TABLE_BT: [f64; 3] = [7.0, 9.0, 14.0];

pub fn rate_table() -> Result<Vec<RateRow>> {
    TABLE_ROWS
        .iter()
        .map(|&(nt, nc, m)| {
            Ok(RateRow {
                num_tx: nt,
                num_codes: nc,
                modulation_order: m,
                sm_cim: bits_per_interval(Scheme::SmCim, nt, nc, m)?,
                stbc_sm_cim: bits_per_interval(Scheme::StbcSmCim, nt, nc, m)?,
                estbc_sm_cim: bits_per_interval(Scheme::EstbcSmCim, nt, nc, m)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub num_tx: u64,
    pub num_codes: u64,
    pub modulation_order: u64,
    pub bits_per_interval: f64,
    pub sm_cim: f64,
    pub stbc_sm_cim: f64,
    pub estbc_sm_cim: f64,
}

/// Energy saving at a common `bt`, with `b2 = bt - (b1 + b3)`, truncated to two decimals.
pub fn energy_saving_at(scheme: Scheme, num_tx: u64, num_codes: u64, bt: f64) -> Result<f64> {
    let b2 = bt - implicit_bits(scheme, num_tx, num_codes)?;
    Ok(truncate_2dp(energy_saving(b2, bt)?))
}

pub fn energy_table() -> Result<Vec<EnergyRow>> {
    TABLE_ROWS
        .iter()
        .zip(ENERGY_TABLE_BT)
        .map(|(&(nt, nc, m), bt)| {
            Ok(EnergyRow {
                num_tx: nt,
                num_codes: nc,
                modulation_order: m,
                bits_per_interval: bt,
                sm_cim: energy_saving_at(Scheme::SmCim, nt, nc, bt)?,
                stbc_sm_cim: energy_saving_at(Scheme::StbcSmCim, nt, nc, bt)?,
                estbc_sm_cim: energy_saving_at(Scheme::EstbcSmCim, nt, nc, bt)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub scheme: Scheme,
    pub ml_formula: &'static str,
    pub ml_count: Option<u128>,
    pub lc_formula: &'static str,
    pub lc_count: u128,
}

pub fn complexity_table(params: ComplexityParams) -> Result<Vec<ComplexityRow>> {
    [Scheme::SmCim, Scheme::StbcSmCim, Scheme::EstbcSmCim]
        .into_iter()
        .map(|scheme| {
            Ok(ComplexityRow {
                scheme,
                ml_formula: complexity_formula(scheme, Detector::Ml),
                ml_count: complexity_count(scheme, Detector::Ml, params).ok(),
                lc_formula: complexity_formula(scheme, Detector::Lc),
                lc_count: complexity_count(scheme, Detector::Lc, params)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: ComplexityParams = ComplexityParams {
        length: 252,
        num_rx: 4,
        num_tx: 4,
        num_codes: 4,
        modulation_order: 4,
    };

    #[test]
    fn rates() {
        assert_eq!(bits_per_interval(Scheme::StbcSmCim, 4, 8, 4).unwrap(), 4.5);
        assert_eq!(bits_per_interval(Scheme::EstbcSmCim, 8, 16, 8).unwrap(), 11.0);
        assert!(bits_per_interval(Scheme::SmCim, 3, 4, 4).is_err());
    }

    #[test]
    fn data_rate_values() {
        assert_eq!(data_rate(6.0, 0.0, 1.0).unwrap(), 6.0);
        assert_eq!(data_rate(6.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(data_rate(6.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn energy_values() {
        assert_eq!(energy_saving(3.0, 3.0).unwrap(), 0.0);
        assert!(energy_saving(4.0, 3.0).is_err());
        assert_eq!(truncate_2dp(57.142857), 57.14);
        assert_eq!(truncate_2dp(55.5555), 55.55);
        assert_eq!(truncate_2dp(50.0), 50.0);
    }

    #[test]
    fn sm_cim_lc_count() {
        assert_eq!(complexity_count(Scheme::SmCim, Detector::Lc, P).unwrap(), 33776);
    }

    #[test]
    fn ml_needs_integral_rate() {
        let p = ComplexityParams { num_codes: 8, ..P };
        assert!(complexity_count(Scheme::StbcSmCim, Detector::Ml, p).is_err());
        assert!(complexity_count(Scheme::StbcSmCim, Detector::Lc, p).is_ok());
    }
}

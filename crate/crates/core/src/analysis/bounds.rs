//! Union bounds on the detection-stage bit error probability and the total ABEP.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::despread::{abep_despreading_bits, despreading_error};
use super::pep::{dense_spectrum, pep_approx, pep_exact, PepSpectrum, RANK_TOL};
use crate::error::{invalid, Error, Result};
use crate::linalg::gram2_eigenvalues;
use crate::modem::{gray_label, BitLayout, Scheme, SchemeConfig};
use crate::spacetime::make_codeword;
use crate::{CMatrix, Cx};

/// Default limit on ordered hypothesis pairs a union bound may enumerate.
pub const DEFAULT_PAIR_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbepBreakdown {
    pub p1_detection: f64,
    /// Absent when the bound already covers every bit (ESTBC-SM-CIM full ML).
    pub p2_despreading: Option<f64>,
    pub pb_total: f64,
    /// `(b1 + b2) / bt` and `b3 / bt`.
    pub bit_weights: (f64, f64),
}

/// `Pb = (b1 + b2)/bt * P1 + b3/bt * P2`.
pub fn abep_total(p1: f64, p2: f64, layout: BitLayout) -> Result<AbepBreakdown> {
    for (name, p) in [("P1", p1), ("P2", p2)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("{name} = {p} outside [0, 1]")));
        }
    }
    let total = layout.total();
    if total == 0 {
        return Err(invalid("layout carries no bits"));
    }
    let w1 = (layout.index_bits + layout.symbol_bits) as f64 / total as f64;
    let w2 = layout.code_bits as f64 / total as f64;
    Ok(AbepBreakdown {
        p1_detection: p1,
        p2_despreading: Some(p2),
        pb_total: (w1 * p1 + w2 * p2).clamp(0.0, 1.0),
        bit_weights: (w1, w2),
    })
}

fn check_pairs(labels: u32, cap: u128) -> Result<()> {
    let n = 1u128 << labels;
    let pairs = n * (n - 1);
    if pairs > cap {
        return Err(Error::HypothesisCap { pairs, cap });
    }
    Ok(())
}

fn alpha_pep(gamma: f64, nr: usize) -> f64 {
    let g = 0.5 * gamma;
    let alpha = 0.5 * (1.0 - (g / (1.0 + g)).sqrt());
    let mut sum = 0.0;
    let mut binom = 1.0;
    for p in 0..nr {
        if p > 0 {
            binom *= (nr - 1 + p) as f64 / p as f64;
        }
        sum += binom * (1.0 - alpha).powi(p as i32);
    }
    alpha.powi(nr as i32) * sum
}

/// SM detection-stage union bound over all `Nt * M` antenna/symbol hypotheses.
pub fn abep_sm_union_bound(config: &SchemeConfig, es_over_n0: f64) -> Result<f64> {
    if config.scheme() != Scheme::SmCim {
        return Err(invalid("SM union bound needs an SM-CIM configuration"));
    }
    if !(es_over_n0 >= 0.0) {
        return Err(invalid("Es/N0 must be nonnegative"));
    }
    let layout = config.layout();
    let bits = (layout.index_bits + layout.symbol_bits) as u32;
    if bits == 0 {
        return Ok(0.0);
    }
    let c = config.constellation();
    let m = c.len();
    let nr = config.num_rx();
    let hyps: Vec<(usize, usize)> = (0..config.num_tx())
        .flat_map(|nt| (0..m).map(move |k| (nt, k)))
        .collect();
    let label = |(nt, k): (usize, usize)| (nt << layout.symbol_bits) | gray_label(k);
    let mut total = 0.0;
    for &hi in &hyps {
        for &hq in &hyps {
            if hi == hq {
                continue;
            }
            let e = (label(hi) ^ label(hq)).count_ones() as f64;
            let dist = if hi.0 == hq.0 {
                (c[hi.1] - c[hq.1]).norm_sqr()
            } else {
                c[hi.1].norm_sqr() + c[hq.1].norm_sqr()
            };
            total += e * alpha_pep(0.5 * es_over_n0 * dist, nr);
        }
    }
    let norm = bits as f64 * (1u64 << bits) as f64;
    Ok((total / norm).clamp(0.0, 0.5))
}

/// Distinct difference spectra of a codeword set, each with its summed Hamming weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSpectra {
    groups: Vec<(PepSpectrum, u64)>,
    label_bits: u32,
    num_rx: usize,
    power: f64,
}

fn spectrum_key(values: &[f64]) -> Vec<i64> {
    values.iter().map(|v| (v * 1e10).round() as i64).collect()
}

impl PairSpectra {
    fn collect(
        labels: &[usize],
        label_bits: u32,
        num_rx: usize,
        power: f64,
        spectrum_of: impl Fn(usize, usize) -> Vec<f64>,
    ) -> Self {
        let mut map: BTreeMap<Vec<i64>, (Vec<f64>, u64)> = BTreeMap::new();
        for i in 0..labels.len() {
            for q in 0..labels.len() {
                if i == q {
                    continue;
                }
                let e = (labels[i] ^ labels[q]).count_ones() as u64;
                let mut values = spectrum_of(i, q);
                values.retain(|&v| v > RANK_TOL);
                values.sort_by(|a, b| b.total_cmp(a));
                let entry = map
                    .entry(spectrum_key(&values))
                    .or_insert_with(|| (values, 0));
                entry.1 += e;
            }
        }
        let groups = map
            .into_values()
            .map(|(values, weight)| (PepSpectrum::from_eigenvalues(values, 0), weight))
            .collect();
        PairSpectra {
            groups,
            label_bits,
            num_rx,
            power,
        }
    }

    /// Number of distinct spectra.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `1/(B 2^B) sum_i sum_q e_iq PEP(X_i -> X_q)`, clamped to `[0, 0.5]`.
    pub fn bound(&self, es_over_n0: f64, use_exact_pep: bool) -> Result<f64> {
        let es = es_over_n0 * self.power;
        let mut total = 0.0;
        for (spectrum, weight) in &self.groups {
            if *weight == 0 {
                continue;
            }
            if spectrum.rank() == 0 {
                // indistinguishable hypotheses: a coin flip
                total += 0.5 * *weight as f64;
                continue;
            }
            let pep = if use_exact_pep {
                pep_exact(spectrum, es, self.num_rx)?
            } else {
                pep_approx(spectrum, es, self.num_rx)?
            };
            total += *weight as f64 * pep;
        }
        let b = self.label_bits as f64;
        Ok((total / (b * 2f64.powf(b))).clamp(0.0, 0.5))
    }
}

fn stbc_words(config: &SchemeConfig) -> Result<Vec<(usize, usize, usize, CMatrix)>> {
    let spatial = config
        .spatial()
        .ok_or_else(|| invalid("STBC bound needs an STBC scheme"))?;
    let c = config.constellation();
    let m = c.len();
    let mut out = Vec::with_capacity(spatial.codeword_count() * m * m);
    for nz in 1..=spatial.codeword_count() {
        for k1 in 0..m {
            for k2 in 0..m {
                let cw = make_codeword(spatial, nz, c[k1], c[k2])?;
                out.push((nz, k1, k2, cw.matrix));
            }
        }
    }
    Ok(out)
}

/// Spectra for the STBC-SM detection stage (antenna-pair and symbol bits).
pub fn stbc_pair_spectra(config: &SchemeConfig, cap: u128) -> Result<PairSpectra> {
    if config.scheme() != Scheme::StbcSmCim {
        return Err(invalid("STBC-SM union bound needs an STBC-SM-CIM configuration"));
    }
    let layout = config.layout();
    let bits = (layout.index_bits + layout.symbol_bits) as u32;
    check_pairs(bits, cap)?;
    let words = stbc_words(config)?;
    let w = layout.symbol_bits / 2;
    let labels: Vec<usize> = words
        .iter()
        .map(|(nz, k1, k2, _)| ((nz - 1) << layout.symbol_bits) | (gray_label(*k1) << w) | gray_label(*k2))
        .collect();
    Ok(PairSpectra::collect(
        &labels,
        bits,
        config.num_rx(),
        config.power_scale().powi(2),
        |i, q| gram2_eigenvalues(&(&words[i].3 - &words[q].3)).to_vec(),
    ))
}

/// Detection-stage union bound for STBC-SM-CIM with the transmit power scale folded into Es.
pub fn abep_stbc_sm_union_bound(config: &SchemeConfig, es_over_n0: f64, use_exact_pep: bool) -> Result<f64> {
    stbc_pair_spectra(config, DEFAULT_PAIR_CAP)?.bound(es_over_n0, use_exact_pep)
}

/// Spectra for full ML detection of ESTBC-SM-CIM, including the sequence-pair bits.
///
/// Assumes mutually orthogonal unit-energy sequences, so the chip-level Gram
/// reduces to `W W^H` with `W` stacking the per-sequence coefficient differences.
pub fn estbc_pair_spectra(config: &SchemeConfig, cap: u128) -> Result<PairSpectra> {
    if config.scheme() != Scheme::EstbcSmCim {
        return Err(invalid("ESTBC bound needs an ESTBC-SM-CIM configuration"));
    }
    let layout = config.layout();
    let bits = layout.total() as u32;
    check_pairs(bits, cap)?;
    let pairs = config.sequence_pairs().expect("sequence pairs");
    let words = stbc_words(config)?;
    let m = config.modulation_order();
    let nz_count = config.spatial_count();
    let word_index = |nz: usize, k1: usize, k2: usize| ((nz - 1) * m + k1) * m + k2;
    let w = layout.symbol_bits / 4;

    // (label, sequences, coefficient word per sequence)
    let mut hyps: Vec<(usize, (usize, usize), usize, usize)> = Vec::new();
    for ns in 1..=pairs.len() {
        for nz in 1..=nz_count {
            for k11 in 0..m {
                for k21 in 0..m {
                    for k12 in 0..m {
                        for k22 in 0..m {
                            let mut label = nz - 1;
                            for k in [k11, k21, k12, k22] {
                                label = (label << w) | gray_label(k);
                            }
                            label = (label << layout.code_bits) | (ns - 1);
                            hyps.push((
                                label,
                                pairs.pair(ns).expect("in range"),
                                word_index(nz, k11, k21),
                                word_index(nz, k12, k22),
                            ));
                        }
                    }
                }
            }
        }
    }
    let nt = config.num_tx();
    let labels: Vec<usize> = hyps.iter().map(|h| h.0).collect();
    Ok(PairSpectra::collect(
        &labels,
        bits,
        config.num_rx(),
        config.power_scale().powi(2),
        |i, q| {
            let (hi, hq) = (&hyps[i], &hyps[q]);
            let mut seqs = vec![hi.1 .0, hi.1 .1, hq.1 .0, hq.1 .1];
            seqs.sort_unstable();
            seqs.dedup();
            let mut wmat = CMatrix::zeros(nt, 2 * seqs.len());
            for (slot, &s) in seqs.iter().enumerate() {
                let mut diff = CMatrix::zeros(nt, 2);
                for (h, sign) in [(hi, 1.0), (hq, -1.0)] {
                    if h.1 .0 == s {
                        diff += &words[h.2].3 * Cx::new(sign, 0.0);
                    }
                    if h.1 .1 == s {
                        diff += &words[h.3].3 * Cx::new(sign, 0.0);
                    }
                }
                wmat.columns_mut(2 * slot, 2).copy_from(&diff);
            }
            dense_spectrum(&wmat)
        },
    ))
}

/// Full-ML union bound for ESTBC-SM-CIM over all `2^(2 bt)` block hypotheses.
pub fn abep_estbc_ml_bound(config: &SchemeConfig, es_over_n0: f64, use_exact_pep: bool, cap: u128) -> Result<f64> {
    estbc_pair_spectra(config, cap)?.bound(es_over_n0, use_exact_pep)
}

/// Precomputed analytic ABEP for one configuration (perfect CSI, no correlation).
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    config: SchemeConfig,
    spectra: Option<PairSpectra>,
    use_exact_pep: bool,
}

impl AnalyticModel {
    pub fn new(config: &SchemeConfig, cap: u128) -> Result<Self> {
        let spectra = match config.scheme() {
            Scheme::SmCim => None,
            Scheme::StbcSmCim => Some(stbc_pair_spectra(config, cap)?),
            Scheme::EstbcSmCim => Some(estbc_pair_spectra(config, cap)?),
        };
        Ok(AnalyticModel {
            config: config.clone(),
            spectra,
            use_exact_pep: true,
        })
    }

    pub fn with_exact_pep(mut self, exact: bool) -> Self {
        self.use_exact_pep = exact;
        self
    }

    /// ABEP at `Es/N0` given in dB.
    pub fn abep(&self, es_over_n0_db: f64) -> Result<AbepBreakdown> {
        let es = 10f64.powf(es_over_n0_db / 10.0);
        let cfg = &self.config;
        let despread = |diversity: usize| -> Result<f64> {
            let nc = cfg.num_codes();
            if nc < 2 {
                return Ok(0.0);
            }
            let pe = despreading_error(es, diversity as u32, nc as u32)?;
            abep_despreading_bits(pe, nc as u32)
        };
        match (cfg.scheme(), &self.spectra) {
            (Scheme::SmCim, _) => {
                let p1 = abep_sm_union_bound(cfg, es)?;
                abep_total(p1, despread(cfg.num_rx())?, cfg.layout())
            }
            (Scheme::StbcSmCim, Some(s)) => {
                let p1 = s.bound(es, self.use_exact_pep)?;
                abep_total(p1, despread(2 * cfg.num_rx())?, cfg.layout())
            }
            (Scheme::EstbcSmCim, Some(s)) => {
                let pb = s.bound(es, self.use_exact_pep)?;
                Ok(AbepBreakdown {
                    p1_detection: pb,
                    p2_despreading: None,
                    pb_total: pb,
                    bit_weights: (1.0, 0.0),
                })
            }
            _ => unreachable!("spectra prepared for STBC schemes"),
        }
    }
}

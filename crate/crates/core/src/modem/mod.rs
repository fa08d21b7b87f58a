//! Bit segmentation, PSK mapping, transmitters and detectors for SM-CIM,
//! STBC-SM-CIM and ESTBC-SM-CIM.
//!
//! Bits are handled per *block*: one symbol interval for SM-CIM, two for the
//! STBC schemes. A block is split contiguously into antenna/pair index bits,
//! constellation bits and code index bits, in that order. Index fields use
//! natural binary (MSB first); constellation symbols use Gray labeling.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codebook::{enumerate_sequence_pairs, SequencePairSet, SpreadingCodebook};
use crate::error::{invalid, Error, Result};
use crate::spacetime::{build_stbc_sm_codebook, StbcSmCodebook};
use crate::Cx;

mod detect;
mod tx;

pub use detect::{
    detect_lc, detect_lc_estbc_sm_cim, detect_lc_sm_cim, detect_lc_stbc_sm_cim, detect_ml,
    equivalent_channel,
};
pub use tx::{transmit, tx_estbc_sm_cim, tx_sm_cim, tx_stbc_sm_cim, TransmitFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SmCim,
    StbcSmCim,
    EstbcSmCim,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::SmCim => "sm_cim",
            Scheme::StbcSmCim => "stbc_sm_cim",
            Scheme::EstbcSmCim => "estbc_sm_cim",
        }
    }

    /// Symbol intervals per block.
    pub fn intervals(self) -> usize {
        match self {
            Scheme::SmCim => 1,
            _ => 2,
        }
    }

    /// Amplitude scale applied to the transmit matrix.
    pub fn power_scale(self) -> f64 {
        match self {
            Scheme::SmCim => 1.0,
            Scheme::StbcSmCim => 0.5f64.sqrt(),
            Scheme::EstbcSmCim => 0.5,
        }
    }

    /// PSK symbols carried per block.
    pub fn symbols_per_block(self) -> usize {
        match self {
            Scheme::SmCim => 1,
            Scheme::StbcSmCim => 2,
            Scheme::EstbcSmCim => 4,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-block bit allocation `(b1, b2, b3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitLayout {
    pub index_bits: usize,
    pub symbol_bits: usize,
    pub code_bits: usize,
}

impl BitLayout {
    pub fn total(&self) -> usize {
        self.index_bits + self.symbol_bits + self.code_bits
    }
}

fn exact_log2(value: usize, what: &str) -> Result<usize> {
    if value == 0 || !value.is_power_of_two() {
        return Err(invalid(format!("{what} = {value} must be a power of two")));
    }
    Ok(value.trailing_zeros() as usize)
}

/// One transceiver instance.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    scheme: Scheme,
    num_tx: usize,
    num_rx: usize,
    modulation_order: usize,
    codebook: Arc<SpreadingCodebook>,
    spatial: Option<StbcSmCodebook>,
    seq_pairs: Option<SequencePairSet>,
    layout: BitLayout,
    constellation: Vec<Cx>,
}

impl SchemeConfig {
    pub fn new(
        scheme: Scheme,
        num_tx: usize,
        num_rx: usize,
        modulation_order: usize,
        codebook: Arc<SpreadingCodebook>,
    ) -> Result<Self> {
        if num_rx == 0 {
            return Err(invalid("Nr must be at least 1"));
        }
        let log2m = exact_log2(modulation_order, "M")?;
        if log2m == 0 {
            return Err(invalid("M must be at least 2"));
        }
        let nc = codebook.count();
        let (spatial, seq_pairs, layout) = match scheme {
            Scheme::SmCim => {
                let layout = BitLayout {
                    index_bits: exact_log2(num_tx, "Nt")?,
                    symbol_bits: log2m,
                    code_bits: exact_log2(nc, "Nc")?,
                };
                (None, None, layout)
            }
            Scheme::StbcSmCim => {
                let spatial = build_stbc_sm_codebook(num_tx, modulation_order)?;
                let layout = BitLayout {
                    index_bits: exact_log2(spatial.codeword_count(), "Nz")?,
                    symbol_bits: 2 * log2m,
                    code_bits: exact_log2(nc, "Nc")?,
                };
                (Some(spatial), None, layout)
            }
            Scheme::EstbcSmCim => {
                let spatial = build_stbc_sm_codebook(num_tx, modulation_order)?;
                let pairs = enumerate_sequence_pairs(nc)?;
                let layout = BitLayout {
                    index_bits: exact_log2(spatial.codeword_count(), "Nz")?,
                    symbol_bits: 4 * log2m,
                    code_bits: exact_log2(pairs.len(), "Ns")?,
                };
                (Some(spatial), Some(pairs), layout)
            }
        };
        let constellation = (0..modulation_order).map(|k| psk_point(k, modulation_order)).collect();
        Ok(SchemeConfig {
            scheme,
            num_tx,
            num_rx,
            modulation_order,
            codebook,
            spatial,
            seq_pairs,
            layout,
            constellation,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    pub fn num_rx(&self) -> usize {
        self.num_rx
    }

    pub fn num_codes(&self) -> usize {
        self.codebook.count()
    }

    pub fn modulation_order(&self) -> usize {
        self.modulation_order
    }

    pub fn codebook(&self) -> &SpreadingCodebook {
        &self.codebook
    }

    pub fn spatial(&self) -> Option<&StbcSmCodebook> {
        self.spatial.as_ref()
    }

    pub fn sequence_pairs(&self) -> Option<&SequencePairSet> {
        self.seq_pairs.as_ref()
    }

    pub fn layout(&self) -> BitLayout {
        self.layout
    }

    /// Bits per block (`b_t` for SM-CIM, `2 b_t` for the STBC schemes).
    pub fn block_bits(&self) -> usize {
        self.layout.total()
    }

    /// Bits per symbol interval, `b_t` (half-integer values are possible).
    pub fn bits_per_interval(&self) -> f64 {
        self.layout.total() as f64 / self.scheme.intervals() as f64
    }

    /// Columns of the transmit matrix: `L` or `2L`.
    pub fn span(&self) -> usize {
        self.codebook.len() * self.scheme.intervals()
    }

    pub fn power_scale(&self) -> f64 {
        self.scheme.power_scale()
    }

    /// Spatial hypotheses: `Nt` for SM-CIM, `Nz` otherwise.
    pub fn spatial_count(&self) -> usize {
        match &self.spatial {
            Some(s) => s.codeword_count(),
            None => self.num_tx,
        }
    }

    /// Code hypotheses: `Nc`, or `Ns` for ESTBC-SM-CIM.
    pub fn code_count(&self) -> usize {
        match &self.seq_pairs {
            Some(p) => p.len(),
            None => self.num_codes(),
        }
    }

    /// Number of distinct transmit matrices searched by the ML detector.
    pub fn hypothesis_count(&self) -> usize {
        self.code_count()
            * self.spatial_count()
            * self.modulation_order.pow(self.scheme.symbols_per_block() as u32)
    }

    pub fn constellation(&self) -> &[Cx] {
        &self.constellation
    }
}

/// Block bits split into the three fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitFields {
    pub index_bits: Vec<u8>,
    pub symbol_bits: Vec<u8>,
    pub code_bits: Vec<u8>,
}

pub fn split_bits(config: &SchemeConfig, bits: &[u8]) -> Result<BitFields> {
    let layout = config.layout;
    if bits.len() != layout.total() {
        return Err(invalid(format!(
            "block needs {} bits, got {}",
            layout.total(),
            bits.len()
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(invalid("bits must be 0 or 1"));
    }
    let (index, rest) = bits.split_at(layout.index_bits);
    let (symbols, code) = rest.split_at(layout.symbol_bits);
    Ok(BitFields {
        index_bits: index.to_vec(),
        symbol_bits: symbols.to_vec(),
        code_bits: code.to_vec(),
    })
}

pub(crate) fn bits_to_usize(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub(crate) fn usize_to_bits(value: usize, width: usize, out: &mut Vec<u8>) {
    for shift in (0..width).rev() {
        out.push(((value >> shift) & 1) as u8);
    }
}

fn gray_decode(mut g: usize) -> usize {
    let mut k = g;
    while g > 0 {
        g >>= 1;
        k ^= g;
    }
    k
}

fn psk_point(k: usize, m: usize) -> Cx {
    if m == 2 {
        // exact antipodal points
        return if k == 0 { Cx::new(1.0, 0.0) } else { Cx::new(-1.0, 0.0) };
    }
    Cx::from_polar(1.0, 2.0 * PI * k as f64 / m as f64)
}

/// Gray label of constellation index `k`.
pub fn gray_label(k: usize) -> usize {
    k ^ (k >> 1)
}

/// Constellation index for a Gray-labeled bit group.
pub(crate) fn psk_index(bits: &[u8]) -> usize {
    gray_decode(bits_to_usize(bits))
}

/// Maps `log2 M` Gray-labeled bits to the PSK point `exp(j 2 pi k / M)`.
pub fn psk_map(bits: &[u8], m: usize) -> Result<Cx> {
    let width = exact_log2(m, "M")?;
    if bits.len() != width {
        return Err(invalid(format!("PSK-{m} needs {width} bits, got {}", bits.len())));
    }
    Ok(psk_point(psk_index(bits), m))
}

/// Hard demapping of a symbol to its Gray-labeled bits (nearest point).
pub fn psk_demap(symbol: Cx, m: usize) -> Result<Vec<u8>> {
    let width = exact_log2(m, "M")?;
    let k = (0..m)
        .min_by(|&a, &b| {
            (symbol - psk_point(a, m))
                .norm_sqr()
                .total_cmp(&(symbol - psk_point(b, m)).norm_sqr())
        })
        .expect("M >= 1");
    let mut out = Vec::with_capacity(width);
    usize_to_bits(gray_label(k), width, &mut out);
    Ok(out)
}

/// Resolved block content: code choice, spatial choice and constellation indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct BlockIndices {
    /// `nc` or `ns` (1-based).
    pub code: usize,
    /// `nt` or `nz` (1-based).
    pub spatial: usize,
    /// Constellation indices, `symbols_per_block` of them.
    pub symbols: Vec<usize>,
}

impl BlockIndices {
    pub fn from_fields(config: &SchemeConfig, fields: &BitFields) -> Result<Self> {
        let layout = config.layout;
        if fields.index_bits.len() != layout.index_bits
            || fields.symbol_bits.len() != layout.symbol_bits
            || fields.code_bits.len() != layout.code_bits
        {
            return Err(invalid("bit fields do not match the scheme layout"));
        }
        let width = layout.symbol_bits / config.scheme.symbols_per_block();
        let symbols = fields.symbol_bits.chunks(width).map(psk_index).collect();
        Ok(BlockIndices {
            code: bits_to_usize(&fields.code_bits) + 1,
            spatial: bits_to_usize(&fields.index_bits) + 1,
            symbols,
        })
    }

    pub fn to_bits(&self, config: &SchemeConfig) -> Vec<u8> {
        let layout = config.layout;
        let width = layout.symbol_bits / config.scheme.symbols_per_block();
        let mut out = Vec::with_capacity(layout.total());
        usize_to_bits(self.spatial - 1, layout.index_bits, &mut out);
        for &k in &self.symbols {
            usize_to_bits(gray_label(k), width, &mut out);
        }
        usize_to_bits(self.code - 1, layout.code_bits, &mut out);
        out
    }
}

/// Estimated spreading choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeEstimate {
    /// Sequence index `nc` (1-based).
    Single(usize),
    /// Position `ns` in the sequence-pair set and the pair itself.
    Pair { position: usize, pair: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub code: CodeEstimate,
    /// `nt` (SM-CIM) or `nz` (STBC schemes), 1-based.
    pub spatial: usize,
    pub symbols: Vec<Cx>,
    pub decoded_bits: Vec<u8>,
    /// Candidate metrics evaluated by the detector.
    pub metric_evaluations: usize,
}

impl DetectionResult {
    pub(crate) fn from_indices(config: &SchemeConfig, idx: &BlockIndices, metric_evaluations: usize) -> Self {
        let code = match config.sequence_pairs() {
            Some(pairs) => CodeEstimate::Pair {
                position: idx.code,
                pair: pairs.pair(idx.code).expect("position in range"),
            },
            None => CodeEstimate::Single(idx.code),
        };
        DetectionResult {
            code,
            spatial: idx.spatial,
            symbols: idx.symbols.iter().map(|&k| config.constellation[k]).collect(),
            decoded_bits: idx.to_bits(config),
            metric_evaluations,
        }
    }
}

/// Rebuilds the block bits from a detection result.
pub fn assemble_bits(result: &DetectionResult, config: &SchemeConfig) -> Result<Vec<u8>> {
    let code = match (result.code, config.sequence_pairs()) {
        (CodeEstimate::Single(nc), None) => nc,
        (CodeEstimate::Pair { pair, .. }, Some(pairs)) => pairs
            .position(pair)
            .ok_or_else(|| invalid(format!("pair {pair:?} is not in the sequence-pair set")))?,
        _ => return Err(invalid("code estimate does not match the scheme")),
    };
    if code == 0 || code > config.code_count() {
        return Err(Error::IndexOutOfRange {
            index: code,
            max: config.code_count(),
        });
    }
    if result.spatial == 0 || result.spatial > config.spatial_count() {
        return Err(Error::IndexOutOfRange {
            index: result.spatial,
            max: config.spatial_count(),
        });
    }
    let symbols = result
        .symbols
        .iter()
        .map(|&x| {
            (0..config.modulation_order)
                .min_by(|&a, &b| {
                    (x - config.constellation[a])
                        .norm_sqr()
                        .total_cmp(&(x - config.constellation[b]).norm_sqr())
                })
                .expect("non-empty constellation")
        })
        .collect();
    let idx = BlockIndices {
        code,
        spatial: result.spatial,
        symbols,
    };
    Ok(idx.to_bits(config))
}

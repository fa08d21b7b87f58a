use super::{split_bits, BitFields, BlockIndices, Scheme, SchemeConfig};
use crate::error::{invalid, Result};
use crate::{CMatrix, Cx};

/// Transmit matrix for one block, power scale already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitFrame {
    /// `Nt x L` (SM-CIM) or `Nt x 2L` (STBC schemes).
    pub matrix: CMatrix,
    pub power_scale: f64,
}

impl TransmitFrame {
    /// Average energy per symbol interval, `||X||_F^2 / intervals`.
    pub fn energy_per_interval(&self, intervals: usize) -> f64 {
        self.matrix.norm_squared() / intervals as f64
    }
}

/// Unscaled nonzero rows of a transmit matrix. At most two antennas are active.
#[derive(Debug, Clone)]
pub(crate) struct ActiveRows {
    pub a: usize,
    pub b: Option<usize>,
    pub row_a: Vec<Cx>,
    pub row_b: Vec<Cx>,
}

impl ActiveRows {
    pub fn with_span(span: usize) -> Self {
        ActiveRows {
            a: 0,
            b: None,
            row_a: vec![Cx::default(); span],
            row_b: vec![Cx::default(); span],
        }
    }

    /// Fills the rows for a block. Indices must be in range.
    pub fn fill(&mut self, config: &SchemeConfig, idx: &BlockIndices) {
        let cb = config.codebook();
        let len = cb.len();
        let c = config.constellation();
        match config.scheme() {
            Scheme::SmCim => {
                let z = cb.sequence(idx.code);
                let x = c[idx.symbols[0]];
                self.a = idx.spatial - 1;
                self.b = None;
                for (t, zt) in z.iter().enumerate() {
                    self.row_a[t] = x * zt;
                }
            }
            Scheme::StbcSmCim => {
                let st = config.spatial().expect("spatial codebook");
                let (pa, pb) = st.pairs()[idx.spatial - 1];
                let theta = st.rotation(idx.spatial);
                let z = cb.sequence(idx.code);
                let (x1, x2) = (theta * c[idx.symbols[0]], theta * c[idx.symbols[1]]);
                let (x1c, x2c) = (theta * c[idx.symbols[0]].conj(), theta * c[idx.symbols[1]].conj());
                self.a = pa - 1;
                self.b = Some(pb - 1);
                for (t, zt) in z.iter().enumerate() {
                    self.row_a[t] = x1 * zt;
                    self.row_a[len + t] = -x2c * zt;
                    self.row_b[t] = x2 * zt;
                    self.row_b[len + t] = x1c * zt;
                }
            }
            Scheme::EstbcSmCim => {
                let st = config.spatial().expect("spatial codebook");
                let pairs = config.sequence_pairs().expect("sequence pairs");
                let (pa, pb) = st.pairs()[idx.spatial - 1];
                let theta = st.rotation(idx.spatial);
                let (c1, c2) = pairs.pairs()[idx.code - 1];
                let (z1, z2) = (cb.sequence(c1), cb.sequence(c2));
                // symbol order: x_1^1, x_2^1, x_1^2, x_2^2
                let s = |i: usize| c[idx.symbols[i]];
                let (x11, x21, x12, x22) = (s(0), s(1), s(2), s(3));
                self.a = pa - 1;
                self.b = Some(pb - 1);
                for t in 0..len {
                    let (u, v) = (z1[t], z2[t]);
                    self.row_a[t] = theta * (x11 * u + x12 * v);
                    self.row_a[len + t] = -theta * (x21.conj() * u + x22.conj() * v);
                    self.row_b[t] = theta * (x21 * u + x22 * v);
                    self.row_b[len + t] = theta * (x11.conj() * u + x12.conj() * v);
                }
            }
        }
    }

    pub fn to_matrix(&self, num_tx: usize, scale: f64) -> CMatrix {
        let span = self.row_a.len();
        let mut m = CMatrix::zeros(num_tx, span);
        for t in 0..span {
            m[(self.a, t)] = self.row_a[t] * scale;
        }
        if let Some(b) = self.b {
            for t in 0..span {
                m[(b, t)] = self.row_b[t] * scale;
            }
        }
        m
    }
}

fn check_scheme(config: &SchemeConfig, scheme: Scheme) -> Result<()> {
    if config.scheme() != scheme {
        return Err(invalid(format!(
            "configuration is for {}, not {}",
            config.scheme(),
            scheme
        )));
    }
    Ok(())
}

pub(crate) fn frame_from_indices(config: &SchemeConfig, idx: &BlockIndices) -> TransmitFrame {
    let mut rows = ActiveRows::with_span(config.span());
    rows.fill(config, idx);
    TransmitFrame {
        matrix: rows.to_matrix(config.num_tx(), config.power_scale()),
        power_scale: config.power_scale(),
    }
}

fn build(config: &SchemeConfig, fields: &BitFields, scheme: Scheme) -> Result<TransmitFrame> {
    check_scheme(config, scheme)?;
    let idx = BlockIndices::from_fields(config, fields)?;
    Ok(frame_from_indices(config, &idx))
}

/// SM-CIM: antenna `nt` sends `x * z_nc^T`; all other rows are zero.
pub fn tx_sm_cim(config: &SchemeConfig, fields: &BitFields) -> Result<TransmitFrame> {
    build(config, fields, Scheme::SmCim)
}

/// STBC-SM-CIM: the rotated Alamouti codeword of pair `nz`, spread by `z_nc`.
pub fn tx_stbc_sm_cim(config: &SchemeConfig, fields: &BitFields) -> Result<TransmitFrame> {
    build(config, fields, Scheme::StbcSmCim)
}

/// ESTBC-SM-CIM: two Alamouti codewords on the same pair, spread by the
/// two sequences of pair `ns` and summed.
pub fn tx_estbc_sm_cim(config: &SchemeConfig, fields: &BitFields) -> Result<TransmitFrame> {
    build(config, fields, Scheme::EstbcSmCim)
}

/// Builds the transmit frame for one block of bits.
pub fn transmit(config: &SchemeConfig, bits: &[u8]) -> Result<TransmitFrame> {
    let fields = split_bits(config, bits)?;
    build(config, &fields, config.scheme())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::gen_cyclic_chirp;
    use std::sync::Arc;

    fn cfg(scheme: Scheme, nt: usize, m: usize, nc: usize) -> SchemeConfig {
        let cb = Arc::new(gen_cyclic_chirp(3, 1, nc).unwrap());
        SchemeConfig::new(scheme, nt, 2, m, cb).unwrap()
    }

    fn active_rows(m: &CMatrix) -> Vec<usize> {
        (0..m.nrows())
            .filter(|&r| m.row(r).iter().any(|v| v.norm() > 0.0))
            .collect()
    }

    #[test]
    fn sm_cim_single_active_row() {
        let c = cfg(Scheme::SmCim, 4, 4, 4);
        // nt = 3, symbol bits 01 -> k = 1 (j), nc = 2
        let f = transmit(&c, &[1, 0, 0, 1, 0, 1]).unwrap();
        assert_eq!(active_rows(&f.matrix), vec![2]);
        let z = c.codebook().sequence(2);
        for t in 0..z.len() {
            assert!((f.matrix[(2, t)] - Cx::i() * z[t]).norm() < 1e-14);
        }
        assert!((f.energy_per_interval(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scheme_mismatch_rejected() {
        let c = cfg(Scheme::SmCim, 4, 4, 4);
        let fields = split_bits(&c, &[0; 6]).unwrap();
        assert!(tx_stbc_sm_cim(&c, &fields).is_err());
        assert!(tx_sm_cim(&c, &fields).is_ok());
    }

    #[test]
    fn stbc_frame_matches_codeword() {
        let c = cfg(Scheme::StbcSmCim, 4, 4, 4);
        let st = c.spatial().unwrap();
        // nz = 3 (rotated codebook), symbols k = 0 and k = 2, nc = 4
        let bits = [1, 0, 0, 0, 1, 1, 1, 1];
        let f = transmit(&c, &bits).unwrap();
        let cw = crate::spacetime::make_codeword(st, 3, Cx::new(1.0, 0.0), Cx::new(-1.0, 0.0)).unwrap();
        let z = c.codebook().sequence(4);
        let l = z.len();
        let s = 0.5f64.sqrt();
        for r in 0..4 {
            for t in 0..l {
                assert!((f.matrix[(r, t)] - s * cw.matrix[(r, 0)] * z[t]).norm() < 1e-14);
                assert!((f.matrix[(r, l + t)] - s * cw.matrix[(r, 1)] * z[t]).norm() < 1e-14);
            }
        }
        assert!((f.energy_per_interval(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estbc_energy_and_rows() {
        let c = cfg(Scheme::EstbcSmCim, 4, 2, 4);
        for pattern in 0..(1usize << c.block_bits()) {
            let mut bits = Vec::new();
            super::super::usize_to_bits(pattern, c.block_bits(), &mut bits);
            let f = transmit(&c, &bits).unwrap();
            assert!((f.energy_per_interval(2) - 1.0).abs() < 1e-12);
            assert_eq!(active_rows(&f.matrix).len(), 2);
        }
    }
}

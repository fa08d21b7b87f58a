//! Rayleigh block-fading channels with optional Kronecker correlation and
//! imperfect CSI, plus AWGN.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::psd_sqrt;
use crate::{CMatrix, Cx};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub num_rx: usize,
    pub num_tx: usize,
    /// Correlation strength `r`; entries of both correlation matrices are `r^|i-j|`.
    #[serde(default)]
    pub corr_r: f64,
    /// Variance of the CSI error entries.
    #[serde(default)]
    pub csi_error_var: f64,
}

impl ChannelConfig {
    pub fn iid(num_rx: usize, num_tx: usize) -> Self {
        ChannelConfig {
            num_rx,
            num_tx,
            corr_r: 0.0,
            csi_error_var: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_rx == 0 || self.num_tx == 0 {
            return Err(invalid("channel dimensions must be positive"));
        }
        if !(0.0..=1.0).contains(&self.corr_r) {
            return Err(invalid(format!("corr_r = {} outside [0, 1]", self.corr_r)));
        }
        if !(self.csi_error_var >= 0.0 && self.csi_error_var.is_finite()) {
            return Err(invalid(format!(
                "csi_error_var = {} must be finite and nonnegative",
                self.csi_error_var
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_true: CMatrix,
    /// What the receiver sees.
    pub h_est: CMatrix,
}

/// Exponential correlation matrix with entries `r^|i-j|`.
pub fn correlation_matrix(n: usize, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| r.powi(i.abs_diff(j) as i32))
}

/// One draw from CN(0, var).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Cx {
    let s = (0.5 * var).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Cx::new(s * re, s * im)
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, var: f64, rng: &mut R) -> CMatrix {
    // column-major fill so the draw order is fixed
    let mut m = CMatrix::zeros(rows, cols);
    for v in m.iter_mut() {
        *v = complex_gaussian(rng, var);
    }
    m
}

/// Precomputed correlation square roots for repeated draws.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    config: ChannelConfig,
    rx_sqrt: Option<CMatrix>,
    tx_sqrt: Option<CMatrix>,
}

impl ChannelModel {
    pub fn new(config: ChannelConfig) -> Result<Self> {
        config.validate()?;
        let root = |n: usize| {
            let m = psd_sqrt(&correlation_matrix(n, config.corr_r));
            m.map(|v| Cx::new(v, 0.0))
        };
        let (rx_sqrt, tx_sqrt) = if config.corr_r > 0.0 {
            (Some(root(config.num_rx)), Some(root(config.num_tx)))
        } else {
            (None, None)
        };
        Ok(ChannelModel {
            config,
            rx_sqrt,
            tx_sqrt,
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let c = &self.config;
        let g = gaussian_matrix(c.num_rx, c.num_tx, 1.0, rng);
        let h_true = match (&self.rx_sqrt, &self.tx_sqrt) {
            (Some(rr), Some(rt)) => rr * g * rt,
            _ => g,
        };
        let h_est = if c.csi_error_var > 0.0 {
            &h_true + gaussian_matrix(c.num_rx, c.num_tx, c.csi_error_var, rng)
        } else {
            h_true.clone()
        };
        ChannelRealization { h_true, h_est }
    }
}

/// Draws `H = Rr^{1/2} G Rt^{1/2}` and `H_est = H + E`.
pub fn draw_channel<R: Rng + ?Sized>(config: &ChannelConfig, rng: &mut R) -> Result<ChannelRealization> {
    Ok(ChannelModel::new(*config)?.draw(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub es_over_n0_db: f64,
    pub symbol_energy: f64,
}

impl NoiseConfig {
    pub fn new(es_over_n0_db: f64) -> Self {
        NoiseConfig {
            es_over_n0_db,
            symbol_energy: 1.0,
        }
    }

    /// `N0 = Es / 10^(snr/10)`; zero for an infinite SNR.
    pub fn n0(&self) -> f64 {
        self.symbol_energy / 10f64.powf(self.es_over_n0_db / 10.0)
    }
}

/// Adds i.i.d. CN(0, N0) noise. `N0 = 0` returns the input unchanged.
pub fn add_awgn<R: Rng + ?Sized>(clean: &CMatrix, noise: &NoiseConfig, rng: &mut R) -> Result<CMatrix> {
    let n0 = noise.n0();
    if !(n0 >= 0.0) || !noise.symbol_energy.is_finite() || noise.symbol_energy <= 0.0 {
        return Err(invalid("noise configuration must give a nonnegative N0 and positive Es"));
    }
    let mut out = clean.clone();
    if n0 > 0.0 {
        for v in out.iter_mut() {
            *v += complex_gaussian(rng, n0);
        }
    }
    Ok(out)
}

/// Processing gain `10 log10 L` in dB.
pub fn spreading_gain_db(length: usize) -> Result<f64> {
    if length == 0 {
        return Err(invalid("L must be at least 1"));
    }
    Ok(10.0 * (length as f64).log10())
}

//! Seeded Monte-Carlo BER sweeps.
//!
//! Every block draws its bits, channel and noise from its own ChaCha8 stream.
//! The key for consumer `tag` at grid point `i` is
//! `SHA-256("cim-sim/v1" | master_seed | i | tag)` (little-endian integers)
//! and the stream number is the block index, so a block's realization does not
//! depend on which worker runs it. Blocks run in fixed chunks of
//! [`CHUNK_BLOCKS`]; the early-stop test happens only between chunks, which
//! keeps the block count independent of the worker count too.

mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{AnalyticModel, Detector, DEFAULT_PAIR_CAP};
use crate::channel::{add_awgn, ChannelConfig, ChannelModel, ChannelRealization, NoiseConfig};
use crate::error::{invalid, invalid_field, Result};
use crate::modem::{detect_lc, detect_ml, transmit, SchemeConfig};
use crate::CMatrix;

pub use stats::{ci95_halfwidth, gap_db, snr_at_ber, two_proportion_z, BerPoint, RELIABLE_ERRORS};

/// Blocks per scheduling chunk.
pub const CHUNK_BLOCKS: u64 = 1024;

const STREAM_DOMAIN: &[u8] = b"cim-sim/v1";

const TAG_BITS: u64 = 0;
const TAG_CHANNEL: u64 = 1;
const TAG_NOISE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    Ml,
    Lc,
    Both,
}

impl DetectorMode {
    pub fn detectors(self) -> &'static [Detector] {
        match self {
            DetectorMode::Ml => &[Detector::Ml],
            DetectorMode::Lc => &[Detector::Lc],
            DetectorMode::Both => &[Detector::Ml, Detector::Lc],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorMode::Ml => "ml",
            DetectorMode::Lc => "lc",
            DetectorMode::Both => "both",
        }
    }
}

/// Everything that determines a simulated curve.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scheme: SchemeConfig,
    pub channel: ChannelConfig,
    /// Es/N0 points in dB, strictly increasing.
    pub snr_grid_db: Vec<f64>,
    pub max_blocks: u64,
    /// Stop a point once this many bit errors have accumulated.
    pub target_errors: u64,
    pub master_seed: u64,
    pub detector: DetectorMode,
    /// Symbol duration in seconds, for data-rate reporting.
    pub symbol_duration: f64,
}

impl ExperimentSpec {
    /// Spec with the default budget (10^6 blocks, 500 target errors) and an i.i.d. channel.
    pub fn new(scheme: SchemeConfig, snr_grid_db: Vec<f64>, master_seed: u64, detector: DetectorMode) -> Self {
        let channel = ChannelConfig::iid(scheme.num_rx(), scheme.num_tx());
        ExperimentSpec {
            scheme,
            channel,
            snr_grid_db,
            max_blocks: 1_000_000,
            target_errors: 500,
            master_seed,
            detector,
            symbol_duration: 1.0,
        }
    }

    /// Checks the spec; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if let Err(e) = self.channel.validate() {
            return Err(invalid_field("channel", e.to_string()));
        }
        if self.channel.num_rx != self.scheme.num_rx() || self.channel.num_tx != self.scheme.num_tx() {
            return Err(invalid_field(
                "channel",
                format!(
                    "channel is {}x{} but the scheme needs {}x{}",
                    self.channel.num_rx,
                    self.channel.num_tx,
                    self.scheme.num_rx(),
                    self.scheme.num_tx()
                ),
            ));
        }
        if self.snr_grid_db.is_empty() {
            return Err(invalid_field("snr_grid_db", "grid is empty"));
        }
        if let Some(v) = self.snr_grid_db.iter().find(|v| !v.is_finite()) {
            return Err(invalid_field("snr_grid_db", format!("non-finite entry {v}")));
        }
        if let Some(w) = self.snr_grid_db.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid_field(
                "snr_grid_db",
                format!("grid must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        if self.max_blocks < 1000 {
            return Err(invalid_field("max_blocks", format!("{} is below 1000", self.max_blocks)));
        }
        if self.target_errors < RELIABLE_ERRORS {
            return Err(invalid_field(
                "target_errors",
                format!("{} is below {RELIABLE_ERRORS}", self.target_errors),
            ));
        }
        if !(self.symbol_duration > 0.0 && self.symbol_duration.is_finite()) {
            return Err(invalid_field("symbol_duration_ts", "must be positive and finite"));
        }
        Ok(())
    }

    /// Canonical JSON description hashed into [`ExperimentSpec::digest`].
    pub fn canonical_json(&self) -> serde_json::Value {
        let s = &self.scheme;
        let cb = s.codebook();
        serde_json::json!({
            "scheme": s.scheme().as_str(),
            "nt": s.num_tx(),
            "nr": s.num_rx(),
            "m": s.modulation_order(),
            "codebook": {
                "family": cb.family().as_str(),
                "length": cb.len(),
                "count": cb.count(),
                "sha256": hex::encode(Sha256::digest(cb.to_text().as_bytes())),
            },
            "channel": self.channel,
            "snr_grid_db": self.snr_grid_db,
            "max_blocks": self.max_blocks,
            "target_errors": self.target_errors,
            "master_seed": self.master_seed,
            "detector": self.detector,
            "symbol_duration": self.symbol_duration,
        })
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().to_string().as_bytes()))
    }
}

/// Root of the random streams for one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamRoot {
    pub master_seed: u64,
    pub snr_index: u64,
}

impl StreamRoot {
    fn key(&self, tag: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(STREAM_DOMAIN);
        h.update(self.master_seed.to_le_bytes());
        h.update(self.snr_index.to_le_bytes());
        h.update(tag.to_le_bytes());
        h.finalize().into()
    }

    /// RNG for `tag` in block `block`.
    pub fn block_rng(&self, tag: u64, block: u64) -> ChaCha8Rng {
        keyed_rng(self.key(tag), block)
    }
}

fn keyed_rng(key: [u8; 32], block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(block);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; results do not depend on this.
    pub workers: usize,
    /// Hash every block's realization into a per-point stream digest.
    pub stream_digest: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 1,
            stream_digest: false,
        }
    }
}

/// One analytic ABEP value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    pub snr_db: f64,
    pub pb: f64,
    pub p1: f64,
    pub p2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub detector: Detector,
    pub spec_digest: String,
    pub points: Vec<BerPoint>,
    pub analytic_points: Option<Vec<AnalyticPoint>>,
    /// Per-point hex digests of the consumed realizations (empty unless requested).
    pub stream_digests: Vec<String>,
}

impl BerCurve {
    /// `(snr_db, ber)` pairs.
    pub fn ber_pairs(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.snr_db, p.ber)).collect()
    }
}

/// Paired ML and LC curves over identical realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorComparison {
    pub ml: BerCurve,
    pub lc: BerCurve,
}

impl DetectorComparison {
    pub fn streams_match(&self) -> bool {
        !self.ml.stream_digests.is_empty() && self.ml.stream_digests == self.lc.stream_digests
    }

    /// `snr_LC - snr_ML` at `level`.
    pub fn lc_penalty_db(&self, level: f64) -> Result<f64> {
        gap_db(&self.ml.ber_pairs(), &self.lc.ber_pairs(), level)
    }
}

struct PointContext<'a> {
    config: &'a SchemeConfig,
    model: ChannelModel,
    noise: NoiseConfig,
    keys: [[u8; 32]; 3],
}

struct BlockDraw {
    bits: Vec<u8>,
    channel: ChannelRealization,
    y: CMatrix,
}

impl PointContext<'_> {
    fn draw(&self, block: u64) -> Result<BlockDraw> {
        let mut bit_rng = keyed_rng(self.keys[TAG_BITS as usize], block);
        let bits: Vec<u8> = (0..self.config.block_bits()).map(|_| bit_rng.random::<bool>() as u8).collect();
        let channel = self.model.draw(&mut keyed_rng(self.keys[TAG_CHANNEL as usize], block));
        let frame = transmit(self.config, &bits)?;
        let clean = &channel.h_true * &frame.matrix;
        let y = add_awgn(&clean, &self.noise, &mut keyed_rng(self.keys[TAG_NOISE as usize], block))?;
        Ok(BlockDraw { bits, channel, y })
    }

    fn run_block(&self, detector: Detector, block: u64, digest: bool) -> Result<BlockOutcome> {
        let d = self.draw(block)?;
        let result = match detector {
            Detector::Ml => detect_ml(self.config, &d.y, &d.channel.h_est)?,
            Detector::Lc => detect_lc(self.config, &d.y, &d.channel.h_est)?,
        };
        let errors = d.bits.iter().zip(&result.decoded_bits).filter(|(a, b)| a != b).count() as u64;
        Ok(BlockOutcome {
            errors,
            digest: digest.then(|| block_digest(&d)),
        })
    }
}

fn hash_matrix(h: &mut Sha256, m: &CMatrix) {
    for v in m.iter() {
        h.update(v.re.to_le_bytes());
        h.update(v.im.to_le_bytes());
    }
}

fn block_digest(d: &BlockDraw) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(&d.bits);
    hash_matrix(&mut h, &d.channel.h_true);
    hash_matrix(&mut h, &d.channel.h_est);
    hash_matrix(&mut h, &d.y);
    h.finalize().into()
}

struct BlockOutcome {
    errors: u64,
    digest: Option<[u8; 32]>,
}

struct LegTally {
    errors: u64,
    block_errors: u64,
    blocks: u64,
    hasher: Sha256,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(invalid("workers must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))
}

/// Runs the given detectors on the same blocks until every leg has reached
/// the error target or the block budget is spent.
fn run_legs(
    spec: &ExperimentSpec,
    legs: &[Detector],
    snr_db: f64,
    root: StreamRoot,
    digest: bool,
    pool: &rayon::ThreadPool,
) -> Result<(Vec<BerPoint>, Vec<String>)> {
    let ctx = PointContext {
        config: &spec.scheme,
        model: ChannelModel::new(spec.channel)?,
        noise: NoiseConfig {
            es_over_n0_db: snr_db,
            symbol_energy: spec.scheme.codebook().energy(),
        },
        keys: [TAG_BITS, TAG_CHANNEL, TAG_NOISE].map(|t| root.key(t)),
    };
    let mut tallies: Vec<LegTally> = legs
        .iter()
        .map(|_| LegTally {
            errors: 0,
            block_errors: 0,
            blocks: 0,
            hasher: Sha256::new(),
        })
        .collect();
    let mut next = 0u64;
    while next < spec.max_blocks && tallies.iter().any(|t| t.errors < spec.target_errors) {
        let end = (next + CHUNK_BLOCKS).min(spec.max_blocks);
        for (leg, tally) in legs.iter().zip(tallies.iter_mut()) {
            let outcomes: Vec<BlockOutcome> = pool.install(|| {
                (next..end)
                    .into_par_iter()
                    .map(|b| ctx.run_block(*leg, b, digest))
                    .collect::<Result<_>>()
            })?;
            for o in outcomes {
                tally.errors += o.errors;
                tally.block_errors += (o.errors > 0) as u64;
                if let Some(d) = o.digest {
                    tally.hasher.update(d);
                }
            }
            tally.blocks = end;
        }
        next = end;
    }
    let bits_per_block = spec.scheme.block_bits() as u64;
    let points = tallies
        .iter()
        .map(|t| BerPoint::from_counts(snr_db, t.errors, t.blocks * bits_per_block, t.blocks, t.block_errors))
        .collect();
    let digests = if digest {
        tallies.into_iter().map(|t| hex::encode(t.hasher.finalize())).collect()
    } else {
        Vec::new()
    };
    Ok((points, digests))
}

/// Simulates one SNR point. `snr_db = +inf` runs noiseless.
pub fn run_point(
    spec: &ExperimentSpec,
    detector: Detector,
    snr_db: f64,
    root: StreamRoot,
    opts: &RunOptions,
) -> Result<BerPoint> {
    spec.validate()?;
    if snr_db.is_nan() {
        return Err(invalid("SNR must not be NaN"));
    }
    let pool = build_pool(opts.workers)?;
    let (mut points, _) = run_legs(spec, &[detector], snr_db, root, false, &pool)?;
    Ok(points.remove(0))
}

/// Analytic ABEP over the grid, or `None` when the configuration is outside
/// the closed-form model (correlated or imperfect CSI) or the model refuses it.
pub fn analytic_overlay(spec: &ExperimentSpec) -> Option<Vec<AnalyticPoint>> {
    if spec.channel.corr_r != 0.0 || spec.channel.csi_error_var != 0.0 {
        return None;
    }
    let model = AnalyticModel::new(&spec.scheme, DEFAULT_PAIR_CAP).ok()?;
    spec.snr_grid_db
        .iter()
        .map(|&snr| {
            model.abep(snr).ok().map(|b| AnalyticPoint {
                snr_db: snr,
                pb: b.pb_total,
                p1: b.p1_detection,
                p2: b.p2_despreading,
            })
        })
        .collect()
}

fn sweep(spec: &ExperimentSpec, legs: &[Detector], opts: &RunOptions, digest: bool) -> Result<Vec<BerCurve>> {
    spec.validate()?;
    let pool = build_pool(opts.workers)?;
    let spec_digest = spec.digest();
    let analytic = analytic_overlay(spec);
    let mut curves: Vec<BerCurve> = legs
        .iter()
        .map(|&detector| BerCurve {
            detector,
            spec_digest: spec_digest.clone(),
            points: Vec::with_capacity(spec.snr_grid_db.len()),
            analytic_points: analytic.clone(),
            stream_digests: Vec::new(),
        })
        .collect();
    for (i, &snr) in spec.snr_grid_db.iter().enumerate() {
        let root = StreamRoot {
            master_seed: spec.master_seed,
            snr_index: i as u64,
        };
        let (points, digests) = run_legs(spec, legs, snr, root, digest, &pool)?;
        for (k, (curve, point)) in curves.iter_mut().zip(points).enumerate() {
            curve.points.push(point);
            if digest {
                curve.stream_digests.push(digests[k].clone());
            }
        }
    }
    Ok(curves)
}

/// One curve per detector in `spec.detector`, with an analytic overlay when available.
pub fn run_sweep(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Vec<BerCurve>> {
    sweep(spec, spec.detector.detectors(), opts, opts.stream_digest)
}

/// ML and LC on identical per-block bits, channels and noise. Each leg
/// regenerates its realizations from the derived streams and records their
/// digests, so [`DetectorComparison::streams_match`] checks the pairing.
pub fn compare_detectors(spec: &ExperimentSpec, opts: &RunOptions) -> Result<DetectorComparison> {
    if spec.detector != DetectorMode::Both {
        return Err(invalid_field("detector", "detector comparison needs `both`"));
    }
    let mut curves = sweep(spec, &[Detector::Ml, Detector::Lc], opts, true)?;
    let lc = curves.pop().expect("two legs");
    let ml = curves.pop().expect("two legs");
    Ok(DetectorComparison { ml, lc })
}

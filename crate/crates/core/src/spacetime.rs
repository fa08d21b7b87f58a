//! STBC-SM spatial codebook: antenna-pair tables, rotation angles and the
//! coding-gain-distance (CGD) rotation search.
//!
//! Codewords are stored antennas x intervals (`Nt x 2`). The Alamouti block
//! `[[x1, -x2*], [x2, x1*]]` sits on the two rows of the selected antenna pair;
//! the first antenna of the pair carries `x1` in the first interval.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::codebook::floor_pow2;
use crate::error::{invalid, Error, Result};
use crate::linalg::gram2_eigenvalues;
use crate::{CMatrix, Cx};

/// Antenna pairs per transmit-antenna count, mapped to codewords left to right.
const ANTENNA_PAIRS: [&[(usize, usize)]; 6] = [
    &[(1, 2), (2, 3)],
    &[(1, 2), (3, 4), (2, 3), (4, 1)],
    &[(1, 2), (3, 4), (2, 3), (4, 5), (1, 3), (2, 4), (3, 5), (4, 1)],
    &[(1, 2), (3, 4), (5, 6), (2, 3), (4, 5), (6, 1), (1, 3), (2, 4)],
    &[
        (1, 2), (3, 4), (5, 6), (2, 3), (4, 5), (6, 7), (1, 3), (2, 4),
        (5, 7), (1, 4), (2, 5), (3, 6), (1, 5), (2, 6), (3, 7), (1, 6),
    ],
    &[
        (1, 2), (3, 4), (5, 6), (7, 8), (2, 3), (4, 5), (6, 7), (8, 1),
        (1, 3), (2, 4), (5, 7), (6, 8), (1, 5), (2, 6), (3, 7), (4, 8),
    ],
];

/// Tabulated single free rotation angle for `Nt <= 4`, indexed by `log2 M - 1`.
const SMALL_ARRAY_ANGLES: [f64; 4] = [1.57, 0.61, 0.30, 0.15];

fn log2_modulation(m: usize) -> Result<u32> {
    match m {
        2 | 4 | 8 | 16 => Ok(m.trailing_zeros()),
        _ => Err(invalid(format!("modulation order {m} not in {{2, 4, 8, 16}}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StbcSmCodebook {
    num_tx: usize,
    modulation_order: usize,
    per_codebook: usize,
    pairs: Vec<(usize, usize)>,
    angles: Vec<f64>,
}

impl StbcSmCodebook {
    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    pub fn modulation_order(&self) -> usize {
        self.modulation_order
    }

    /// Total codewords `Nz`.
    pub fn codeword_count(&self) -> usize {
        self.pairs.len()
    }

    /// Codewords per codebook `Nv`.
    pub fn per_codebook(&self) -> usize {
        self.per_codebook
    }

    /// Number of codebooks `Nb`.
    pub fn codebook_count(&self) -> usize {
        self.angles.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Rotation angle per codebook, radians; the first is always 0.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Antenna pair of codeword `nz` (1-based).
    pub fn pair(&self, nz: usize) -> Result<(usize, usize)> {
        self.check_index(nz)?;
        Ok(self.pairs[nz - 1])
    }

    /// Codebook `q = ceil(nz / Nv)` holding codeword `nz`.
    pub fn codebook_of(&self, nz: usize) -> usize {
        nz.div_ceil(self.per_codebook)
    }

    /// Rotation factor `exp(j phi_q)` applied to codeword `nz`.
    pub fn rotation(&self, nz: usize) -> Cx {
        Cx::from_polar(1.0, self.angles[self.codebook_of(nz) - 1])
    }

    /// Replaces the rotation angles; the vector must have `Nb` entries.
    pub fn with_angles(mut self, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != self.codebook_count() {
            return Err(invalid(format!(
                "expected {} rotation angles, got {}",
                self.codebook_count(),
                angles.len()
            )));
        }
        self.angles = angles;
        Ok(self)
    }

    fn check_index(&self, nz: usize) -> Result<()> {
        if nz == 0 || nz > self.pairs.len() {
            return Err(Error::IndexOutOfRange {
                index: nz,
                max: self.pairs.len(),
            });
        }
        Ok(())
    }
}

/// Builds the STBC-SM codebook for `Nt` in `3..=8` and `M` in `{2, 4, 8, 16}`.
pub fn build_stbc_sm_codebook(num_tx: usize, modulation_order: usize) -> Result<StbcSmCodebook> {
    if !(3..=8).contains(&num_tx) {
        return Err(invalid(format!("Nt = {num_tx} outside the tabulated range 3..=8")));
    }
    let log2m = log2_modulation(modulation_order)?;
    let pairs = ANTENNA_PAIRS[num_tx - 3].to_vec();
    let total = (num_tx * (num_tx - 1) / 2) as u64;
    let nz = floor_pow2(total) as usize;
    debug_assert_eq!(nz, pairs.len());
    let nv = num_tx / 2;
    let nb = nz.div_ceil(nv);
    let angles = if num_tx <= 4 {
        vec![0.0, SMALL_ARRAY_ANGLES[log2m as usize - 1]]
    } else {
        let divisor = f64::from(1u32 << (log2m - 1));
        (0..nb).map(|k| k as f64 * PI / (divisor * nb as f64)).collect()
    };
    Ok(StbcSmCodebook {
        num_tx,
        modulation_order,
        per_codebook: nv,
        pairs,
        angles,
    })
}

/// An `Nt x 2` STBC-SM codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeCodeword {
    pub matrix: CMatrix,
    pub pair_index: usize,
    pub rotation: Cx,
}

impl SpaceTimeCodeword {
    /// The `2 x 2` block on the active pair rows.
    pub fn block(&self, codebook: &StbcSmCodebook) -> CMatrix {
        let (a, b) = codebook.pairs[self.pair_index - 1];
        let mut out = CMatrix::zeros(2, 2);
        out.row_mut(0).copy_from(&self.matrix.row(a - 1));
        out.row_mut(1).copy_from(&self.matrix.row(b - 1));
        out
    }
}

/// Places the rotated Alamouti block for `(x1, x2)` on the rows of pair `nz`.
pub fn make_codeword(codebook: &StbcSmCodebook, nz: usize, x1: Cx, x2: Cx) -> Result<SpaceTimeCodeword> {
    let (a, b) = codebook.pair(nz)?;
    let rotation = codebook.rotation(nz);
    let mut matrix = CMatrix::zeros(codebook.num_tx, 2);
    matrix[(a - 1, 0)] = rotation * x1;
    matrix[(a - 1, 1)] = -rotation * x2.conj();
    matrix[(b - 1, 0)] = rotation * x2;
    matrix[(b - 1, 1)] = rotation * x1.conj();
    Ok(SpaceTimeCodeword {
        matrix,
        pair_index: nz,
        rotation,
    })
}

/// Coding gain distance: product of the two nonzero eigenvalues of the
/// difference Gram, or 0 when the difference has rank below two.
pub fn cgd(xa: &CMatrix, xb: &CMatrix) -> Result<f64> {
    if xa.shape() != xb.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", xa.shape()),
            got: format!("{:?}", xb.shape()),
        });
    }
    if xa.ncols() != 2 {
        return Err(Error::ShapeMismatch {
            expected: "Nt x 2".into(),
            got: format!("{:?}", xa.shape()),
        });
    }
    Ok(cgd_unchecked(&(xa - xb)))
}

const RANK_EPS: f64 = 1e-12;

fn cgd_unchecked(diff: &CMatrix) -> f64 {
    let [l1, l2] = gram2_eigenvalues(diff);
    if l2 > RANK_EPS {
        l1 * l2
    } else {
        0.0
    }
}

fn psk_points(m: usize) -> Vec<Cx> {
    (0..m)
        .map(|k| Cx::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
        .collect()
}

/// Minimum CGD between codewords of different codebooks for the given angles.
fn min_cross_codebook_cgd(codebook: &StbcSmCodebook) -> f64 {
    let symbols = psk_points(codebook.modulation_order);
    let words: Vec<(usize, CMatrix)> = (1..=codebook.codeword_count())
        .flat_map(|nz| {
            let symbols = &symbols;
            symbols.iter().flat_map(move |&x1| {
                symbols.iter().map(move |&x2| {
                    let cw = make_codeword(codebook, nz, x1, x2).expect("index in range");
                    (codebook.codebook_of(nz), cw.matrix)
                })
            })
        })
        .collect();
    let mut worst = f64::INFINITY;
    for (i, (qa, xa)) in words.iter().enumerate() {
        for (qb, xb) in &words[i + 1..] {
            if qa != qb {
                worst = worst.min(cgd_unchecked(&(xa - xb)));
            }
        }
    }
    worst
}

/// `(angle, min-CGD)` over the candidate angles for the second codebook (`Nt <= 4`).
pub fn rotation_profile(num_tx: usize, modulation_order: usize, candidates: &[f64]) -> Result<Vec<(f64, f64)>> {
    if num_tx > 4 {
        return Err(invalid(format!(
            "rotation search covers Nt <= 4 only (Nt = {num_tx}); larger arrays use the closed-form angles"
        )));
    }
    let base = build_stbc_sm_codebook(num_tx, modulation_order)?;
    candidates
        .iter()
        .map(|&phi| {
            let cb = base.clone().with_angles(vec![0.0, phi])?;
            Ok((phi, min_cross_codebook_cgd(&cb)))
        })
        .collect()
}

fn min_cgd_at(base: &StbcSmCodebook, phi: f64) -> f64 {
    let cb = base.clone().with_angles(vec![0.0, phi]).expect("two codebooks");
    min_cross_codebook_cgd(&cb)
}

/// Golden-section maximization of the min-CGD on `[lo, hi]`.
fn refine_peak(base: &StbcSmCodebook, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (min_cgd_at(base, a), min_cgd_at(base, b));
    while hi - lo > 1e-9 {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = min_cgd_at(base, a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = min_cgd_at(base, b);
        }
    }
    let phi = 0.5 * (lo + hi);
    (phi, min_cgd_at(base, phi))
}

/// Local maxima whose grid value is within this fraction of the grid maximum
/// are refined between their grid neighbours.
const PEAK_WINDOW: f64 = 0.02;
const TIE_RTOL: f64 = 1e-9;

/// Best angle among `candidates`.
///
/// Runs of equal profile values are treated as one plateau represented by
/// its midpoint. An isolated local maximum is refined by golden-section
/// search between its neighbouring candidates, so peaks that the grid
/// straddles are compared at their true height. Among maxima tied within a
/// relative `1e-9`, the smallest angle wins.
pub fn optimize_rotation_over(num_tx: usize, modulation_order: usize, candidates: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(invalid("empty rotation grid"));
    }
    let mut sorted = candidates.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(invalid("rotation candidates must be finite"));
    }
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let profile = rotation_profile(num_tx, modulation_order, &sorted)?;
    let base = build_stbc_sm_codebook(num_tx, modulation_order)?;
    let grid_max = profile.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());

    let mut peaks: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < profile.len() {
        let mut j = i;
        while j + 1 < profile.len() && same(profile[j + 1].1, profile[i].1) {
            j += 1;
        }
        let value = profile[i].1;
        let left_lower = i == 0 || profile[i - 1].1 < value;
        let right_lower = j + 1 == profile.len() || profile[j + 1].1 < value;
        if left_lower && right_lower && value >= grid_max * (1.0 - PEAK_WINDOW) {
            if i == j && i > 0 && j + 1 < profile.len() {
                peaks.push(refine_peak(&base, profile[i - 1].0, profile[i + 1].0));
            } else {
                peaks.push((0.5 * (profile[i].0 + profile[j].0), value));
            }
        }
        i = j + 1;
    }
    let best = peaks.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let winner = peaks
        .iter()
        .filter(|p| p.1 >= best * (1.0 - TIE_RTOL))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one peak");
    Ok(winner.0)
}

/// Uniform angle grid `0, step, 2 step, ... < pi`.
pub fn rotation_grid(grid_step: f64) -> Result<Vec<f64>> {
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(invalid(format!("grid step must be in (0, 0.01], got {grid_step}")));
    }
    let n = (PI / grid_step).ceil() as usize;
    Ok((0..n).map(|k| k as f64 * grid_step).filter(|&a| a < PI).collect())
}

/// Grid search of the free rotation angle in `[0, pi)` maximizing the minimum CGD.
pub fn optimize_rotation(num_tx: usize, modulation_order: usize, grid_step: f64) -> Result<f64> {
    optimize_rotation_over(num_tx, modulation_order, &rotation_grid(grid_step)?)
}

/// Renders a rotation profile as `angle,min_cgd` CSV.
pub fn profile_csv(profile: &[(f64, f64)]) -> String {
    let mut out = String::from("angle,min_cgd\n");
    for (angle, value) in profile {
        let _ = writeln!(out, "{angle:.16e},{value:.16e}");
    }
    out
}

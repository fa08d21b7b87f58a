//! Spreading-sequence codebooks and sequence-pair enumeration.
//!
//! A codebook is an `L x Nc` complex matrix whose columns are the spreading
//! sequences. All columns carry the same energy `Es`; generated families are
//! normalized to `Es = 1` unless rescaled with [`SpreadingCodebook::with_energy`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{CMatrix, Cx};

/// Relative tolerance on column energies for generated codebooks.
const GEN_ENERGY_RTOL: f64 = 1e-9;
/// Relative energy spread accepted when loading external codebooks.
const LOAD_ENERGY_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookFamily {
    ZadoffChu,
    CyclicChirp,
    File,
}

impl CodebookFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            CodebookFamily::ZadoffChu => "zadoff_chu",
            CodebookFamily::CyclicChirp => "cyclic_chirp",
            CodebookFamily::File => "file",
        }
    }
}

impl FromStr for CodebookFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zadoff_chu" => Ok(CodebookFamily::ZadoffChu),
            "cyclic_chirp" => Ok(CodebookFamily::CyclicChirp),
            "file" => Ok(CodebookFamily::File),
            other => Err(Error::MalformedCodebook(format!("unknown family `{other}`"))),
        }
    }
}

/// An immutable set of `Nc` spreading sequences of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingCodebook {
    sequences: CMatrix,
    family: CodebookFamily,
    energy: f64,
    max_xcorr: f64,
}

impl SpreadingCodebook {
    /// Wraps a sequence matrix, validating uniform column energy within `rtol`.
    fn validated(sequences: CMatrix, family: CodebookFamily, rtol: f64) -> Result<Self> {
        let (len, count) = sequences.shape();
        if len == 0 || count == 0 {
            return Err(invalid("codebook must have at least one chip and one sequence"));
        }
        if family != CodebookFamily::CyclicChirp && count > len {
            return Err(invalid(format!("Nc = {count} exceeds L = {len}")));
        }
        let energies: Vec<f64> = sequences.column_iter().map(|c| c.norm_squared()).collect();
        let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(min > 0.0) || (max - min) > rtol * max {
            return Err(Error::NonUniformEnergy { min, max });
        }
        let energy = energies.iter().sum::<f64>() / count as f64;
        let max_xcorr = gram_max_off_diagonal(&sequences, energy);
        Ok(SpreadingCodebook {
            sequences,
            family,
            energy,
            max_xcorr,
        })
    }

    /// Builds a codebook from an externally supplied `L x Nc` matrix.
    pub fn from_matrix(sequences: CMatrix, family: CodebookFamily) -> Result<Self> {
        Self::validated(sequences, family, LOAD_ENERGY_RTOL)
    }

    /// Returns a copy whose columns all have energy `es`.
    pub fn with_energy(&self, es: f64) -> Result<Self> {
        if !(es > 0.0) || !es.is_finite() {
            return Err(invalid(format!("sequence energy must be positive, got {es}")));
        }
        let mut sequences = self.sequences.clone();
        for mut col in sequences.column_iter_mut() {
            let scale = (es / col.norm_squared()).sqrt();
            col *= Cx::new(scale, 0.0);
        }
        Self::validated(sequences, self.family, GEN_ENERGY_RTOL)
    }

    /// Chips per sequence (`L`).
    pub fn len(&self) -> usize {
        self.sequences.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Number of sequences (`Nc`).
    pub fn count(&self) -> usize {
        self.sequences.ncols()
    }

    /// Per-sequence energy `Es = z^H z`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn family(&self) -> CodebookFamily {
        self.family
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.sequences
    }

    /// Sequence `n` (1-based), as a column slice view.
    pub fn sequence(&self, n: usize) -> nalgebra::DVectorView<'_, Cx> {
        self.sequences.column(n - 1)
    }

    /// Largest off-diagonal `|z_i^H z_j| / Es`, recorded at construction (0 for `Nc = 1`).
    pub fn recorded_max_xcorr(&self) -> f64 {
        self.max_xcorr
    }

    /// Serializes to the interchange text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "L = {}", self.len());
        let _ = writeln!(out, "Nc = {}", self.count());
        let _ = writeln!(out, "family = {}", self.family.as_str());
        for row in self.sequences.row_iter() {
            let cells: Vec<String> = row.iter().map(|&c| format_complex(c)).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    /// Parses the interchange text format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::MalformedCodebook(format!("missing header `{key}`")))?;
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedCodebook(format!("expected `{key} = ...`, got `{line}`")))?;
            if k.trim() != key {
                return Err(Error::MalformedCodebook(format!("expected header `{key}`, got `{}`", k.trim())));
            }
            Ok(v.trim().to_string())
        };
        let len: usize = header("L")?
            .parse()
            .map_err(|_| Error::MalformedCodebook("L is not an integer".into()))?;
        let count: usize = header("Nc")?
            .parse()
            .map_err(|_| Error::MalformedCodebook("Nc is not an integer".into()))?;
        let family: CodebookFamily = header("family")?.parse()?;
        let mut values = Vec::with_capacity(len * count);
        let mut rows = 0;
        for line in lines {
            let cells: Vec<&str> = line.split_whitespace().collect();
            if cells.len() != count {
                return Err(Error::MalformedCodebook(format!(
                    "row {} has {} values, expected {count}",
                    rows + 1,
                    cells.len()
                )));
            }
            for cell in cells {
                values.push(parse_complex(cell)?);
            }
            rows += 1;
        }
        if rows != len {
            return Err(Error::MalformedCodebook(format!("found {rows} rows, expected {len}")));
        }
        let sequences = CMatrix::from_row_slice(len, count, &values);
        Self::validated(sequences, family, LOAD_ENERGY_RTOL)
    }
}

/// Writes a codebook in the interchange format.
pub fn save_codebook(codebook: &SpreadingCodebook, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, codebook.to_text())?;
    Ok(())
}

/// Reads and validates a codebook from the interchange format.
pub fn load_codebook(path: impl AsRef<Path>) -> Result<SpreadingCodebook> {
    let text = std::fs::read_to_string(path)?;
    SpreadingCodebook::from_text(&text)
}

fn format_complex(c: Cx) -> String {
    let sign = if c.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{}{:.16e}i", c.re, sign, c.im.abs())
}

fn parse_complex(cell: &str) -> Result<Cx> {
    let bad = || Error::MalformedCodebook(format!("cannot parse complex value `{cell}`"));
    let body = cell.strip_suffix('i').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    // the real/imag separator is the last sign that does not follow an exponent marker
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im_abs: f64 = body[split + 1..].parse().map_err(|_| bad())?;
    let im = if bytes[split] == b'-' { -im_abs } else { im_abs };
    Ok(Cx::new(re, im))
}

fn gram_max_off_diagonal(sequences: &CMatrix, energy: f64) -> f64 {
    let count = sequences.ncols();
    let mut worst: f64 = 0.0;
    for i in 0..count {
        for j in (i + 1)..count {
            let ip = sequences.column(i).dotc(&sequences.column(j));
            worst = worst.max(ip.norm() / energy);
        }
    }
    worst
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Raw Zadoff-Chu sequence `exp(-j pi u n (n+1) / L)` with unit chip magnitude.
pub fn zadoff_chu_sequence(length: usize, root: u64) -> Vec<Cx> {
    let l = length as f64;
    (0..length as u64)
        .map(|n| {
            // reduce the phase numerator modulo 2L to keep the argument small
            let num = (root as u128 * n as u128 * (n as u128 + 1)) % (2 * length as u128);
            Cx::from_polar(1.0, -PI * num as f64 / l)
        })
        .collect()
}

/// Generates a Zadoff-Chu codebook with one column per root, normalized to `Es = 1`.
pub fn gen_zadoff_chu(length: usize, roots: &[u64]) -> Result<SpreadingCodebook> {
    if length == 0 || length % 2 == 0 {
        return Err(invalid(format!("Zadoff-Chu length must be odd, got {length}")));
    }
    if roots.is_empty() {
        return Err(invalid("at least one root is required"));
    }
    for (i, &u) in roots.iter().enumerate() {
        if u == 0 || u >= length as u64 || gcd(u, length as u64) != 1 {
            return Err(invalid(format!("root {u} is not coprime with L = {length}")));
        }
        if roots[..i].contains(&u) {
            return Err(invalid(format!("duplicate root {u}")));
        }
    }
    let norm = 1.0 / (length as f64).sqrt();
    let mut m = CMatrix::zeros(length, roots.len());
    for (col, &u) in roots.iter().enumerate() {
        for (row, chip) in zadoff_chu_sequence(length, u).into_iter().enumerate() {
            m[(row, col)] = chip * norm;
        }
    }
    SpreadingCodebook::validated(m, CodebookFamily::ZadoffChu, GEN_ENERGY_RTOL)
}

/// Base chirp with ideal periodic autocorrelation for any length.
fn base_chirp(length: usize) -> Vec<Cx> {
    let l = length as u128;
    (0..l)
        .map(|n| {
            let num = if length % 2 == 0 { n * n } else { n * (n + 1) } % (2 * l);
            Cx::from_polar(1.0, -PI * num as f64 / length as f64)
        })
        .collect()
}

/// Chip offsets used by [`gen_cyclic_chirp`]: `round(P (2^SF - 1) k / Nc)`.
pub fn chirp_shifts(spreading_factor: u32, oversampling: usize, count: usize) -> Vec<usize> {
    let length = oversampling * ((1usize << spreading_factor) - 1);
    (0..count)
        .map(|k| ((length * k) as f64 / count as f64).round() as usize % length.max(1))
        .collect()
}

/// Generates `Nc` cyclic shifts of a length `P (2^SF - 1)` base chirp.
///
/// Shifts are spread evenly over the `2^SF` grid, so distinct shifts give
/// exactly orthogonal columns. When `Nc` exceeds the number of distinct chip
/// offsets some columns coincide; the codebook is still returned and the
/// collision shows up in its recorded cross-correlation.
pub fn gen_cyclic_chirp(
    spreading_factor: u32,
    oversampling: usize,
    count: usize,
) -> Result<SpreadingCodebook> {
    if spreading_factor == 0 || spreading_factor > 20 {
        return Err(invalid(format!("spreading factor {spreading_factor} out of range 1..=20")));
    }
    if oversampling == 0 {
        return Err(invalid("oversampling P must be at least 1"));
    }
    if count == 0 || count > 1usize << spreading_factor {
        return Err(invalid(format!(
            "Nc = {count} must be in 1..={}",
            1usize << spreading_factor
        )));
    }
    let length = oversampling * ((1usize << spreading_factor) - 1);
    let base = base_chirp(length);
    let norm = 1.0 / (length as f64).sqrt();
    let shifts = chirp_shifts(spreading_factor, oversampling, count);
    let mut m = CMatrix::zeros(length, count);
    for (col, &shift) in shifts.iter().enumerate() {
        for row in 0..length {
            m[(row, col)] = base[(row + shift) % length] * norm;
        }
    }
    SpreadingCodebook::validated(m, CodebookFamily::CyclicChirp, GEN_ENERGY_RTOL)
}

/// Largest normalized cross-correlation `max_{i != j} |z_i^H z_j| / Es`.
pub fn max_cross_correlation(codebook: &SpreadingCodebook) -> Result<f64> {
    if codebook.count() < 2 {
        return Err(invalid("cross-correlation needs at least two sequences"));
    }
    Ok(gram_max_off_diagonal(codebook.matrix(), codebook.energy()))
}

/// Canonical set of `Ns = 2^floor(log2 C(Nc, 2))` sequence pairs (1-based, ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequencePairSet {
    pairs: Vec<(usize, usize)>,
}

impl SequencePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Pair with 1-based position `ns`.
    pub fn pair(&self, ns: usize) -> Option<(usize, usize)> {
        ns.checked_sub(1).and_then(|i| self.pairs.get(i)).copied()
    }

    /// 1-based position of a pair; the pair is canonicalized to ascending order first.
    pub fn position(&self, pair: (usize, usize)) -> Option<usize> {
        let key = (pair.0.min(pair.1), pair.0.max(pair.1));
        self.pairs.iter().position(|&p| p == key).map(|i| i + 1)
    }
}

/// `2^floor(log2 n)` for `n >= 1`.
pub(crate) fn floor_pow2(n: u64) -> u64 {
    1u64 << (63 - n.leading_zeros())
}

pub fn enumerate_sequence_pairs(count: usize) -> Result<SequencePairSet> {
    if count < 2 {
        return Err(invalid(format!("sequence pairs need Nc >= 2, got {count}")));
    }
    let total = (count as u64) * (count as u64 - 1) / 2;
    let keep = floor_pow2(total) as usize;
    let pairs = (1..=count)
        .flat_map(|a| ((a + 1)..=count).map(move |b| (a, b)))
        .take(keep)
        .collect();
    Ok(SequencePairSet { pairs })
}

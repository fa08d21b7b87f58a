use nalgebra::DVector;

use super::tx::ActiveRows;
use super::{gray_decode, BlockIndices, DetectionResult, Scheme, SchemeConfig};
use crate::error::{invalid, Error, Result};
use crate::{CMatrix, Cx};

fn check_shape(what: &str, m: &CMatrix, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::ShapeMismatch {
            expected: format!("{what}: {rows}x{cols}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

fn check_channel(config: &SchemeConfig, h: &CMatrix) -> Result<()> {
    check_shape("H", h, config.num_rx(), config.num_tx())
}

/// Exhaustive ML detection over every transmit matrix.
///
/// Hypotheses are visited in lexicographic order of (code index, spatial
/// index, symbol labels) and only a strictly smaller metric replaces the
/// incumbent, so ties resolve to the first hypothesis visited.
pub fn detect_ml(config: &SchemeConfig, y: &CMatrix, h: &CMatrix) -> Result<DetectionResult> {
    check_channel(config, h)?;
    check_shape("Y", y, config.num_rx(), config.span())?;
    let nr = config.num_rx();
    let span = config.span();
    let scale = config.power_scale();
    let m = config.modulation_order();
    let nsym = config.scheme().symbols_per_block();
    let label_count = m.pow(nsym as u32);

    let mut rows = ActiveRows::with_span(span);
    let mut idx = BlockIndices {
        code: 1,
        spatial: 1,
        symbols: vec![0; nsym],
    };
    let mut best = f64::INFINITY;
    let mut best_idx = idx.clone();
    let mut evaluations = 0usize;

    for code in 1..=config.code_count() {
        for spatial in 1..=config.spatial_count() {
            for label in 0..label_count {
                let mut rest = label;
                for slot in (0..nsym).rev() {
                    idx.symbols[slot] = gray_decode(rest % m);
                    rest /= m;
                }
                idx.code = code;
                idx.spatial = spatial;
                rows.fill(config, &idx);
                evaluations += 1;

                let mut metric = 0.0;
                for r in 0..nr {
                    let ha = h[(r, rows.a)] * scale;
                    let hb = rows.b.map(|b| h[(r, b)] * scale);
                    for t in 0..span {
                        let mut pred = ha * rows.row_a[t];
                        if let Some(hb) = hb {
                            pred += hb * rows.row_b[t];
                        }
                        metric += (y[(r, t)] - pred).norm_sqr();
                    }
                    if metric >= best {
                        break;
                    }
                }
                if metric < best {
                    best = metric;
                    best_idx.clone_from(&idx);
                }
            }
        }
    }
    Ok(DetectionResult::from_indices(config, &best_idx, evaluations))
}

/// Correlates every column of `y` (an `Nr x L` slice) with every sequence:
/// column `i` of the result is `Y z_i^*`.
fn despread(config: &SchemeConfig, y: &CMatrix, offset: usize) -> CMatrix {
    let cb = config.codebook();
    let len = cb.len();
    let nr = config.num_rx();
    let mut d = CMatrix::zeros(nr, cb.count());
    for i in 0..cb.count() {
        let z = cb.sequence(i + 1);
        for r in 0..nr {
            let mut acc = Cx::default();
            for t in 0..len {
                acc += y[(r, offset + t)] * z[t].conj();
            }
            d[(r, i)] = acc;
        }
    }
    d
}

fn column_energy(d: &CMatrix) -> Vec<f64> {
    d.column_iter().map(|c| c.norm_squared()).collect()
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Equivalent `2Nr` channel vectors `(h1, h2)` of codeword `nz` for the
/// stacked observation `[d1(r), conj(d2(r))]` over receive antennas `r`.
pub fn equivalent_channel(config: &SchemeConfig, h: &CMatrix, nz: usize) -> Result<(DVector<Cx>, DVector<Cx>)> {
    check_channel(config, h)?;
    let st = config
        .spatial()
        .ok_or_else(|| invalid("equivalent channel needs an STBC scheme"))?;
    let (a, b) = st.pair(nz)?;
    let theta = st.rotation(nz);
    let nr = config.num_rx();
    let mut h1 = DVector::zeros(2 * nr);
    let mut h2 = DVector::zeros(2 * nr);
    for r in 0..nr {
        let (ha, hb) = (h[(r, a - 1)], h[(r, b - 1)]);
        h1[2 * r] = theta * ha;
        h1[2 * r + 1] = theta.conj() * hb.conj();
        h2[2 * r] = theta * hb;
        h2[2 * r + 1] = -theta.conj() * ha.conj();
    }
    Ok((h1, h2))
}

fn stack(d1: &CMatrix, d2: &CMatrix, col: usize) -> DVector<Cx> {
    let nr = d1.nrows();
    DVector::from_fn(2 * nr, |i, _| {
        let r = i / 2;
        if i % 2 == 0 {
            d1[(r, col)]
        } else {
            d2[(r, col)].conj()
        }
    })
}

/// Best symbol for `||d - a g x||^2`; returns `(metric, constellation index)`.
fn best_symbol(d: &DVector<Cx>, g: &DVector<Cx>, a: f64, constellation: &[Cx]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (k, &x) in constellation.iter().enumerate() {
        let mut metric = 0.0;
        for i in 0..d.len() {
            metric += (d[i] - g[i] * (a * x)).norm_sqr();
        }
        if metric < best.0 {
            best = (metric, k);
        }
    }
    best
}

/// Two-stage SM-CIM detector: despread energy picks `nc`, then a joint
/// antenna/symbol search on the selected branch.
pub fn detect_lc_sm_cim(config: &SchemeConfig, y: &CMatrix, h: &CMatrix) -> Result<DetectionResult> {
    if config.scheme() != Scheme::SmCim {
        return Err(invalid("detect_lc_sm_cim needs an SM-CIM configuration"));
    }
    check_channel(config, h)?;
    check_shape("Y", y, config.num_rx(), config.span())?;
    let es = config.codebook().energy();
    let d = despread(config, y, 0);
    let energy = column_energy(&d);
    let nc = argmax_first(&energy);
    let mut evaluations = energy.len();

    let nr = config.num_rx();
    let mut best = (f64::INFINITY, 0, 0);
    for nt in 0..config.num_tx() {
        for (k, &x) in config.constellation().iter().enumerate() {
            evaluations += 1;
            let mut metric = 0.0;
            for r in 0..nr {
                metric += (d[(r, nc)] - h[(r, nt)] * (es * x)).norm_sqr();
            }
            if metric < best.0 {
                best = (metric, nt, k);
            }
        }
    }
    let idx = BlockIndices {
        code: nc + 1,
        spatial: best.1 + 1,
        symbols: vec![best.2],
    };
    Ok(DetectionResult::from_indices(config, &idx, evaluations))
}

/// Per-codeword Alamouti search on stacked observations, one per sequence slot.
/// Returns `(nz, symbols)` with symbols ordered slot by slot.
fn alamouti_search(
    config: &SchemeConfig,
    h: &CMatrix,
    stacked: &[DVector<Cx>],
    amplitude: f64,
    evaluations: &mut usize,
) -> Result<(usize, Vec<usize>)> {
    let constellation = config.constellation();
    let mut best = (f64::INFINITY, 0usize, Vec::new());
    for nz in 1..=config.spatial_count() {
        let (h1, h2) = equivalent_channel(config, h, nz)?;
        let mut total = 0.0;
        let mut symbols = Vec::with_capacity(2 * stacked.len());
        for d in stacked {
            let (m1, k1) = best_symbol(d, &h1, amplitude, constellation);
            let (m2, k2) = best_symbol(d, &h2, amplitude, constellation);
            *evaluations += 2 * constellation.len();
            total += m1 + m2;
            symbols.push(k1);
            symbols.push(k2);
        }
        if total < best.0 {
            best = (total, nz, symbols);
        }
    }
    Ok((best.1, best.2))
}

fn split_halves(config: &SchemeConfig, y: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    check_shape("Y", y, config.num_rx(), config.span())?;
    let len = config.codebook().len();
    Ok((
        y.columns(0, len).into_owned(),
        y.columns(len, len).into_owned(),
    ))
}

/// Two-stage STBC-SM-CIM detector on the two interval observations.
pub fn detect_lc_stbc_sm_cim(
    config: &SchemeConfig,
    y1: &CMatrix,
    y2: &CMatrix,
    h: &CMatrix,
) -> Result<DetectionResult> {
    if config.scheme() != Scheme::StbcSmCim {
        return Err(invalid("detect_lc_stbc_sm_cim needs an STBC-SM-CIM configuration"));
    }
    check_channel(config, h)?;
    let len = config.codebook().len();
    check_shape("Y1", y1, config.num_rx(), len)?;
    check_shape("Y2", y2, config.num_rx(), len)?;
    let d1 = despread(config, y1, 0);
    let d2 = despread(config, y2, 0);
    let energy: Vec<f64> = column_energy(&d1)
        .iter()
        .zip(column_energy(&d2))
        .map(|(a, b)| a + b)
        .collect();
    let nc = argmax_first(&energy);
    let mut evaluations = energy.len();
    let amplitude = config.power_scale() * config.codebook().energy();
    let stacked = [stack(&d1, &d2, nc)];
    let (nz, symbols) = alamouti_search(config, h, &stacked, amplitude, &mut evaluations)?;
    let idx = BlockIndices {
        code: nc + 1,
        spatial: nz,
        symbols,
    };
    Ok(DetectionResult::from_indices(config, &idx, evaluations))
}

/// Picks a valid sequence pair from despread energies: the two strongest
/// columns if they form a pair in the set, otherwise the strongest column
/// that completes a valid pair with the anchor. If the anchor has no valid
/// partner the next-ranked column becomes the anchor.
fn select_pair(config: &SchemeConfig, energy: &[f64]) -> (usize, (usize, usize)) {
    let pairs = config.sequence_pairs().expect("sequence pairs");
    let mut ranking: Vec<usize> = (0..energy.len()).collect();
    // stable: equal energies keep the smaller index first
    ranking.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]));
    for (pos, &anchor) in ranking.iter().enumerate() {
        for &partner in ranking.iter().skip(pos + 1).chain(ranking.iter().take(pos)) {
            let pair = (anchor.min(partner) + 1, anchor.max(partner) + 1);
            if let Some(ns) = pairs.position(pair) {
                return (ns, pair);
            }
        }
    }
    // the set always contains (1, 2)
    (1, pairs.pairs()[0])
}

/// Two-stage ESTBC-SM-CIM detector: the two strongest despread branches
/// give the sequence pair, then a joint Alamouti search over `nz`.
pub fn detect_lc_estbc_sm_cim(
    config: &SchemeConfig,
    y1: &CMatrix,
    y2: &CMatrix,
    h: &CMatrix,
) -> Result<DetectionResult> {
    if config.scheme() != Scheme::EstbcSmCim {
        return Err(invalid("detect_lc_estbc_sm_cim needs an ESTBC-SM-CIM configuration"));
    }
    check_channel(config, h)?;
    let len = config.codebook().len();
    check_shape("Y1", y1, config.num_rx(), len)?;
    check_shape("Y2", y2, config.num_rx(), len)?;
    let d1 = despread(config, y1, 0);
    let d2 = despread(config, y2, 0);
    let energy: Vec<f64> = column_energy(&d1)
        .iter()
        .zip(column_energy(&d2))
        .map(|(a, b)| a + b)
        .collect();
    let mut evaluations = energy.len();
    let (ns, (c1, c2)) = select_pair(config, &energy);
    let amplitude = config.power_scale() * config.codebook().energy();
    let stacked = [stack(&d1, &d2, c1 - 1), stack(&d1, &d2, c2 - 1)];
    let (nz, symbols) = alamouti_search(config, h, &stacked, amplitude, &mut evaluations)?;
    let idx = BlockIndices {
        code: ns,
        spatial: nz,
        symbols,
    };
    Ok(DetectionResult::from_indices(config, &idx, evaluations))
}

/// Low-complexity detector for any scheme; `y` holds the whole block.
pub fn detect_lc(config: &SchemeConfig, y: &CMatrix, h: &CMatrix) -> Result<DetectionResult> {
    match config.scheme() {
        Scheme::SmCim => detect_lc_sm_cim(config, y, h),
        Scheme::StbcSmCim => {
            let (y1, y2) = split_halves(config, y)?;
            detect_lc_stbc_sm_cim(config, &y1, &y2, h)
        }
        Scheme::EstbcSmCim => {
            let (y1, y2) = split_halves(config, y)?;
            detect_lc_estbc_sm_cim(config, &y1, &y2, h)
        }
    }
}

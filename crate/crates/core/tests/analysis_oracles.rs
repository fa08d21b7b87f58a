use std::sync::Arc;

use cim_core::analysis::{
    abep_despreading_bits, abep_estbc_ml_bound, abep_sm_union_bound, abep_stbc_sm_union_bound, abep_total,
    dense_spectrum, despreading_error, gram_spectrum, pep_approx, pep_exact, AnalyticModel, PepSpectrum,
    DEFAULT_PAIR_CAP,
};
use cim_core::channel::complex_gaussian;
use cim_core::codebook::gen_cyclic_chirp;
use cim_core::modem::{psk_map, BitLayout, Scheme, SchemeConfig};
use cim_core::spacetime::make_codeword;
use cim_core::{CMatrix, Cx};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(scheme: Scheme, nt: usize, nr: usize, nc: usize, m: usize) -> SchemeConfig {
    let cb = gen_cyclic_chirp(4, 1, nc).unwrap();
    SchemeConfig::new(scheme, nt, nr, m, Arc::new(cb)).unwrap()
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Noncoherent orthogonal detection without diversity, by inclusion-exclusion.
fn despread_d1(gamma: f64, nc: u64) -> f64 {
    (1..nc)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * binom(nc - 1, k) / (1.0 + k as f64 + k as f64 * gamma)
        })
        .sum()
}

/// `(1/pi) int_0^{pi/2} (sin^2/(sin^2 + c))^n dt` in closed form, written without cancellation.
fn mgf_single(c: f64, n: u64) -> f64 {
    let mu = (c / (1.0 + c)).sqrt();
    let lo = 0.5 / ((1.0 + c) * (1.0 + mu));
    let hi = 0.5 * (1.0 + mu);
    let sum: f64 = (0..n).map(|k| binom(n - 1 + k, k) * hi.powi(k as i32)).sum();
    lo.powi(n as i32) * sum
}

/// Closed-form PEP for a spectrum of rank one or two and a single receive antenna
/// (any Nr when both eigenvalues coincide).
fn pep_closed(eigs: &[f64], es: f64, nr: u64) -> f64 {
    let c: Vec<f64> = eigs.iter().map(|l| es * l / 4.0).collect();
    match c.as_slice() {
        [c1] => mgf_single(*c1, nr),
        // symmetric in (c1, c2), so the midpoint is accurate to second order
        [c1, c2] if (c1 - c2).abs() <= 1e-6 * c1 => mgf_single(0.5 * (c1 + c2), 2 * nr),
        [c1, c2] => {
            assert_eq!(nr, 1, "partial fractions written for Nr = 1");
            (c1 * mgf_single(*c1, 1) - c2 * mgf_single(*c2, 1)) / (c1 - c2)
        }
        _ => panic!("rank {}", c.len()),
    }
}

/// Eigenvalues of `D^H D` for an `Nt x 2` `D` from trace and determinant.
fn gram2_by_hand(d: &CMatrix) -> Vec<f64> {
    let g = d.adjoint() * d;
    let tr = g[(0, 0)].re + g[(1, 1)].re;
    let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let mut v: Vec<f64> = [tr / 2.0 + disc, tr / 2.0 - disc].into_iter().filter(|&x| x > 1e-12).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn bits_of(value: usize, width: usize) -> Vec<u8> {
    (0..width).rev().map(|s| ((value >> s) & 1) as u8).collect()
}

#[test]
fn despreading_matches_inclusion_exclusion() {
    for nc in [2u64, 3, 4, 8, 16] {
        for gamma in [0.0, 0.5, 1.0, 3.0, 10.0, 100.0, 1000.0] {
            let got = despreading_error(gamma, 1, nc as u32).unwrap();
            let want = despread_d1(gamma, nc);
            assert!((got - want).abs() < 1e-10 * want.max(1e-3), "Nc={nc} gamma={gamma}: {got} vs {want}");
        }
    }
    for gamma in [0.0, 1.0, 10.0, 100.0] {
        let got = despreading_error(gamma, 1, 2).unwrap();
        assert!((got - 1.0 / (2.0 + gamma)).abs() < 1e-12);
    }
    // zero SNR: a uniform guess among Nc branches
    for (d, nc) in [(1, 4), (2, 4), (4, 16), (8, 2)] {
        let got = despreading_error(0.0, d, nc).unwrap();
        assert!((got - (1.0 - 1.0 / nc as f64)).abs() < 1e-10, "D={d} Nc={nc}: {got}");
    }
}

#[test]
fn despreading_is_monotone() {
    let gammas = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
    for d in [1u32, 2, 4, 8] {
        for nc in [2u32, 4, 8] {
            let row: Vec<f64> = gammas.iter().map(|&g| despreading_error(g, d, nc).unwrap()).collect();
            assert!(row.windows(2).all(|w| w[1] < w[0]), "D={d} Nc={nc}: {row:?}");
        }
    }
    for &g in &gammas {
        let by_nc: Vec<f64> = [2u32, 4, 8, 16].iter().map(|&n| despreading_error(g, 2, n).unwrap()).collect();
        assert!(by_nc.windows(2).all(|w| w[1] > w[0]));
        let by_d: Vec<f64> = [1u32, 2, 4, 8].iter().map(|&d| despreading_error(g, d, 4).unwrap()).collect();
        assert!(by_d.windows(2).all(|w| w[1] < w[0]));
    }
    assert!(despreading_error(-1.0, 1, 2).is_err());
    assert!(despreading_error(1.0, 0, 2).is_err());
    assert!(despreading_error(1.0, 1, 1).is_err());
}

#[test]
fn despread_bit_weight() {
    assert_eq!(abep_despreading_bits(0.3, 2).unwrap(), 0.3);
    assert!((abep_despreading_bits(0.3, 4).unwrap() - 0.2).abs() < 1e-15);
    assert!(abep_despreading_bits(1.2, 4).is_err());
}

#[test]
fn pep_matches_closed_forms() {
    let mut grid = Vec::new();
    let mut x = 0.01;
    while x <= 1e4 {
        grid.push(x);
        x *= 1.7;
    }
    for &es in &grid {
        for nr in [1u64, 2, 4] {
            let s = PepSpectrum::from_eigenvalues(vec![2.0], 0);
            let got = pep_exact(&s, es, nr as usize).unwrap();
            let want = pep_closed(&[2.0], es, nr);
            assert!((got - want).abs() < 1e-9 * want.max(1e-12), "rank 1 es={es} nr={nr}");

            let s = PepSpectrum::from_eigenvalues(vec![4.0, 4.0], 0);
            let got = pep_exact(&s, es, nr as usize).unwrap();
            let want = pep_closed(&[4.0, 4.0], es, nr);
            assert!((got - want).abs() < 1e-9 * want.max(1e-12), "equal pair es={es} nr={nr}");
        }
        let s = PepSpectrum::from_eigenvalues(vec![3.0, 0.7], 0);
        let got = pep_exact(&s, es, 1).unwrap();
        let want = pep_closed(&[3.0, 0.7], es, 1);
        assert!((got - want).abs() < 1e-9 * want.max(1e-12), "distinct pair es={es}");
    }
}

#[test]
fn pep_approx_tracks_exact_at_high_snr() {
    for nr in [1usize, 2, 4] {
        for eigs in [vec![1.0], vec![2.0, 2.0], vec![4.0, 0.5]] {
            let s = PepSpectrum::from_eigenvalues(eigs.clone(), 0);
            let lmin = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            for k in 0..30 {
                let es = 10.0 / lmin * 1.5f64.powi(k);
                let exact = pep_exact(&s, es, nr).unwrap();
                let approx = pep_approx(&s, es, nr).unwrap();
                assert!(approx <= 1.5 * exact, "nr={nr} {eigs:?} es={es}: {approx} vs {exact}");
            }
        }
    }
}

#[test]
fn pep_rejects_degenerate_inputs() {
    let empty = PepSpectrum::from_eigenvalues(vec![0.0, 1e-14], 0);
    assert_eq!(empty.rank(), 0);
    assert!(pep_exact(&empty, 1.0, 1).is_err());
    let s = PepSpectrum::from_eigenvalues(vec![1.0], 0);
    assert!(pep_exact(&s, 1.0, 0).is_err());
    assert!(pep_exact(&s, -1.0, 1).is_err());
    assert!(pep_approx(&s, f64::NAN, 1).is_err());
}

#[test]
fn gram_spectrum_agrees_with_dense_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..1000 {
        let nt = 2 + i % 7;
        let xa = CMatrix::from_fn(nt, 2, |_, _| complex_gaussian(&mut rng, 1.0));
        let xb = CMatrix::from_fn(nt, 2, |_, _| complex_gaussian(&mut rng, 1.0));
        let fast = gram_spectrum(&xa, &xb).unwrap().eigenvalues;
        let dense = dense_spectrum(&(&xa - &xb));
        let hand = gram2_by_hand(&(&xa - &xb));
        assert_eq!(fast.len(), dense.len());
        for ((f, d), h) in fast.iter().zip(&dense).zip(&hand) {
            assert!((f - d).abs() < 1e-10 * d.max(1.0), "{fast:?} vs {dense:?}");
            assert!((f - h).abs() < 1e-9 * h.max(1.0), "{fast:?} vs {hand:?}");
        }
    }
    assert!(gram_spectrum(&CMatrix::zeros(3, 2), &CMatrix::zeros(3, 3)).is_err());
}

proptest! {
    #[test]
    fn alamouti_differences_on_one_pair_have_equal_eigenvalues(
        nt in 3usize..=8, pick in 0usize..16, k in prop::array::uniform4(0usize..4)
    ) {
        let cb = cim_core::spacetime::build_stbc_sm_codebook(nt, 4).unwrap();
        let nz = 1 + pick % cb.codeword_count();
        let c = |i: usize| Cx::from_polar(1.0, std::f64::consts::FRAC_PI_2 * i as f64);
        let a = make_codeword(&cb, nz, c(k[0]), c(k[1])).unwrap().matrix;
        let b = make_codeword(&cb, nz, c(k[2]), c(k[3])).unwrap().matrix;
        let s = gram_spectrum(&a, &b).unwrap();
        if (k[0], k[1]) == (k[2], k[3]) {
            prop_assert_eq!(s.rank(), 0);
        } else {
            prop_assert_eq!(s.rank(), 2);
            prop_assert!((s.eigenvalues[0] - s.eigenvalues[1]).abs() < 1e-10);
        }
    }
}

/// Union bound rebuilt from the public bit mapping and closed-form PEPs.
fn stbc_bound_by_enumeration(cfg: &SchemeConfig, es: f64) -> f64 {
    let layout = cfg.layout();
    let st = cfg.spatial().unwrap();
    let m = cfg.modulation_order();
    let w = layout.symbol_bits / 2;
    let b = layout.index_bits + layout.symbol_bits;
    let words: Vec<CMatrix> = (0..1usize << b)
        .map(|label| {
            let bits = bits_of(label, b);
            let nz = 1 + bits[..layout.index_bits].iter().fold(0, |a, &x| (a << 1) | x as usize);
            let x1 = psk_map(&bits[layout.index_bits..layout.index_bits + w], m).unwrap();
            let x2 = psk_map(&bits[layout.index_bits + w..], m).unwrap();
            make_codeword(st, nz, x1, x2).unwrap().matrix
        })
        .collect();
    let power = cfg.power_scale().powi(2);
    let mut total = 0.0;
    for i in 0..words.len() {
        for q in 0..words.len() {
            if i == q {
                continue;
            }
            let e = (i ^ q).count_ones() as f64;
            let eigs = gram2_by_hand(&(&words[i] - &words[q]));
            total += e * pep_closed(&eigs, es * power, cfg.num_rx() as u64);
        }
    }
    total / (b as f64 * (1u64 << b) as f64)
}

#[test]
fn stbc_bound_matches_brute_force_labels() {
    for (nt, m) in [(3, 2), (4, 2), (3, 4)] {
        let cfg = config(Scheme::StbcSmCim, nt, 1, 2, m);
        for db in [0.0, 5.0, 10.0, 20.0] {
            let es = 10f64.powf(db / 10.0);
            let got = abep_stbc_sm_union_bound(&cfg, es, true).unwrap();
            let want = stbc_bound_by_enumeration(&cfg, es).min(0.5);
            assert!((got - want).abs() < 1e-9 * want, "Nt={nt} M={m} {db} dB: {got} vs {want}");
        }
    }
}

#[test]
fn sm_bound_matches_brute_force_labels() {
    for (nt, nr, m) in [(2, 4, 2), (4, 1, 4), (8, 2, 8)] {
        let cfg = config(Scheme::SmCim, nt, nr, 2, m);
        let layout = cfg.layout();
        let b = layout.index_bits + layout.symbol_bits;
        let hyp = |label: usize| {
            let bits = bits_of(label, b);
            let ant = bits[..layout.index_bits].iter().fold(0, |a, &x| (a << 1) | x as usize);
            (ant, psk_map(&bits[layout.index_bits..], m).unwrap())
        };
        for db in [0.0, 10.0, 20.0] {
            let es = 10f64.powf(db / 10.0);
            let mut total = 0.0;
            for i in 0..1usize << b {
                for q in 0..1usize << b {
                    if i == q {
                        continue;
                    }
                    let ((ai, xi), (aq, xq)) = (hyp(i), hyp(q));
                    let dist = if ai == aq { (xi - xq).norm_sqr() } else { 2.0 };
                    total += (i ^ q).count_ones() as f64 * mgf_single(es * dist / 4.0, nr as u64);
                }
            }
            let want = (total / (b as f64 * (1u64 << b) as f64)).min(0.5);
            let got = abep_sm_union_bound(&cfg, es).unwrap();
            assert!((got - want).abs() < 1e-12 * want.max(1e-300), "{nt} {nr} {m} {db}: {got} vs {want}");
        }
    }
}

#[test]
fn bounds_decrease_with_snr() {
    let sm = config(Scheme::SmCim, 4, 2, 4, 4);
    let stbc = config(Scheme::StbcSmCim, 4, 2, 4, 4);
    let estbc = config(Scheme::EstbcSmCim, 3, 1, 4, 2);
    let mut prev = [0.6; 3];
    for db in (0..=30).step_by(3) {
        let es = 10f64.powf(db as f64 / 10.0);
        let now = [
            abep_sm_union_bound(&sm, es).unwrap(),
            abep_stbc_sm_union_bound(&stbc, es, true).unwrap(),
            abep_estbc_ml_bound(&estbc, es, true, DEFAULT_PAIR_CAP).unwrap(),
        ];
        for (n, p) in now.iter().zip(prev) {
            assert!(*n <= p && *n >= 0.0 && *n <= 0.5, "{db} dB: {now:?}");
        }
        prev = now;
    }
}

#[test]
fn estbc_bound_respects_pair_cap() {
    let cfg = config(Scheme::EstbcSmCim, 4, 2, 4, 4);
    assert!(abep_estbc_ml_bound(&cfg, 10.0, true, 1000).is_err());
}

#[test]
fn total_abep_weights_bits() {
    let layout = BitLayout {
        index_bits: 2,
        symbol_bits: 2,
        code_bits: 2,
    };
    let t = abep_total(0.01, 0.04, layout).unwrap();
    assert!((t.pb_total - (4.0 / 6.0 * 0.01 + 2.0 / 6.0 * 0.04)).abs() < 1e-15);
    assert_eq!(t.bit_weights, (4.0 / 6.0, 2.0 / 6.0));
    assert_eq!(t.p2_despreading, Some(0.04));
    assert_eq!(abep_total(0.0, 0.0, layout).unwrap().pb_total, 0.0);
    assert!(abep_total(1.5, 0.0, layout).is_err());
    assert!(abep_total(0.1, -0.1, layout).is_err());
}

#[test]
fn analytic_model_composes_both_stages() {
    let cfg = config(Scheme::StbcSmCim, 4, 2, 4, 4);
    let model = AnalyticModel::new(&cfg, DEFAULT_PAIR_CAP).unwrap();
    let es = 10f64.powf(0.8);
    let a = model.abep(8.0).unwrap();
    let p1 = abep_stbc_sm_union_bound(&cfg, es, true).unwrap();
    let p2 = abep_despreading_bits(despreading_error(es, 4, 4).unwrap(), 4).unwrap();
    assert!((a.p1_detection - p1).abs() < 1e-15);
    assert!((a.p2_despreading.unwrap() - p2).abs() < 1e-15);
    assert!((a.pb_total - (0.75 * p1 + 0.25 * p2)).abs() < 1e-15);

    let estbc = config(Scheme::EstbcSmCim, 3, 1, 4, 2);
    let e = AnalyticModel::new(&estbc, DEFAULT_PAIR_CAP).unwrap().abep(10.0).unwrap();
    assert_eq!(e.p2_despreading, None);
    assert_eq!(e.pb_total, e.p1_detection);
}

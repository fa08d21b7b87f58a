use std::sync::Arc;

use cim_core::analysis::{AnalyticModel, Detector, DEFAULT_PAIR_CAP};
use cim_core::channel::ChannelConfig;
use cim_core::codebook::gen_cyclic_chirp;
use cim_core::modem::{Scheme, SchemeConfig};
use cim_core::sim::{
    compare_detectors, run_point, run_sweep, snr_at_ber, BerPoint, DetectorMode, ExperimentSpec, RunOptions,
    StreamRoot,
};

fn spec(scheme: Scheme, (nt, nr, nc, m): (usize, usize, usize, usize), grid: Vec<f64>, mode: DetectorMode) -> ExperimentSpec {
    let cb = Arc::new(gen_cyclic_chirp(4, 1, nc).unwrap());
    let cfg = SchemeConfig::new(scheme, nt, nr, m, cb).unwrap();
    ExperimentSpec::new(cfg, grid, 11, mode)
}

fn opts(workers: usize) -> RunOptions {
    RunOptions {
        workers,
        stream_digest: false,
    }
}

fn root(i: u64) -> StreamRoot {
    StreamRoot {
        master_seed: 11,
        snr_index: i,
    }
}

/// One-sided 99% upper slack for `a - b` on block-error proportions.
fn one_sided_slack(a: &BerPoint, b: &BerPoint) -> f64 {
    let pa = a.block_errors as f64 / a.blocks as f64;
    let pb = b.block_errors as f64 / b.blocks as f64;
    2.326 * (pa * (1.0 - pa) / a.blocks as f64 + pb * (1.0 - pb) / b.blocks as f64).sqrt()
}

#[test]
fn noiseless_points_have_no_errors() {
    for (scheme, dims) in [
        (Scheme::SmCim, (4, 2, 4, 4)),
        (Scheme::StbcSmCim, (4, 2, 4, 4)),
        (Scheme::EstbcSmCim, (3, 2, 4, 2)),
    ] {
        let mut s = spec(scheme, dims, vec![0.0], DetectorMode::Lc);
        s.max_blocks = 3000;
        for det in [Detector::Ml, Detector::Lc] {
            let p = run_point(&s, det, f64::INFINITY, root(0), &opts(2)).unwrap();
            assert_eq!(p.bit_errors, 0, "{scheme} {det}");
            assert_eq!(p.blocks, 3000);
            assert_eq!(p.ber, 0.0);
            assert!(!p.reliable);
        }
    }
}

#[test]
fn repeated_runs_are_identical_for_any_worker_count() {
    let mut s = spec(Scheme::StbcSmCim, (4, 2, 4, 4), vec![0.0, 4.0, 8.0], DetectorMode::Both);
    s.max_blocks = 5000;
    s.target_errors = 200;
    let a = run_sweep(&s, &opts(1)).unwrap();
    let b = run_sweep(&s, &opts(1)).unwrap();
    let c = run_sweep(&s, &opts(4)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.len(), 2);
    assert!(a.iter().all(|curve| curve.points.len() == 3));
}

#[test]
fn early_stop_lands_on_chunk_boundary() {
    let mut s = spec(Scheme::SmCim, (2, 1, 2, 2), vec![0.0], DetectorMode::Lc);
    s.max_blocks = 100_000;
    s.target_errors = 100;
    let p = run_point(&s, Detector::Lc, 0.0, root(0), &opts(3)).unwrap();
    assert!(p.bit_errors >= 100);
    assert!(p.blocks < 100_000);
    assert_eq!(p.blocks % 1024, 0);
    assert_eq!(p.bits_simulated, p.blocks * 3);
    assert_eq!(p.ber, p.bit_errors as f64 / p.bits_simulated as f64);
}

#[test]
fn ber_is_nonincreasing_within_noise() {
    let grid: Vec<f64> = (0..=5).map(|k| 2.0 * k as f64).collect();
    let mut s = spec(Scheme::SmCim, (2, 2, 2, 2), grid, DetectorMode::Lc);
    s.max_blocks = 20_000;
    s.target_errors = 300;
    let curve = &run_sweep(&s, &opts(4)).unwrap()[0];
    for w in curve.points.windows(2) {
        let slack = 2.0 * (w[0].ci95_halfwidth + w[1].ci95_halfwidth);
        assert!(w[1].ber <= w[0].ber + slack, "{} dB -> {} dB", w[0].snr_db, w[1].snr_db);
    }
}

#[test]
fn zero_error_points_still_reported() {
    let mut s = spec(Scheme::SmCim, (2, 4, 2, 2), vec![0.0, 40.0], DetectorMode::Ml);
    s.max_blocks = 2000;
    let curve = &run_sweep(&s, &opts(2)).unwrap()[0];
    assert_eq!(curve.points.len(), 2);
    assert_eq!(curve.points[1].bit_errors, 0);
    assert_eq!(curve.points[1].ber, 0.0);
}

#[test]
fn digest_tracks_every_field() {
    let base = spec(Scheme::SmCim, (2, 2, 2, 2), vec![0.0, 5.0], DetectorMode::Lc);
    let d0 = base.digest();
    assert_eq!(d0, base.clone().digest());
    let variants: Vec<Box<dyn Fn(&mut ExperimentSpec)>> = vec![
        Box::new(|s| s.snr_grid_db = vec![0.0, 6.0]),
        Box::new(|s| s.max_blocks += 1),
        Box::new(|s| s.target_errors += 1),
        Box::new(|s| s.master_seed += 1),
        Box::new(|s| s.detector = DetectorMode::Ml),
        Box::new(|s| s.symbol_duration = 2.0),
        Box::new(|s| s.channel.corr_r = 0.5),
        Box::new(|s| s.channel.csi_error_var = 0.1),
        Box::new(|s| {
            let cb = Arc::new(gen_cyclic_chirp(3, 1, 2).unwrap());
            s.scheme = SchemeConfig::new(Scheme::SmCim, 2, 2, 2, cb).unwrap();
        }),
        Box::new(|s| {
            s.scheme = SchemeConfig::new(Scheme::SmCim, 2, 2, 4, Arc::new(s.scheme.codebook().clone())).unwrap();
        }),
    ];
    for (i, change) in variants.iter().enumerate() {
        let mut s = base.clone();
        change(&mut s);
        assert_ne!(s.digest(), d0, "variant {i}");
    }
}

#[test]
fn lc_tracks_ml_at_fifteen_db() {
    let mut s = spec(Scheme::SmCim, (4, 4, 4, 4), vec![15.0], DetectorMode::Both);
    s.max_blocks = 10_240;
    s.target_errors = 1_000_000;
    let cmp = compare_detectors(&s, &opts(4)).unwrap();
    assert!(cmp.streams_match());
    let (ml, lc) = (&cmp.ml.points[0], &cmp.lc.points[0]);
    assert!(lc.ber <= 2.0 * ml.ber.max(1.0 / ml.bits_simulated as f64), "ML {} LC {}", ml.ber, lc.ber);
}

#[test]
fn ml_dominates_lc_per_scheme() {
    for (scheme, dims, snr) in [
        (Scheme::SmCim, (2, 2, 4, 2), 4.0),
        (Scheme::StbcSmCim, (4, 1, 4, 4), 4.0),
        (Scheme::EstbcSmCim, (3, 1, 4, 2), 2.0),
    ] {
        let mut s = spec(scheme, dims, vec![snr], DetectorMode::Both);
        s.max_blocks = 10_240;
        s.target_errors = 1_000_000;
        let cmp = compare_detectors(&s, &opts(4)).unwrap();
        assert!(cmp.streams_match());
        let (ml, lc) = (&cmp.ml.points[0], &cmp.lc.points[0]);
        assert_eq!(ml.blocks, lc.blocks);
        let slack = one_sided_slack(ml, lc) * ml.blocks as f64;
        assert!(
            ml.block_errors as f64 <= lc.block_errors as f64 + slack,
            "{scheme}: ML {} LC {}",
            ml.block_errors,
            lc.block_errors
        );
    }
}

#[test]
fn comparison_requires_both_detectors() {
    let s = spec(Scheme::SmCim, (2, 2, 2, 2), vec![0.0], DetectorMode::Lc);
    let err = compare_detectors(&s, &opts(1)).unwrap_err();
    assert!(err.to_string().contains("detector"), "{err}");
}

#[test]
fn sm_cim_simulation_near_analytic_at_1e_3() {
    let s0 = spec(Scheme::SmCim, (2, 4, 2, 2), vec![0.0], DetectorMode::Lc);
    let model = AnalyticModel::new(&s0.scheme, DEFAULT_PAIR_CAP).unwrap();
    let snr = (0..80)
        .map(|k| 0.5 * k as f64)
        .find(|&db| model.abep(db).unwrap().pb_total < 1e-3)
        .unwrap();
    let analytic = model.abep(snr).unwrap().pb_total;
    let mut s = s0.clone();
    s.snr_grid_db = vec![snr];
    s.max_blocks = 100_352;
    s.target_errors = 1_000_000;
    let p = run_point(&s, Detector::Lc, snr, root(0), &opts(4)).unwrap();
    let ratio = p.ber / analytic;
    assert!((1.0 / 3.0..=3.0).contains(&ratio), "{snr} dB: sim {} analytic {analytic}", p.ber);
}

#[test]
fn analytic_overlay_only_for_ideal_channels() {
    let mut s = spec(Scheme::StbcSmCim, (4, 2, 4, 4), vec![0.0, 10.0], DetectorMode::Lc);
    s.max_blocks = 1024;
    let curve = &run_sweep(&s, &opts(1)).unwrap()[0];
    let overlay = curve.analytic_points.as_ref().unwrap();
    assert_eq!(overlay.len(), 2);
    assert!(overlay[1].pb < overlay[0].pb);

    s.channel = ChannelConfig {
        corr_r: 0.5,
        ..s.channel
    };
    assert!(run_sweep(&s, &opts(1)).unwrap()[0].analytic_points.is_none());

    // ESTBC (4,·,4,4) has 2^24 labels, far past the pair cap
    let mut big = spec(Scheme::EstbcSmCim, (4, 1, 4, 4), vec![30.0], DetectorMode::Lc);
    big.max_blocks = 1024;
    let curve = &run_sweep(&big, &opts(2)).unwrap()[0];
    assert!(curve.analytic_points.is_none());
    assert_eq!(curve.points.len(), 1);
}

#[test]
fn invalid_specs_name_their_field() {
    let base = spec(Scheme::SmCim, (2, 2, 2, 2), vec![0.0, 5.0], DetectorMode::Lc);
    let cases: Vec<(&str, Box<dyn Fn(&mut ExperimentSpec)>)> = vec![
        ("snr_grid_db", Box::new(|s| s.snr_grid_db = vec![5.0, 5.0])),
        ("snr_grid_db", Box::new(|s| s.snr_grid_db.clear())),
        ("max_blocks", Box::new(|s| s.max_blocks = 999)),
        ("target_errors", Box::new(|s| s.target_errors = 99)),
        ("symbol_duration", Box::new(|s| s.symbol_duration = 0.0)),
        ("channel", Box::new(|s| s.channel.corr_r = 2.0)),
    ];
    for (field, change) in cases {
        let mut s = base.clone();
        change(&mut s);
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains(field), "{field}: {err}");
        assert!(run_sweep(&s, &opts(1)).is_err());
    }
}

#[test]
fn level_crossing_interpolates_in_log_domain() {
    let pts = [(0.0, 1e-1), (10.0, 1e-3)];
    assert!((snr_at_ber(&pts, 1e-2).unwrap() - 5.0).abs() < 1e-12);
    assert!(snr_at_ber(&pts, 1e-5).is_err());
}

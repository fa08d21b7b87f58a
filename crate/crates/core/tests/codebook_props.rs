use cim_core::codebook::{
    enumerate_sequence_pairs, gen_cyclic_chirp, gen_zadoff_chu, load_codebook, max_cross_correlation,
    save_codebook, zadoff_chu_sequence, CodebookFamily, SpreadingCodebook,
};
use cim_core::{CMatrix, Cx};
use proptest::prelude::*;

const PRIMES: [usize; 8] = [5, 7, 11, 13, 31, 61, 127, 251];

/// `|sum_n a_n conj(b_n)|` with plain loops.
fn inner_abs(a: &[Cx], b: &[Cx]) -> f64 {
    a.iter().zip(b).fold(Cx::new(0.0, 0.0), |acc, (x, y)| acc + x * y.conj()).norm()
}

#[test]
fn zadoff_chu_prime_length_cross_correlation() {
    for &l in &PRIMES {
        let roots: Vec<u64> = (1..l as u64).take(6).collect();
        let cb = gen_zadoff_chu(l, &roots).unwrap();
        let target = 1.0 / (l as f64).sqrt();
        for i in 0..roots.len() {
            for j in 0..roots.len() {
                if i == j {
                    continue;
                }
                let a = zadoff_chu_sequence(l, roots[i]);
                let b = zadoff_chu_sequence(l, roots[j]);
                let direct = inner_abs(&a, &b) / l as f64;
                assert!((direct - target).abs() < 1e-9, "L={l} u={} v={}", roots[i], roots[j]);
            }
        }
        let reported = max_cross_correlation(&cb).unwrap();
        assert!((reported - target).abs() < 1e-9, "L={l}: {reported}");
    }
}

#[test]
fn zadoff_chu_unit_energy_and_magnitude() {
    let cb = gen_zadoff_chu(13, &[1, 2, 3]).unwrap();
    assert!((cb.energy() - 1.0).abs() < 1e-12);
    for n in 1..=3 {
        for chip in cb.sequence(n).iter() {
            assert!((chip.norm() - 1.0 / 13f64.sqrt()).abs() < 1e-12);
        }
    }
}

#[test]
fn zadoff_chu_rejects_bad_roots() {
    assert!(gen_zadoff_chu(9, &[3]).is_err());
    assert!(gen_zadoff_chu(7, &[0]).is_err());
    assert!(gen_zadoff_chu(7, &[1, 1]).is_err());
    assert!(gen_zadoff_chu(8, &[1]).is_err());
}

#[test]
fn cyclic_chirp_counts_and_lengths() {
    let cb = gen_cyclic_chirp(6, 4, 16).unwrap();
    assert_eq!(cb.len(), 252);
    assert_eq!(cb.count(), 16);
    assert_eq!(cb.family(), CodebookFamily::CyclicChirp);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cyclic_chirp_is_orthonormal(sf in 2u32..=7, p in 1usize..=4, frac in 0.0f64..1.0) {
        let length = p * ((1usize << sf) - 1);
        let max_nc = length.min(1usize << sf);
        let nc = 2 + ((max_nc - 2) as f64 * frac) as usize;
        let cb = gen_cyclic_chirp(sf, p, nc).unwrap();
        prop_assert!((cb.energy() - 1.0).abs() < 1e-12);
        // independent Gram check
        let g = cb.matrix().adjoint() * cb.matrix();
        let mut worst: f64 = 0.0;
        for i in 0..nc {
            for j in 0..nc {
                if i != j {
                    worst = worst.max(g[(i, j)].norm());
                }
            }
        }
        prop_assert!(worst < 1e-9, "sf={} p={} nc={} worst={}", sf, p, nc, worst);
        prop_assert!(max_cross_correlation(&cb).unwrap() < 1e-9);
    }

    #[test]
    fn text_round_trip(l in prop::sample::select(PRIMES.to_vec()), k in 2usize..5) {
        let roots: Vec<u64> = (1..=k as u64).collect();
        let cb = gen_zadoff_chu(l, &roots).unwrap();
        let back = SpreadingCodebook::from_text(&cb.to_text()).unwrap();
        prop_assert_eq!(back.matrix(), cb.matrix());
    }

    #[test]
    fn pair_set_size_and_order(nc in 2usize..40) {
        let set = enumerate_sequence_pairs(nc).unwrap();
        let all = nc * (nc - 1) / 2;
        let expected = 1usize << (usize::BITS - 1 - all.leading_zeros());
        prop_assert_eq!(set.len(), expected);
        for (i, &(a, b)) in set.pairs().iter().enumerate() {
            prop_assert!(a < b && b <= nc);
            prop_assert_eq!(set.position((a, b)), Some(i + 1));
        }
        prop_assert!(set.pairs().windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cb.txt");
    let cb = gen_cyclic_chirp(3, 1, 4).unwrap();
    save_codebook(&cb, &path).unwrap();
    let back = load_codebook(&path).unwrap();
    assert_eq!(back.count(), 4);
    assert!((back.matrix() - cb.matrix()).norm() < 1e-15);
    assert!(load_codebook(dir.path().join("missing.txt")).is_err());
    std::fs::write(&path, "not a codebook\n").unwrap();
    assert!(load_codebook(&path).is_err());
}

#[test]
fn non_uniform_energy_rejected() {
    let mut m = CMatrix::zeros(4, 2);
    m[(0, 0)] = Cx::new(1.0, 0.0);
    m[(1, 1)] = Cx::new(2.0, 0.0);
    assert!(SpreadingCodebook::from_matrix(m, CodebookFamily::File).is_err());
}

#[test]
fn single_sequence_has_no_cross_correlation() {
    let cb = gen_zadoff_chu(7, &[1]).unwrap();
    assert!(max_cross_correlation(&cb).is_err());
}

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sheafgauge::fixtures;
use sheafgauge::linalg::{self, Mat};
use sheafgauge::operators::{laplacian, Provenance};
use sheafgauge::sheaf::random_orthogonal;
use sheafgauge::spectral::{
    eigendecompose, eigendecompose_matrix, global_witness, interleaving_shift, normalize_spectrum, InterleavingMode,
};
use sheafgauge::{Spectrum, Weight, WitnessConfig};

/// Sorted eigenvalues, some of them exact zeros, on a random orthonormal
/// eigenbasis.
fn spectrum_strategy() -> impl Strategy<Value = Spectrum> {
    (prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..5.0], 1..9), any::<u64>()).prop_map(|(mut vals, seed)| {
        vals.sort_by(f64::total_cmp);
        let q = random_orthogonal(vals.len(), &mut ChaCha8Rng::seed_from_u64(seed));
        Spectrum::from_parts(vals, q, Provenance::Base).unwrap()
    })
}

fn weight_strategy() -> impl Strategy<Value = Weight> {
    prop_oneof![
        Just(Weight::Uniform),
        Just(Weight::Inverse),
        (0.1f64..3.0).prop_map(|t| Weight::Heat { t }),
        Just(Weight::GapIndicator),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn witness_monotone_in_upper_and_antitone_in_lower(
        s in spectrum_strategy(),
        w in weight_strategy(),
        d0 in 0.0f64..2.0,
        a in 0.01f64..3.0,
        b in 0.01f64..3.0,
    ) {
        let (lo, hi) = (d0 + a.min(b), d0 + a.max(b));
        let at = |d0: f64, d1: f64| global_witness(&s, &WitnessConfig::new(d0, d1, w).unwrap()).unwrap();
        // nudge by a few ulps to absorb rounding in delta1 - max(delta0, lambda)
        let slack = 1e-12 * (1.0 + hi);
        prop_assert!(at(d0, lo) <= at(d0, hi) + slack);
        let (e0, e1) = (d0.min(lo * 0.5), d0.max(lo * 0.5));
        prop_assert!(at(e1, lo) <= at(e0, lo) + slack);
    }

    #[test]
    fn gap_indicator_is_exact(s in spectrum_strategy(), d0 in 0.0f64..2.0, width in 0.01f64..3.0) {
        let d1 = d0 + width;
        let got = global_witness(&s, &WitnessConfig::new(d0, d1, Weight::GapIndicator).unwrap()).unwrap();
        let gap = s.spectral_gap();
        let expected = if gap <= d1 { d1 - d0.max(gap) } else { 0.0 };
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn harmonic_spaces_nest(s in spectrum_strategy()) {
        let grid: Vec<f64> = (0..10).map(|k| k as f64 * 0.6).collect();
        for (i, &a) in grid.iter().enumerate() {
            for &b in &grid[i..] {
                let (qa, qb) = (s.harmonic_space(a).unwrap(), s.harmonic_space(b).unwrap());
                let leak = &qa - &qb * (qb.transpose() * &qa);
                prop_assert!(linalg::spectral_norm(&leak) < 1e-8);
            }
        }
    }

    #[test]
    fn interleaving_of_shifted_copy_is_the_shift(s in spectrum_strategy(), k in 1u32..4096) {
        // dyadic shifts keep every sum and difference exact for these magnitudes
        let shift = k as f64 / 1024.0;
        let vals: Vec<f64> = s.values().iter().map(|v| (v * 1024.0).round() / 1024.0).collect();
        let a = Spectrum::from_parts(vals, s.vectors().clone(), Provenance::Base).unwrap();
        let b = a.shifted(shift).unwrap();
        prop_assert_eq!(interleaving_shift(&a, &a, InterleavingMode::Auto).unwrap().eta, Some(0.0));
        prop_assert_eq!(interleaving_shift(&a, &b, InterleavingMode::Auto).unwrap().eta, Some(shift));
    }
}

#[test]
fn interleaving_is_symmetric_on_random_pairs() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..20 {
        let a = spectrum_strategy().new_tree(&mut runner).unwrap().current();
        let b = spectrum_strategy().new_tree(&mut runner).unwrap().current();
        for mode in [InterleavingMode::Auto, InterleavingMode::Profile] {
            let ab = interleaving_shift(&a, &b, mode).unwrap();
            let ba = interleaving_shift(&b, &a, mode).unwrap();
            assert_eq!(ab.eta, ba.eta);
        }
    }
}

#[test]
fn same_size_random_pairs_interleave_symmetrically_in_subspace_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..20u64 {
        let n = 2 + (seed as usize % 5);
        let make = |rng: &mut ChaCha8Rng| {
            let q = random_orthogonal(n, rng);
            let d = Mat::from_fn(n, n, |i, j| if i == j { (i % 3) as f64 * 0.75 } else { 0.0 });
            eigendecompose_matrix(&(&q * d * q.transpose()), Provenance::Base).unwrap()
        };
        let (a, b) = (make(&mut rng), make(&mut rng));
        let ab = interleaving_shift(&a, &b, InterleavingMode::Subspace).unwrap();
        let ba = interleaving_shift(&b, &a, InterleavingMode::Subspace).unwrap();
        assert_eq!(ab.eta, ba.eta, "seed {seed}");
    }
}

#[test]
fn normalization_keeps_kernel_and_order() {
    for (name, s) in fixtures::hodge_fixtures().unwrap() {
        for j in 0..3 {
            let l = laplacian(&s, j).unwrap();
            if l.dim() == 0 {
                continue;
            }
            let before = eigendecompose(&l).unwrap();
            let (scaled, norm) = normalize_spectrum(&l).unwrap();
            let after = eigendecompose(&scaled).unwrap();
            assert_eq!(before.kernel_dim(), after.kernel_dim(), "{name}, degree {j}");
            if norm.applied {
                for (x, y) in before.values().iter().zip(after.values()) {
                    assert!((x / norm.scale - y).abs() <= 1e-9 * (1.0 + y.abs()), "{name}, degree {j}");
                }
            }
        }
    }
}

#[test]
fn decompositions_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..8 {
        let a = random_orthogonal(n, &mut rng);
        let m = Mat::from_fn(n, n + 1, |i, j| a[(i, j % n)] * (j as f64 + 0.5));
        let (u, s, v) = linalg::svd_sorted(&m);
        let back = &u * Mat::from_diagonal(&linalg::Vector::from_vec(s.clone())) * v.transpose();
        assert!(linalg::max_abs(&(back - &m)) < 1e-12);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let sym = &m * m.transpose();
        let (vals, vecs) = linalg::sym_eigen(&sym);
        let back = &vecs * Mat::from_diagonal(&linalg::Vector::from_vec(vals)) * vecs.transpose();
        assert!(linalg::max_abs(&(back - &sym)) < 1e-10);
    }
    // rank-deficient products of orthonormal frames, with singular values
    // exactly one on the shared directions
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_orthogonal(5, &mut rng);
        let r = random_orthogonal(3, &mut rng);
        let a = q.columns(0, 3).into_owned();
        let b = Mat::from_fn(5, 3, |i, j| if j < 2 { q[(i, j)] } else { q[(i, 4)] }) * &r;
        let m = a.transpose() * &b;
        let (u, s, v) = linalg::svd_sorted(&m);
        let back = &u * Mat::from_diagonal(&linalg::Vector::from_vec(s.clone())) * v.transpose();
        assert!(linalg::max_abs(&(back - &m)) < 1e-12, "seed {seed}");
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 1.0).abs() < 1e-12 && s[2] < 1e-12, "seed {seed}: {s:?}");
        assert_eq!(linalg::numerical_rank(&m, linalg::RANK_TOL), 2);
    }
}

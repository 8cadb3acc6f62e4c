//! Seeded fixture families shared by tests, the acceptance suite and the
//! benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::complex::{CliqueComplex, Graph};
use crate::error::Result;
use crate::linalg::Mat;
use crate::operators::GroundingMorphism;
use crate::sheaf::{self, CellSheaf, FeaturePipelineConfig, Gauge};
use crate::spectral::GroundedOperators;

/// Erdős–Rényi graph `G(n, p)`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, &edges).expect("generated edges are simple")
}

/// Sheaf built by the feature pipeline from exact-overlap features on a
/// random graph with 6 to 9 vertices.
pub fn feature_sheaf(seed: u64) -> Result<CellSheaf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.random_range(6..10);
    let g = random_graph(n, 0.5, seed);
    let features = sheaf::frame_features(n, 5, 3, seed);
    sheaf::build_sheaf_from_features(&g, &features, &FeaturePipelineConfig::default())
}

/// Generator sheaves plus ten feature-built sheaves.
pub fn hodge_fixtures() -> Result<Vec<(String, CellSheaf)>> {
    let k = |n: usize| CliqueComplex::from_graph(&Graph::complete(n).expect("complete graph"));
    let mut out = vec![
        ("trivial-10".to_string(), sheaf::trivial_bundle(10, 1)?),
        ("trivial-6x2".to_string(), sheaf::trivial_bundle(6, 2)?),
        ("mobius-10".to_string(), sheaf::mobius_bundle(10, 1)?),
        ("mobius-4".to_string(), sheaf::mobius_bundle(4, 1)?),
        ("mobius-7x3".to_string(), sheaf::mobius_bundle(7, 3)?),
        ("hidden-twist-10".to_string(), sheaf::hidden_twist_bundle(10, 0.3)?),
        ("hidden-twist-flat".to_string(), sheaf::hidden_twist_bundle(6, 0.0)?),
        ("noisy-trivial-10".to_string(), sheaf::noisy_trivial_bundle(10, 0.25, 1)?),
        ("noisy-trivial-6".to_string(), sheaf::noisy_trivial_bundle(6, 0.5, 2)?),
        ("constant-k3".to_string(), CellSheaf::constant(k(3), 1)),
        ("constant-k4x2".to_string(), CellSheaf::constant(k(4), 2)),
        ("constant-k5".to_string(), CellSheaf::constant(k(5), 1)),
        ("gauged-k4x2".to_string(), Gauge::random(&k(4), 2, 11).apply(k(4), 2)?),
        ("gauged-k5x3".to_string(), Gauge::random(&k(5), 3, 12).apply(k(5), 3)?),
        ("constant-prism".to_string(), CellSheaf::constant(CliqueComplex::from_graph(&Graph::prism(5)?), 2)),
    ];
    for seed in 0..10 {
        out.push((format!("features-{seed}"), feature_sheaf(seed)?));
    }
    Ok(out)
}

/// Gauged constant sheaf on a random graph together with a compatible
/// per-cell grounding `eps_s = E G_s^T` for a random `E`.
pub fn compatible_grounding(seed: u64) -> Result<(CellSheaf, GroundingMorphism)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..8);
    let dim = rng.random_range(1..3);
    let w = rng.random_range(1..4);
    let cx = CliqueComplex::from_graph(&random_graph(n, 0.6, seed.wrapping_add(100)));
    let gauge = Gauge::random(&cx, dim, seed.wrapping_add(200));
    let s = gauge.apply(cx, dim)?;
    let e = Mat::from_fn(w, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g = GroundingMorphism::gauge_compatible(&s, &gauge, &e)?;
    Ok((s, g))
}

/// Two grounded operator triples that are simultaneously diagonal in shared
/// orthonormal bases `U` (source) and `V` (target):
/// `d_f = U diag(f) U^T`, `d_w = V diag(g) V^T`, `eps = V diag(e) U^T`,
/// with `g_i = f_i` wherever `e_i != 0` so that `eps` intertwines.
pub fn commuting_pair(seed: u64, dim: usize) -> (GroundedOperators, GroundedOperators) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = sheaf::random_orthogonal(dim, &mut rng);
    let v = sheaf::random_orthogonal(dim, &mut rng);
    let mut make = || {
        let f: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..2.0)).collect();
        let e: Vec<f64> =
            (0..dim).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.2..1.5) }).collect();
        let g: Vec<f64> = (0..dim).map(|i| if e[i] != 0.0 { f[i] } else { rng.random_range(0.0..2.0) }).collect();
        let diag = |x: &[f64]| Mat::from_diagonal(&nalgebra::DVector::from_column_slice(x));
        let d_f = &u * diag(&f) * u.transpose();
        let d_w = &v * diag(&g) * v.transpose();
        let eps = &v * diag(&e) * u.transpose();
        GroundedOperators::new(d_f, d_w, eps).expect("square blocks of equal size")
    };
    let a = make();
    let b = make();
    (a, b)
}

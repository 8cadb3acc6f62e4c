use sheafgauge::fixtures;
use sheafgauge::linalg::Mat;
use sheafgauge::operators::{
    block_decomposition, verify_cone_equivalence, verify_long_exact_sequence, GroundingMode, GroundingMorphism,
};
use sheafgauge::sheaf;
use sheafgauge::spectral::verify_cone_reduction;
use sheafgauge::{CheckStatus, CliqueComplex, Graph, TargetSheaf};

#[test]
fn geometric_cone_matches_translated_cone_on_compatible_groundings() {
    for seed in 0..10 {
        let (s, g) = fixtures::compatible_grounding(seed).unwrap();
        let r = verify_cone_equivalence(&s, &g).unwrap();
        assert_eq!(r.status, CheckStatus::Pass, "seed {seed}: {r:?}");
        assert!(r.max_residual.unwrap() < 1e-12);
    }
}

#[test]
fn incompatible_grounding_reports_its_defect() {
    let m = sheaf::mobius_bundle(6, 1).unwrap();
    let g = GroundingMorphism::from_padding(&m, GroundingMode::VertexLevel);
    let r = verify_cone_equivalence(&m, &g).unwrap();
    assert_eq!(r.status, CheckStatus::HypothesisNotMet);
    assert!(r.defect_norm > 1.0);
    assert!(r.max_residual.is_none());
}

#[test]
fn long_exact_sequence_is_exact() {
    let cx = CliqueComplex::from_graph(&Graph::complete(4).unwrap());
    let k4 = sheaf::CellSheaf::constant(cx, 2);
    let identity = GroundingMorphism::uniform(&k4, &Mat::identity(2, 2)).unwrap();
    let zero = GroundingMorphism::zero(&k4, 2, GroundingMode::VertexLevel);
    let mut cases = vec![("identity".to_string(), k4.clone(), identity), ("zero".to_string(), k4.clone(), zero)];
    for seed in 0..10 {
        let (s, g) = fixtures::compatible_grounding(seed).unwrap();
        cases.push((format!("compatible-{seed}"), s, g));
    }
    for (name, s, g) in cases {
        for target in [TargetSheaf::Constant, TargetSheaf::AugmentedConstant] {
            let r = verify_long_exact_sequence(&s, &g, target).unwrap();
            assert_eq!(r.status, CheckStatus::Pass, "{name}, {target:?}");
            assert!(r.nodes.iter().all(|n| n.exact), "{name}, {target:?}");
        }
    }
}

#[test]
fn zero_grounding_splits_betti_numbers() {
    for seed in 0..5 {
        let (s, _) = fixtures::compatible_grounding(seed).unwrap();
        let g = GroundingMorphism::zero(&s, 2, GroundingMode::VertexLevel);
        let r = verify_long_exact_sequence(&s, &g, TargetSheaf::Constant).unwrap();
        assert_eq!(r.status, CheckStatus::Pass);
        for (&n, &c) in &r.betti_cone {
            // cone degree n carries H^{n+1}(F) and H^n(W)
            let f = r.betti_source.get(&(n + 1)).copied().unwrap_or(0);
            let w = r.betti_target.get(&n).copied().unwrap_or(0);
            assert_eq!(c, f + w, "seed {seed}, degree {n}");
        }
    }
}

#[test]
fn block_decomposition_asserts_only_when_uncoupled() {
    let trivial = sheaf::trivial_bundle(8, 1).unwrap();
    let g = GroundingMorphism::full_rank_c1(&trivial);
    let r = block_decomposition(&trivial, &g).unwrap();
    assert!(r.asserted);
    assert_eq!(r.holds, Some(true));
    assert!(r.compressed_distance.unwrap() < 1e-8 && r.total_distance.unwrap() < 1e-8);

    let cx = CliqueComplex::from_graph(&Graph::complete(4).unwrap());
    let k4 = sheaf::CellSheaf::constant(cx, 1);
    let r = block_decomposition(&k4, &GroundingMorphism::full_rank_c1(&k4)).unwrap();
    assert!(!r.asserted);
    assert!(r.coupling_norm > 1e-10);
    assert_eq!(r.holds, None);
}

#[test]
fn cone_reduction_bound_on_commuting_fixtures() {
    for seed in 0..20 {
        let (a, b) = fixtures::commuting_pair(seed, 6);
        let r = verify_cone_reduction(&a, &b).unwrap();
        assert_eq!(r.status, CheckStatus::Pass, "seed {seed}: {r:?}");
        assert_eq!(r.within_v_bound, Some(true));
        assert_ne!(r.within_theta_bound, Some(false));
    }
}

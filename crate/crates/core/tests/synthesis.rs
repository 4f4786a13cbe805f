mod common;

use std::sync::Arc;

use cantor_coarse::metric::{capacity, FiniteMetricSpace};
use cantor_coarse::multimap::MultiMap;
use cantor_coarse::rational::{int, parse_grid, pow2};
use cantor_coarse::synthesis::*;
use cantor_coarse::tower::{GroupChain, ScalingFunction, Tower};
use num_bigint::BigUint;

fn n(v: u64) -> BigUint {
    BigUint::from(v)
}

#[test]
fn bicube_capacities_are_powers_of_two() {
    let x = FiniteMetricSpace::bicube(-3, 3).unwrap();
    for k in -3..=3 {
        for l in k..=3 {
            let expect = n(1u64 << (l - k));
            assert_eq!(capacity(&x, &pow2(k), &pow2(l)).unwrap(), (expect.clone(), expect));
        }
    }
}

#[test]
fn bi_synthesis_symmetric_window() {
    let x = FiniteMetricSpace::bicube(-3, 3).unwrap();
    let g = parse_grid("dyadic:-3..3").unwrap();
    let s = synthesize_bi(&x, &g, None, 100_000).unwrap();
    assert!(s.certificate.bi_equivalence);
    assert!(s.ends.small_end && s.ends.large_end);
    assert!(s.schedule_audit.pass);
    assert!(s.schedule_audit.checks.iter().any(|c| c.relation.starts_with("θ")));
    assert!(s.surjections.iter().all(|a| a.max_preimage <= a.min_target_children));
    assert!(s.transport.pass && s.transport.checked > 0);
    assert!(s.map_flags.unwrap().immersion);
}

#[test]
fn bi_synthesis_on_random_ultrametric_tower() {
    let t = Tower::homogeneous(Tower::integer_labels(4), &[n(3), n(2), n(2)], usize::MAX).unwrap();
    let (x, _) = t.boundary(&ScalingFunction::dyadic(4)).unwrap();
    let g = parse_grid("dyadic:0..3").unwrap();
    let s = synthesize_bi(&x, &g, None, 100_000).unwrap();
    assert!(s.schedule_audit.pass);
    assert!(s.certificate.total && s.certificate.surjective);
    assert!(s.ends.large_end);
}

#[test]
fn two_space_micro_pipeline() {
    let x = FiniteMetricSpace::bicube(-2, 1).unwrap();
    let y = FiniteMetricSpace::bicube(-1, 2).unwrap();
    let (gx, gy) = (parse_grid("dyadic:-2..1").unwrap(), parse_grid("dyadic:-1..2").unwrap());
    let sched = build_two_space_schedule(&x, &gx, &y, &gy, None).unwrap();
    assert!(audit_schedule(&x, &sched, Some(&y)).unwrap().pass);
    let s = synthesize_two_space(&x, &gx, &y, &gy, None).unwrap();
    assert!(s.certificate.total && s.certificate.surjective);
    assert_eq!(s.schedule.lambdas.len(), 4);
    assert!(s.ends.small_end && s.ends.large_end, "{:?}", s.certificate);
    // Y's window sits one factor of two above X's, so only the inverse flags are grid-comparable.
    assert!(s.certificate.inverse.micro && s.certificate.inverse.macro_);
}

#[test]
fn macro_depth_zero_collapses() {
    let x = FiniteMetricSpace::bicube(-2, 2).unwrap();
    let g = parse_grid("dyadic:-2..2").unwrap();
    let s = synthesize_macro(&x, &g, 0, 100_000).unwrap();
    assert_eq!(s.relation.target().len(), 1);
    assert!(s.certificate.macro_equivalence);
    let err = synthesize_macro(&x, &g, 1, 100_000).unwrap_err();
    assert!(err.to_string().contains("[schedule]") && err.to_string().contains("k = 1"), "{err}");
}

#[test]
fn characterization_examples() {
    let line = FiniteMetricSpace::line_from_coords(&(0..=6).map(int).collect::<Vec<_>>()).unwrap();
    let v = characterization_check(&line, &parse_grid("dyadic:0..3").unwrap(), Mode::Macro).unwrap();
    assert!(!v.pass);
    let (fx, reference) = discrete_factor_fixture(-2, 3, 2).unwrap();
    let g = parse_grid("dyadic:-2..2").unwrap();
    assert!(characterization_check(&fx, &g, Mode::Micro).unwrap().pass);
    assert!(characterization_check(&fx, &g, Mode::Macro).unwrap().pass);
    // The window passes; only the reference verdict records the failure.
    assert!(characterization_check(&fx, &g, Mode::Bi).unwrap().window_relative);
    assert!(reference.micro && reference.macro_ && !reference.bi);
}

#[test]
fn universality_receiving_degrees() {
    let t = Tower::homogeneous(Tower::integer_labels(3), &[n(3), n(2)], usize::MAX).unwrap();
    let (x, _) = t.boundary(&ScalingFunction::new(vec![int(1), int(2), int(4)]).unwrap()).unwrap();
    let u = universality_embed(&x, &parse_grid("dyadic:0..2").unwrap(), 100_000).unwrap();
    assert_eq!(u.receiving_degrees, vec![n(3), n(2)]);
    assert!(u.flags.embedding);
    let line = FiniteMetricSpace::line_from_coords(&(0..4).map(int).collect::<Vec<_>>()).unwrap();
    let u = universality_embed(&line, &parse_grid("dyadic:-1..1").unwrap(), 100_000).unwrap();
    assert_eq!(u.receiving_degrees, vec![n(4), n(2)]);
    assert!(u.relation.is_total());
}

#[test]
fn chain_space_profiles_and_transport() {
    let c = GroupChain::from_u64(&[1, 2, 6]).unwrap();
    let x = chain_space(&c).unwrap();
    assert!(x.homogeneous());
    let g = parse_grid("dyadic:1..2").unwrap();
    assert_eq!(f_invariant(ProfileInput::Space(&x, &g)).unwrap().to_string(), "{2:≥1, 3:≥1}");
    let s = synthesize_macro(&x, &parse_grid("dyadic:0..2").unwrap(), 0, 100).unwrap();
    assert!(s.transport.pass);
}

#[test]
fn classification_paths() {
    let a = GroupChain::from_u64(&[1, 2, 6]).unwrap();
    match classify_pair(ProfileInput::Chain(&a), ProfileInput::Chain(&a), 100).unwrap() {
        ClassifyVerdict::Equivalent { flags, map, .. } => {
            assert!(flags.isomorphism);
            assert!(map.node_map.iter().all(|row| row.iter().enumerate().all(|(i, y)| y.index == i)));
        }
        other => panic!("{other:?}"),
    }
    let non_homogeneous = FiniteMetricSpace::line_from_coords(&[int(0), int(1), int(3)]).unwrap();
    let g = parse_grid("dyadic:0..1").unwrap();
    let err = classify_pair(ProfileInput::Space(&non_homogeneous, &g), ProfileInput::Chain(&a), 100).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let single = FiniteMetricSpace::bicube(0, 0).unwrap();
    let tiny = parse_grid("1/4,1/2").unwrap();
    assert!(f_invariant(ProfileInput::Space(&single, &tiny)).unwrap().exponents.is_empty());
}

#[test]
fn relation_round_trip_preserves_partitions() {
    let x = FiniteMetricSpace::bicube(-1, 2).unwrap();
    let g = parse_grid("dyadic:-1..2").unwrap();
    let s = synthesize_bi(&x, &g, None, 100_000).unwrap();
    let text = cantor_coarse::multimap::relation_to_json(&s.relation);
    let back = cantor_coarse::multimap::relation_from_json(&text).unwrap();
    assert_eq!(back, s.relation);
    let id = MultiMap::identity(Arc::new(x.clone()));
    assert!(uniformity_certificate_ok(&id, &g));
}

fn uniformity_certificate_ok(phi: &MultiMap, g: &[cantor_coarse::rational::Rational]) -> bool {
    cantor_coarse::multimap::uniformity_certificate(phi, g).unwrap().bi_equivalence
}

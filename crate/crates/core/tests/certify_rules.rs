use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use segre_witness::certify::*;
use segre_witness::shape::SegreShape;
use segre_witness::survey::enumerate_shapes;

fn shape(d: &[i64]) -> SegreShape {
    SegreShape::canonicalize(d).unwrap()
}

fn bound_of(report: &BoundReport, rule: Rule) -> BigInt {
    report
        .rule(rule)
        .unwrap_or_else(|| panic!("{rule} missing"))
        .bound
        .clone()
}

#[test]
fn cub_equals_trex_on_cubes() {
    for a in 4..=10i64 {
        let s = shape(&[a, a, a]);
        let b = best_bound(&s, &[]);
        let cub = b.rule(Rule::Cub).unwrap();
        let trex = b.rule(Rule::Trex).unwrap();
        assert_eq!(cub.value, trex.value, "a = {a}");
        assert_eq!(cub.bound, trex.bound);
    }
}

#[test]
fn bound_rule_hypotheses() {
    let names = |d: &[i64]| -> Vec<Rule> {
        closed_form_bounds(&shape(d))
            .into_iter()
            .map(|b| b.rule)
            .collect()
    };
    assert!(!names(&[1; 11]).contains(&Rule::Manyp1));
    assert!(names(&[1; 12]).contains(&Rule::Manyp1));
    assert!(!names(&[2; 5]).contains(&Rule::Manyp2));
    assert!(!names(&[3; 4]).contains(&Rule::Manyp3));
    assert!(!names(&[2, 3, 3]).contains(&Rule::Trex));
    assert!(!names(&[4, 4, 5]).contains(&Rule::Cub));
    assert!(names(&[4, 4, 5]).contains(&Rule::Trex));
}

#[test]
fn closed_forms_by_hand() {
    let b = best_bound(&SegreShape::power(1, 13).unwrap(), &[]);
    // (8192 - 2) / 14
    assert_eq!(bound_of(&b, Rule::Manyp1), BigInt::from(585));
    let b = best_bound(&SegreShape::power(4, 4).unwrap(), &[]);
    // (625 - 13 * 25) / 17
    assert_eq!(bound_of(&b, Rule::Cub), BigInt::from(17));
    let b = best_bound(&shape(&[3, 4, 10]), &[]);
    // 4 * 5 * 11 / 18 - 11
    assert_eq!(bound_of(&b, Rule::Trex), BigInt::from(1));
}

#[test]
fn theorgen_takes_best_ordering() {
    // Sorted order gives 96 - (1+1+1+1) * (2 * 2 * 6) = 0; putting 5 and a 1
    // first gives 96 - (5+1+1+1) * 8 = 32.
    let s = shape(&[1, 1, 1, 1, 5]);
    let b = best_bound(&s, &[]);
    let v = &b.rule(Rule::Theorgen).unwrap().value;
    assert_eq!(v.to_string(), "16/5");
}

#[test]
fn engine_tracks_manyp1_from_twelve_lines() {
    let base =
        Certificate::assumed_base(SegreShape::power(1, 12).unwrap(), 4094, 315, "(1)^12").unwrap();
    let mut engine = CertificateEngine::new(vec![base]);
    let b = best_bound_with(&SegreShape::power(1, 13).unwrap(), &mut engine);
    assert_eq!(b.engine_bound, 584);
    for n in 13..=20 {
        let s = SegreShape::power(1, n).unwrap();
        let b = best_bound_with(&s, &mut engine);
        let closed = bound_of(&b, Rule::Manyp1);
        let engine_k = BigInt::from(b.engine_bound);
        assert!(&engine_k + 1 >= closed && engine_k <= closed, "n = {n}");
        b.engine.unwrap().verify().unwrap();
    }
}

#[test]
fn engine_tracks_manyp2_from_six_planes() {
    let base =
        Certificate::assumed_base(SegreShape::power(2, 6).unwrap(), 727, 56, "(2)^6").unwrap();
    let mut engine = CertificateEngine::new(vec![base]);
    for n in 7..=12 {
        let s = SegreShape::power(2, n).unwrap();
        let b = best_bound_with(&s, &mut engine);
        assert!(
            BigInt::from(b.engine_bound) + 2 >= bound_of(&b, Rule::Manyp2),
            "n = {n}"
        );
    }
}

#[test]
fn engine_uses_three_factor_bases() {
    let b = best_bound(&shape(&[3, 3, 3, 3]), &[]);
    let cert = b.engine.unwrap();
    assert_eq!((cert.r, cert.k), (223, 8));
    assert_eq!(b.max_rule, Some(Rule::Engine));
    cert.verify().unwrap();
}

#[test]
fn table_takes_precedence_on_every_row() {
    let rows: Vec<(Vec<i64>, u64)> = vec![
        (vec![2, 3, 3], 5),
        (vec![2, 2, 2], 4),
        (vec![2, 4, 4], 7),
        (vec![2, 6, 6], 10),
        (vec![1, 1, 1, 1], 3),
        (vec![1, 1, 2, 2], 5),
        (vec![1, 1, 5, 5], 11),
        (vec![3, 3, 3], 6),
        (vec![2, 5, 5], 8),
        (vec![1, 1, 1, 1, 1], 5),
    ];
    for (d, k) in rows {
        let v = classify(&shape(&d), k);
        assert_eq!(
            (v.status, v.rule),
            (Status::NotIdentifiable, Rule::ExceptionsTable),
            "{d:?}"
        );
    }
    let v = classify(&shape(&[2, 5, 5]), 8);
    assert_eq!(
        v.witness,
        Some(Witness::Decompositions {
            decompositions: DecompositionWitness::Finite {
                at_least: 6,
                at_most: None
            }
        })
    );
    let v = classify(&shape(&[3, 3, 3]), 6);
    assert_eq!(
        v.witness,
        Some(Witness::Decompositions {
            decompositions: DecompositionWitness::Exactly {
                count: BigUint::from(2u32)
            }
        })
    );
}

#[test]
fn downward_closed_up_to_size_100() {
    for s in enumerate_shapes(100).unwrap() {
        let top: u64 = s.critical_rank().ceil().try_into().unwrap();
        for k in 2..=top + 1 {
            if classify(&s, k).status == Status::Identifiable {
                assert_eq!(
                    classify(&s, k - 1).status,
                    Status::Identifiable,
                    "{s} k={k}"
                );
            }
        }
    }
}

#[test]
fn not_identifiable_reasons_are_restricted() {
    for s in enumerate_shapes(100).unwrap() {
        let top: u64 = s.critical_rank().ceil().try_into().unwrap();
        for k in 1..=top + 1 {
            let v = classify(&s, k);
            if v.status == Status::NotIdentifiable {
                assert!(matches!(
                    v.rule,
                    Rule::ExceptionsTable | Rule::UnbalancedCorollary | Rule::BeyondCriticalRank
                ));
            }
        }
    }
}

#[test]
fn short_shapes_are_unsupported() {
    let v = classify(&shape(&[2, 3]), 2);
    assert_eq!(
        (v.status, v.rule),
        (Status::Unknown, Rule::UnsupportedShape)
    );
    let v = classify(&shape(&[2, 3]), 3);
    assert_eq!(v.rule, Rule::BeyondCriticalRank);
}

#[test]
fn unknown_is_left_for_numeric_escalation() {
    let v = classify(&shape(&[2, 3, 3]), 4);
    assert_eq!((v.status, v.rule), (Status::Unknown, Rule::NoRule));
}

#[test]
fn extend_names_the_violated_inequality() {
    let base =
        Certificate::assumed_base(SegreShape::power(1, 12).unwrap(), 4094, 315, "t").unwrap();
    let err = extend_certificate(&base, 1).unwrap_err().to_string();
    assert!(err.contains("(n+m+1) k"), "{err}");
}

fn any_shape() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(1i64..=12, 3..=6)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn regimes_partition_shapes(d in any_shape()) {
        let s = shape(&d);
        let p = unbalanced_profile(&s).unwrap();
        let t = p.threshold();
        let a = u64::from(p.tail);
        let flags = [a < t, a == t, a > t];
        prop_assert_eq!(flags.iter().filter(|&&f| f).count(), 1);
        let expected = if flags[0] { Regime::Balanced } else if flags[1] { Regime::Boundary } else { Regime::Unbalanced };
        prop_assert_eq!(p.regime, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn verdicts_round_trip_through_json(d in any_shape(), k in 1u64..40) {
        let v = classify(&shape(&d), k);
        let text = serde_json::to_string(&v).unwrap();
        prop_assert_eq!(serde_json::from_str::<Verdict>(&text).unwrap(), v);
    }

    #[test]
    fn engine_certificates_replay(d in prop::collection::vec(3i64..=6, 3..=5)) {
        let b = best_bound(&shape(&d), &[]);
        if let Some(cert) = b.engine {
            cert.verify().unwrap();
            let text = serde_json::to_string(&cert).unwrap();
            let back: Certificate = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &cert);
            back.verify().unwrap();
        }
    }
}

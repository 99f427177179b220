use std::collections::HashMap;

use nci_lab::algebra::{
    apply, check_semigroup, domain_set, sample_fusion, Axiom, OperatorKind, SymbolicSample, Trials,
};
use nci_lab::divergence::{
    exact_h_divergence, haussler_epsilon, haussler_sample_complexity, target_risk_bound,
    BoundInputs, HypothesisFamily,
};
use nci_lab::synth::{generate, verify_orthogonality, DatasetConfig, DomainSpec};
use proptest::prelude::*;

fn dataset_config() -> impl Strategy<Value = DatasetConfig> {
    (
        any::<u64>(),
        1usize..6,
        2usize..5,
        20usize..200,
        0.2f64..0.8,
        prop::collection::vec((0.0f64..2.0, 0.0f64..3.0, 1usize..4, 0.0f64..1.0), 1..4),
    )
        .prop_map(
            |(seed, concept_dim, num_classes, num_supports, shared, domains)| {
                let unique = (1.0 - shared) / (domains.len() as f64 + 1.0);
                DatasetConfig {
                    seed,
                    concept_dim,
                    num_classes,
                    num_supports,
                    domains: domains
                        .into_iter()
                        .enumerate()
                        .map(|(i, (cn, leak, bd, bn))| {
                            DomainSpec::new(format!("d{i}"), cn, leak, bd, bn)
                        })
                        .collect(),
                    shared_fraction: shared,
                    unique_fraction: unique,
                    samples_per_domain: None,
                    complementary: None,
                }
            },
        )
}

fn point_set(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..max)
}

fn bound_inputs() -> impl Strategy<Value = BoundInputs> {
    (
        0.0f64..1.0,
        1.0f64..200.0,
        1.0f64..1e5,
        1e-4f64..0.5,
        0.0f64..0.5,
        0.0f64..2.0,
    )
        .prop_map(|(r_s, d, extra, delta, beta, d_hat)| BoundInputs {
            r_s,
            n: d.round() + extra.round() + 1.0,
            d: d.round(),
            delta,
            beta,
            d_hat,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blocks_are_disjoint_and_labels_follow_supports(config in dataset_config()) {
        let ds = generate(&config).unwrap();
        prop_assert!(verify_orthogonality(&ds));
        let mut labels: HashMap<u64, usize> = HashMap::new();
        for s in &ds.samples {
            let seen = *labels.entry(s.support_id).or_insert(s.label);
            prop_assert_eq!(seen, s.label, "support {} has two labels", s.support_id);
        }
    }

    #[test]
    fn divergence_lies_in_range_and_grows_with_capacity(source in point_set(30), target in point_set(30), split in 1usize..10) {
        let full = HypothesisFamily::from_data(&[&source, &target]).unwrap();
        let d_full = exact_h_divergence(&source, &target, &full).unwrap().d_hat;
        prop_assert!((0.0..=2.0).contains(&d_full), "{}", d_full);
        // a flip-closed sub-family sees at most the same separation
        let keep: Vec<_> = full
            .hypotheses
            .chunks(2)
            .enumerate()
            .filter(|(i, _)| i % split == 0)
            .flat_map(|(_, pair)| pair.iter().copied())
            .collect();
        let small = HypothesisFamily::new(keep);
        prop_assume!(small.is_flip_closed() && !small.is_empty());
        let d_small = exact_h_divergence(&source, &target, &small).unwrap().d_hat;
        prop_assert!((0.0..=2.0).contains(&d_small));
        prop_assert!(d_small <= d_full);
    }

    #[test]
    fn bound_is_monotone_in_its_inputs(b in bound_inputs(), bump in 0.01f64..1.0) {
        let base = target_risk_bound(&b).unwrap();
        let zero = target_risk_bound(&BoundInputs { d_hat: 0.0, ..b }).unwrap();
        prop_assert_eq!(base, zero + b.d_hat);
        let at = |b: BoundInputs| target_risk_bound(&b).unwrap();
        let more_divergence = at(BoundInputs { d_hat: b.d_hat + bump, ..b });
        prop_assert!(more_divergence > base);
        let more_risk = at(BoundInputs { r_s: b.r_s + bump, ..b });
        let more_beta = at(BoundInputs { beta: b.beta + bump, ..b });
        let more_samples = at(BoundInputs { n: b.n * 2.0, ..b });
        let less_delta = at(BoundInputs { delta: b.delta / 2.0, ..b });
        prop_assert!(more_risk >= base && more_beta >= base);
        prop_assert!(more_samples <= base);
        prop_assert!(less_delta >= base);
    }

    #[test]
    fn haussler_count_is_the_smallest_sufficient(t in 1u64..1_000_000, delta in 1e-4f64..0.9, eps in 1e-3f64..0.9) {
        let m = haussler_sample_complexity(t, delta, eps).unwrap();
        prop_assert!(haussler_epsilon(t, delta, m).unwrap() <= eps * (1.0 + 1e-12));
        if m > 1 {
            prop_assert!(haussler_epsilon(t, delta, m - 1).unwrap() > eps * (1.0 - 1e-12));
        }
    }

    #[test]
    fn commutative_operator_is_a_commutative_semigroup(n in 1usize..8, i in 0usize..8, j in 0usize..8, k in 0usize..8) {
        let set = domain_set(n, 2, 2);
        let (a, b, c) = (&set[i % set.len()], &set[j % set.len()], &set[k % set.len()]);
        let op = OperatorKind::Commutative;
        prop_assert_eq!(apply(op, a, b), apply(op, b, a));
        prop_assert_eq!(apply(op, &apply(op, a, b), c), apply(op, a, &apply(op, b, c)));
        prop_assert!(set.contains(&apply(op, a, b)));
        let ri = OperatorKind::RightInvariant;
        prop_assert_eq!(apply(ri, &apply(ri, a, b), c), apply(ri, a, &apply(ri, b, c)));
    }

    #[test]
    fn random_semigroup_reports_agree(n in 2usize..8, seed in any::<u64>()) {
        let set = domain_set(n, 2, 1);
        let r = check_semigroup(OperatorKind::Commutative, &set, Trials::Random { count: 50, seed }).unwrap();
        prop_assert!(r.all_passed());
        let r = check_semigroup(OperatorKind::RightInvariant, &set, Trials::Exhaustive).unwrap();
        prop_assert!(!r.check(Axiom::Commutativity).passed());
        prop_assert!(r.check(Axiom::Associativity).passed());
    }

    #[test]
    fn fusion_yields_source_plus_target_samples(ms in 0usize..40, mt in 1usize..40) {
        let sample = |support, domain: &str, component| SymbolicSample { support, domain: domain.into(), component };
        let sources: Vec<_> = (0..ms).map(|i| sample(i, "s", i)).collect();
        let targets: Vec<_> = (0..mt).map(|i| sample(1000 + i, "t", i)).collect();
        let fused = sample_fusion(&sources, &targets).unwrap();
        prop_assert_eq!(fused.len(), ms + mt);
        prop_assert!(fused.iter().all(|x| x.domain == "t" && x.component < mt));
        let mut concepts: Vec<usize> = fused.iter().map(|x| x.support).collect();
        concepts.sort_unstable();
        let mut expected: Vec<usize> = (0..ms).chain(1000..1000 + mt).collect();
        expected.sort_unstable();
        prop_assert_eq!(concepts, expected);
    }
}

//! Power iteration and cavity message passing checked against dense
//! diagonalization.

mod common;

use cavity_eigen::cavity::{self, BisectionOptions, FixedPoint, RecoveryOptions};
use cavity_eigen::ensemble::{generate_instance, sample_degree_sequence};
use cavity_eigen::oracle::{power_iterate, PowerIterationOptions};
use cavity_eigen::{CouplingLaw, DegreeDistribution, SparseSymmetricInstance};
use common::{cosine, dense_spectrum, dense_top_eigenpair, random_recursive_tree};
use proptest::prelude::*;

fn tight() -> PowerIterationOptions {
    PowerIterationOptions {
        tol: 1e-12,
        max_iter: 2_000_000,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_iteration_matches_dense_eigenvalue(seed in 0u64..1_000, delta in 0.0f64..1.0) {
        let p = DegreeDistribution::mixture(&[(3, 0.5), (4, 0.5)]).unwrap();
        let law = CouplingLaw::binary(delta, 1.0).unwrap();
        let degrees = sample_degree_sequence(&p, 40, seed).unwrap();
        let g = generate_instance(&degrees, &law, seed).unwrap();
        let spectrum = dense_spectrum(&g);
        // A near-degenerate top pair makes the vector ill-defined; the value is not.
        let s = power_iterate(&g, &tight(), seed).unwrap();
        prop_assert!((s.lambda - spectrum[0]).abs() < 1e-8, "{} vs {}", s.lambda, spectrum[0]);
        let norm: f64 = s.v.iter().map(|x| x * x).sum();
        prop_assert!((norm - 40.0).abs() < 1e-9);
        if spectrum[0] - spectrum[1] > 1e-3 {
            let (_, v) = dense_top_eigenpair(&g);
            prop_assert!(cosine(&s.v, &v) > 1.0 - 1e-8);
        }
    }

    #[test]
    fn cavity_is_exact_on_trees(
        n in 2usize..40,
        picks in prop::collection::vec(0usize..1_000, 40),
        weights in prop::collection::vec(prop_oneof![-2.0f64..-0.1, 0.1f64..2.0], 40),
        seed in 0u64..100,
    ) {
        let g = random_recursive_tree(n, &weights, &picks);
        let (lambda, v) = dense_top_eigenpair(&g);
        let opts = BisectionOptions { tol: 1e-12, ..Default::default() };
        let s = cavity::solve(&g, &opts, &RecoveryOptions::default(), seed).unwrap();
        prop_assert!((s.lambda - lambda).abs() < 1e-9, "{} vs {}", s.lambda, lambda);
        prop_assert!(s.eigenvector.exact);
        prop_assert!(cosine(&s.eigenvector.v, &v) > 1.0 - 1e-8);
    }

    #[test]
    fn positivity_is_monotone_in_lambda(seed in 0u64..200) {
        let law = CouplingLaw::binary(0.5, 1.0).unwrap();
        let g = generate_instance(&[3; 30], &law, seed).unwrap();
        let mut seen_positive = false;
        for step in 0..60 {
            let lambda = 1.5 + 0.05 * step as f64;
            let positive = cavity::positive_fixed_point(&g, lambda, 1e-12, 5_000).is_positive();
            prop_assert!(!(seen_positive && !positive), "lost positivity at {lambda}");
            seen_positive |= positive;
        }
        prop_assert!(seen_positive);
    }
}

#[test]
fn small_examples() {
    let path = SparseSymmetricInstance::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let star = SparseSymmetricInstance::from_edges(5, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)]).unwrap();
    for (g, expected) in [(&path, 2f64.sqrt()), (&star, 2.0)] {
        let (dense, _) = dense_top_eigenpair(g);
        assert!((dense - expected).abs() < 1e-12);
        let s = power_iterate(g, &tight(), 1).unwrap();
        assert!((s.lambda - expected).abs() < 1e-10);
        let t = cavity::bisect_eigenvalue(g, None, &BisectionOptions::default()).unwrap();
        assert!((t.estimate() - expected).abs() < 1e-9);
    }
}

#[test]
fn messages_only_read_their_own_subtree() {
    // Changing a coupling on one side of a tree edge leaves the message
    // flowing from the other side unchanged.
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)];
    let g = SparseSymmetricInstance::from_edges(5, &edges).unwrap();
    let mut changed = edges;
    changed[3].2 = 0.3;
    let h = SparseSymmetricInstance::from_edges(5, &changed).unwrap();
    let get = |g: &SparseSymmetricInstance| match cavity::positive_fixed_point(g, 3.0, 1e-14, 100) {
        FixedPoint::ConvergedPositive { messages, .. } => messages,
        other => panic!("{other:?}"),
    };
    let (mg, mh) = (get(&g), get(&h));
    assert_eq!(mg.get(&g, 1, 2), mh.get(&h, 1, 2));
    assert_ne!(mg.get(&g, 3, 2), mh.get(&h, 3, 2));
}

#[test]
fn sign_flip_of_the_start_vector_flips_the_eigenvector() {
    let law = CouplingLaw::binary(0.7, 1.0).unwrap();
    let g = generate_instance(&[4; 60], &law, 3).unwrap();
    let start: Vec<f64> = (0..60).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
    let neg: Vec<f64> = start.iter().map(|x| -x).collect();
    let a = cavity_eigen::oracle::power_iterate_from(&g, &start, &tight()).unwrap();
    let b = cavity_eigen::oracle::power_iterate_from(&g, &neg, &tight()).unwrap();
    assert!((a.lambda - b.lambda).abs() < 1e-12);
    for (x, y) in a.v.iter().zip(&b.v) {
        assert!((x + y).abs() < 1e-9);
    }
}

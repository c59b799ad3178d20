use std::collections::BTreeSet;

use ewra_core::distribution::{
    average_ranks_desc, normalize_distribution, ranks_from_distribution, validate_distribution, SUM_TOLERANCE,
};
use ewra_core::metrics::{jaccard, spearman, spearman_from_distributions};
use ewra_core::{CategoryDistribution, SubScope, Taxonomy, ValidationVerdict};
use proptest::prelude::*;

const VIE: [&str; 4] = ["Vulnerability", "Impact", "Emergency", "Others"];

fn vie(p: &[f64]) -> CategoryDistribution {
    CategoryDistribution::from_pairs(SubScope::Vie, VIE.iter().copied().zip(p.iter().copied()))
}

fn closed_form(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<f64>> {
    Just((1..=n).map(|i| i as f64).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn valid_verdicts_are_on_the_simplex(p in prop::collection::vec(0.0f64..1.0, 4)) {
        let d = vie(&p);
        if validate_distribution(&d, &Taxonomy::default()) == ValidationVerdict::Valid {
            prop_assert!((d.sum() - 1.0).abs() <= SUM_TOLERANCE);
        }
    }

    #[test]
    fn normalize_revalidates_and_is_idempotent(p in prop::collection::vec(0.0f64..1.0, 4)) {
        let d = vie(&p);
        prop_assume!(d.sum() > 1e-9);
        let n = normalize_distribution(&d).unwrap();
        prop_assert_eq!(validate_distribution(&n, &Taxonomy::default()), ValidationVerdict::Valid);
        let nn = normalize_distribution(&n).unwrap();
        for (a, b) in n.probabilities().iter().zip(nn.probabilities()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn ranks_sum_to_triangular_number(v in prop::collection::vec(prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 1.0]), 1..12)) {
        let n = v.len() as f64;
        let r = average_ranks_desc(&v);
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        prop_assert!(r.iter().all(|&x| (1.0..=n).contains(&x)));
    }

    #[test]
    fn spearman_matches_closed_form_on_permutations((x, y) in (3usize..15).prop_flat_map(|n| (permutation(n), permutation(n)))) {
        let rho = spearman(&x, &y).unwrap();
        prop_assert!(!rho.degenerate);
        // ranking a permutation reverses its order, identically for both sides
        prop_assert!((rho.rho - closed_form(&x, &y)).abs() <= 1e-12);
    }

    #[test]
    fn spearman_symmetric_and_reflexive(x in prop::collection::vec(0.0f64..1.0, 2..12), seed in any::<u64>()) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| ((seed >> (i % 60)) & 7) as f64 * 0.1 + v * 0.01).collect();
        let a = spearman(&x, &y).unwrap();
        let b = spearman(&y, &x).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((-1.0..=1.0).contains(&a.rho));
        let distinct: BTreeSet<u64> = x.iter().map(|v| v.to_bits()).collect();
        if distinct.len() > 1 {
            prop_assert!((spearman(&x, &x).unwrap().rho - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn positive_scaling_does_not_change_rank_correlation(
        p in prop::collection::vec(0.0f64..1.0, 4),
        g in prop::collection::vec(0.0f64..1.0, 4),
        k in 0.01f64..100.0,
    ) {
        let t = Taxonomy::default();
        let scaled: Vec<f64> = p.iter().map(|v| v * k).collect();
        let a = spearman_from_distributions(&vie(&p), &vie(&g), &t).unwrap();
        let b = spearman_from_distributions(&vie(&scaled), &vie(&g), &t).unwrap();
        prop_assert_eq!(ranks_from_distribution(&vie(&p)), ranks_from_distribution(&vie(&scaled)));
        prop_assert!((a.rho - b.rho).abs() < 1e-12);
    }

    #[test]
    fn jaccard_bounded_symmetric_reflexive(
        a in prop::collection::btree_set("[a-e]{1,2}", 0..8),
        b in prop::collection::btree_set("[a-e]{1,2}", 0..8),
    ) {
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, jaccard(&b, &a));
        prop_assert_eq!(jaccard(&a, &a), 1.0);
    }
}

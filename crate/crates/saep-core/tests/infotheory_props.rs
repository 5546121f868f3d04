//! Property tests for the information-theoretic measures, checked against
//! an independent oracle that computes entropies from explicit contingency
//! tables in the classic −Σ p·log2 p form (the library uses a sorted-count
//! formulation, so agreement is meaningful).

use std::collections::HashMap;

use proptest::prelude::*;
use saep_core::infotheory::{
    ensemble_disagreement, entropy, joint_entropy, mutual_information, normalized_mi,
    pairwise_disagreement, variation_of_info, PredictionMatrix,
};

const TOL: f64 = 1e-12;

fn oracle_entropy(xs: &[u32]) -> f64 {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &x in xs {
        *counts.entry(x).or_insert(0) += 1;
    }
    let m = xs.len() as f64;
    -counts
        .values()
        .map(|&n| {
            let p = n as f64 / m;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Mutual information straight from the joint distribution:
/// Σ p(u,v)·log2(p(u,v)/(p(u)p(v))).
fn oracle_mi(u: &[u32], v: &[u32]) -> f64 {
    let m = u.len() as f64;
    let mut joint: HashMap<(u32, u32), usize> = HashMap::new();
    let mut pu: HashMap<u32, usize> = HashMap::new();
    let mut pv: HashMap<u32, usize> = HashMap::new();
    for (&a, &b) in u.iter().zip(v) {
        *joint.entry((a, b)).or_insert(0) += 1;
        *pu.entry(a).or_insert(0) += 1;
        *pv.entry(b).or_insert(0) += 1;
    }
    let mut mi = 0.0;
    for (&(a, b), &n) in &joint {
        let p_ab = n as f64 / m;
        let p_a = pu[&a] as f64 / m;
        let p_b = pv[&b] as f64 / m;
        mi += p_ab * (p_ab / (p_a * p_b)).log2();
    }
    mi.max(0.0)
}

fn oracle_nmi(u: &[u32], v: &[u32]) -> f64 {
    let hu = oracle_entropy(u);
    let hv = oracle_entropy(v);
    if hu == 0.0 || hv == 0.0 {
        return 0.0;
    }
    (oracle_mi(u, v) / (hu * hv).sqrt()).clamp(0.0, 1.0)
}

fn oracle_vi(u: &[u32], v: &[u32]) -> f64 {
    let pairs: Vec<(u32, u32)> = u.iter().copied().zip(v.iter().copied()).collect();
    let mut joint: HashMap<(u32, u32), usize> = HashMap::new();
    for &p in &pairs {
        *joint.entry(p).or_insert(0) += 1;
    }
    let m = pairs.len() as f64;
    let huv = -joint
        .values()
        .map(|&n| {
            let p = n as f64 / m;
            p * p.log2()
        })
        .sum::<f64>();
    if huv == 0.0 {
        return 0.0;
    }
    (1.0 - oracle_mi(u, v) / huv).clamp(0.0, 1.0)
}

fn labels(max_value: u32, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..=max_value, len)
}

fn label_pair() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (2usize..40, 1u32..5).prop_flat_map(|(m, k)| {
        (
            prop::collection::vec(0..=k, m),
            prop::collection::vec(0..=k, m),
        )
    })
}

proptest! {
    #[test]
    fn entropy_matches_oracle(xs in labels(6, 1..50)) {
        let got = entropy(&xs);
        prop_assert!((got - oracle_entropy(&xs)).abs() <= TOL);
        prop_assert!(got >= 0.0);
    }

    #[test]
    fn joint_entropy_matches_oracle((u, v) in label_pair()) {
        let got = joint_entropy(&u, &v).unwrap();
        let pairs: Vec<u32> = u
            .iter()
            .zip(&v)
            .map(|(&a, &b)| a * 64 + b)
            .collect();
        prop_assert!((got - oracle_entropy(&pairs)).abs() <= TOL);
    }

    #[test]
    fn mutual_information_matches_oracle((u, v) in label_pair()) {
        let got = mutual_information(&u, &v).unwrap();
        prop_assert!((got - oracle_mi(&u, &v)).abs() <= TOL);
        prop_assert!(got >= 0.0);
        // Never exceeds either marginal entropy (up to rounding).
        prop_assert!(got <= entropy(&u).min(entropy(&v)) + 1e-9);
    }

    #[test]
    fn normalized_mi_matches_oracle_and_bounds((u, v) in label_pair()) {
        let got = normalized_mi(&u, &v).unwrap();
        prop_assert!((got - oracle_nmi(&u, &v)).abs() <= TOL);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn variation_of_info_matches_oracle_and_bounds((u, v) in label_pair()) {
        let got = variation_of_info(&u, &v).unwrap();
        prop_assert!((got - oracle_vi(&u, &v)).abs() <= TOL);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn symmetric_measures_are_bitwise_symmetric((u, v) in label_pair()) {
        let ab = mutual_information(&u, &v).unwrap();
        let ba = mutual_information(&v, &u).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        let ab = joint_entropy(&u, &v).unwrap();
        let ba = joint_entropy(&v, &u).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        let ab = variation_of_info(&u, &v).unwrap();
        let ba = variation_of_info(&v, &u).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        let ab = normalized_mi(&u, &v).unwrap();
        let ba = normalized_mi(&v, &u).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        let ab = pairwise_disagreement(&u, &v).unwrap();
        let ba = pairwise_disagreement(&v, &u).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
    }

    #[test]
    fn relabeling_leaves_measures_bitwise_unchanged(
        (u, v) in label_pair(),
        perm_seed in 0u64..1000,
    ) {
        // Apply an injective relabeling to u only: entropies and all
        // derived measures depend on the count multiset, not the codes.
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
        let mut codes: Vec<u32> = (0..10).collect();
        codes.shuffle(&mut rng);
        let relabeled: Vec<u32> = u.iter().map(|&x| codes[x as usize]).collect();

        prop_assert_eq!(entropy(&u).to_bits(), entropy(&relabeled).to_bits());
        let a = mutual_information(&u, &v).unwrap();
        let b = mutual_information(&relabeled, &v).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let a = normalized_mi(&u, &v).unwrap();
        let b = normalized_mi(&relabeled, &v).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let a = variation_of_info(&u, &v).unwrap();
        let b = variation_of_info(&relabeled, &v).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn pairwise_disagreement_is_mismatch_fraction((u, v) in label_pair()) {
        let got = pairwise_disagreement(&u, &v).unwrap();
        let mismatches = u.iter().zip(&v).filter(|(a, b)| a != b).count();
        prop_assert_eq!(got, mismatches as f64 / u.len() as f64);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn ensemble_disagreement_matches_pair_mean(
        rows in prop::collection::vec(prop::collection::vec(0u32..3, 12), 2..6),
    ) {
        let matrix = PredictionMatrix::new(
            rows.iter()
                .enumerate()
                .map(|(i, r)| (i as u32, r.clone()))
                .collect(),
        )
        .unwrap();
        let got = ensemble_disagreement(&matrix);
        prop_assert!(!got.degenerate);

        let n = rows.len();
        let mut sum = 0.0;
        let mut pairs = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += pairwise_disagreement(&rows[i], &rows[j]).unwrap();
                pairs += 1;
            }
        }
        prop_assert!((got.value - sum / pairs as f64).abs() <= TOL);
    }
}

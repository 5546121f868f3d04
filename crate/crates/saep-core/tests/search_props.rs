//! End-to-end invariants of the search loop on small synthetic problems.
//! Cases are kept few and networks tiny: each case trains real networks.

use proptest::prelude::*;
use saep_core::data::{make_synthetic, split_train_test, SyntheticKind};
use saep_core::nn::TrainConfig;
use saep_core::pruning::{CriterionConfig, CriterionKind, PiePolicy};
use saep_core::search::{run_search, SearchConfig};
use saep_core::WeightingMode;

fn tiny_config(kind: CriterionKind, master_seed: u64) -> SearchConfig {
    SearchConfig {
        iterations: 4,
        criterion: CriterionConfig {
            kind,
            ..CriterionConfig::default()
        },
        candidate_width: 4,
        train: TrainConfig {
            learning_rate: 0.05,
            steps: 50,
            batch_size: 32,
            ..TrainConfig::default()
        },
        master_seed,
        ..SearchConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Size accounting: every iteration adds exactly one member, minus one
    /// if it pruned. The none criterion therefore reaches exactly T.
    #[test]
    fn live_size_accounting_holds(
        kind_pick in 0usize..4,
        master_seed in 0u64..1000,
        mixture in prop::bool::ANY,
    ) {
        let kind = [
            CriterionKind::None,
            CriterionKind::Prs,
            CriterionKind::Pap,
            CriterionKind::Pie,
        ][kind_pick];
        let data = make_synthetic(SyntheticKind::Blobs, 120, 0.4, master_seed).unwrap();
        let (train, test) = split_train_test(&data, 0.25, 7).unwrap();
        let mut cfg = tiny_config(kind, master_seed);
        if mixture {
            cfg.weighting_mode = WeightingMode::Mixture;
        }
        let out = run_search(&train, &test, &cfg).unwrap();

        let mut expected = 0usize;
        for r in &out.history {
            expected += 1;
            if r.pruned_member.is_some() {
                expected -= 1;
            }
            prop_assert_eq!(r.live_size, expected, "iteration {}", r.t);
            prop_assert!((0.0..=1.0).contains(&r.test_accuracy));
            prop_assert!((0.0..=1.0).contains(&r.train_error));
            prop_assert!((0.0..=1.0).contains(&r.disagreement));
            if r.live_size < 2 {
                prop_assert!(r.disagreement_degenerate);
                prop_assert_eq!(r.disagreement, 0.0);
            }
        }
        prop_assert_eq!(out.ensemble.live_count(), expected);
        if kind == CriterionKind::None {
            prop_assert_eq!(expected, cfg.iterations);
        }

        // Criterion scores are populated whenever a real criterion saw two
        // or more live members (size before the prune step is live+1 when
        // a member was pruned).
        for r in &out.history {
            let size_at_decision = r.live_size + usize::from(r.pruned_member.is_some());
            if kind != CriterionKind::None && size_at_decision >= 2 {
                prop_assert_eq!(r.criterion_scores.len(), size_at_decision);
            } else {
                prop_assert!(r.criterion_scores.is_empty());
            }
        }
    }

    /// The recorded per-iteration objective of the accepted branch never
    /// exceeds the other branch's (when both survived training).
    #[test]
    fn accepted_objective_is_the_branch_minimum(master_seed in 0u64..1000) {
        let data = make_synthetic(SyntheticKind::Moons, 120, 0.2, master_seed).unwrap();
        let (train, test) = split_train_test(&data, 0.25, 3).unwrap();
        let cfg = tiny_config(CriterionKind::None, master_seed);
        let out = run_search(&train, &test, &cfg).unwrap();
        let mut prev_depth = 1;
        for r in &out.history {
            if let (Some(same), Some(deeper)) = (r.objective_same_depth, r.objective_deeper) {
                let accepted = if r.accepted_depth > prev_depth { deeper } else { same };
                prop_assert!(accepted <= same && accepted <= deeper);
            }
            prev_depth = r.accepted_depth;
        }
    }

    /// Pruned members never come back: the live id set only loses ids that
    /// were pruned and gains exactly the new member each iteration.
    #[test]
    fn pruned_members_stay_pruned(master_seed in 0u64..1000) {
        let data = make_synthetic(SyntheticKind::Blobs, 120, 0.5, master_seed).unwrap();
        let (train, test) = split_train_test(&data, 0.25, 11).unwrap();
        let mut cfg = tiny_config(CriterionKind::Prs, master_seed);
        cfg.criterion.prs_prune_prob = 0.8;
        cfg.iterations = 5;
        let out = run_search(&train, &test, &cfg).unwrap();
        let mut pruned_so_far = Vec::new();
        for r in &out.history {
            if let Some(j) = r.pruned_member {
                pruned_so_far.push(j);
            }
            for &p in &pruned_so_far {
                prop_assert!(!out.ensemble.is_live(p));
            }
        }
        prop_assert_eq!(
            out.ensemble.pruned_ids().len(),
            pruned_so_far.len()
        );
    }

    /// The always-prune entropy policy holds sizes at one or two members.
    #[test]
    fn always_prune_policy_caps_ensemble_size(master_seed in 0u64..1000) {
        let data = make_synthetic(SyntheticKind::Blobs, 120, 0.4, master_seed).unwrap();
        let (train, test) = split_train_test(&data, 0.25, 13).unwrap();
        let mut cfg = tiny_config(CriterionKind::Pie, master_seed);
        cfg.criterion.pie_policy = PiePolicy::Always;
        cfg.iterations = 5;
        let out = run_search(&train, &test, &cfg).unwrap();
        for r in &out.history {
            prop_assert!(r.live_size <= 2, "iteration {} size {}", r.t, r.live_size);
        }
    }
}

//! Property tests for ensemble prediction, weighting, objectives, and the
//! pruning criteria, built on small "table" networks whose outputs on a
//! one-hot probe batch are chosen freely — so every ensemble configuration
//! the properties quantify over is exactly constructible.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use saep_core::ensemble::{
    complexity_penalty, empirical_margin_error, ensemble_predict, error_without, g_values,
    ComplexityParams, EnsembleModel, MarginParams, SubArchitecture, WeightingMode,
};
use saep_core::nn::DenseNet;
use saep_core::pruning::{
    choose_prune, pap_loss, pie_pair_loss, CriterionConfig, CriterionKind, PiePolicy,
};
use saep_core::Dataset;

const TOL: f64 = 1e-12;

/// A net that outputs `logits[i]` for the i-th one-hot probe instance: the
/// hidden layer is the identity, the output weights hold the logit table.
fn table_net(m: usize, c: usize, logits: &[Vec<f64>]) -> DenseNet {
    let eye = Array2::from_shape_fn((m, m), |(i, j)| if i == j { 1.0 } else { 0.0 });
    let out = Array2::from_shape_fn((m, c), |(i, j)| logits[i][j]);
    DenseNet::from_params(
        vec![m, m, c],
        vec![eye, out],
        vec![Array1::zeros(m), Array1::zeros(c)],
    )
    .unwrap()
}

fn probe_features(m: usize) -> Array2<f64> {
    Array2::from_shape_fn((m, m), |(i, j)| if i == j { 1.0 } else { 0.0 })
}

/// A randomly generated ensemble scenario over a one-hot probe dataset.
#[derive(Debug, Clone)]
struct Scenario {
    m: usize,
    c: usize,
    /// member → instance → class logits
    logits: Vec<Vec<Vec<f64>>>,
    labels: Vec<u32>,
    /// `Some(raw)` for mixture weights (normalized before use), `None` for
    /// uniform weighting.
    raw_weights: Option<Vec<f64>>,
}

impl Scenario {
    fn build(&self) -> (EnsembleModel, Dataset) {
        let mode = if self.raw_weights.is_some() {
            WeightingMode::Mixture
        } else {
            WeightingMode::Uniform
        };
        let mut ens = EnsembleModel::new(mode);
        for (k, table) in self.logits.iter().enumerate() {
            let net = table_net(self.m, self.c, table);
            ens.append(SubArchitecture::new(k as u32, net, 0.0, 0.0), 0.5)
                .unwrap();
        }
        if let Some(raw) = &self.raw_weights {
            let sum: f64 = raw.iter().sum();
            let map: BTreeMap<u32, f64> = raw
                .iter()
                .enumerate()
                .map(|(k, &w)| (k as u32, w / sum))
                .collect();
            ens.set_live_weights(&map).unwrap();
        }
        let data = Dataset::new(
            probe_features(self.m),
            self.labels.clone(),
            self.c,
            "probe",
        )
        .unwrap();
        (ens, data)
    }
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (3usize..8, 2usize..4)
        .prop_flat_map(|(m, c)| {
            (
                Just(m),
                Just(c),
                2usize..6,
                prop::collection::vec(0..c as u32, m),
            )
        })
        .prop_flat_map(|(m, c, n, labels)| {
            let logits = prop::collection::vec(
                prop::collection::vec(prop::collection::vec(-5.0..5.0f64, c), m),
                n,
            );
            let weights = prop::option::of(prop::collection::vec(0.01..1.0f64, n));
            (Just(m), Just(c), logits, Just(labels), weights)
        })
        .prop_map(|(m, c, logits, labels, raw_weights)| Scenario {
            m,
            c,
            logits,
            labels,
            raw_weights,
        })
}

proptest! {
    /// The accuracy-delta score relates exactly to the error change from
    /// hypothetically removing a member: error_without − error = L_d/2.
    #[test]
    fn pap_identity_holds_for_every_live_member(sc in scenario()) {
        let (ens, data) = sc.build();
        let mp = MarginParams::default();
        let preds = ensemble_predict(&ens, data.features()).unwrap();
        let err_full =
            empirical_margin_error(&g_values(&preds, data.labels()).unwrap(), &mp).unwrap();
        for id in ens.live_ids() {
            let without = error_without(&ens, id, &data, &mp).unwrap();
            let ld = pap_loss(&ens, id, &data).unwrap();
            let residual = (without - err_full) - ld / 2.0;
            prop_assert!(residual.abs() <= TOL, "member {}: residual {}", id, residual);
        }
    }

    /// In uniform mode, actually pruning the member selected by the
    /// accuracy criterion never increases training error, because the
    /// criterion only fires on non-positive deltas and the post-prune
    /// weights equal the hypothetical-removal weights exactly.
    #[test]
    fn pap_prune_never_hurts_uniform_ensembles(mut sc in scenario()) {
        sc.raw_weights = None;
        let (mut ens, data) = sc.build();
        let mp = MarginParams::default();
        let cfg = CriterionConfig {
            kind: CriterionKind::Pap,
            ..CriterionConfig::default()
        };
        let preds = ensemble_predict(&ens, data.features()).unwrap();
        let before =
            empirical_margin_error(&g_values(&preds, data.labels()).unwrap(), &mp).unwrap();
        let decision = choose_prune(&ens, &data, &cfg).unwrap();
        if let Some(j) = decision.pruned_member {
            ens.prune(j).unwrap();
            let preds = ensemble_predict(&ens, data.features()).unwrap();
            let after =
                empirical_margin_error(&g_values(&preds, data.labels()).unwrap(), &mp).unwrap();
            prop_assert!(after <= before + TOL, "error rose {} -> {}", before, after);
        }
    }

    /// Live weights always form a simplex and pruned weights are exactly
    /// zero, across arbitrary append/prune interleavings.
    #[test]
    fn weights_stay_normalized_through_prunes(
        sc in scenario(),
        prune_picks in prop::collection::vec(0usize..6, 0..4),
    ) {
        let (mut ens, _) = sc.build();
        for pick in prune_picks {
            let live = ens.live_ids();
            if live.len() < 2 {
                break;
            }
            let id = live[pick % live.len()];
            ens.prune(id).unwrap();
        }
        let weights = ens.live_weights();
        let sum: f64 = weights.values().sum();
        prop_assert!((sum - 1.0).abs() <= TOL, "live sum {}", sum);
        prop_assert!(weights.values().all(|&w| w >= 0.0));
        for &id in ens.pruned_ids() {
            prop_assert_eq!(ens.weight_of(id).unwrap().to_bits(), 0.0f64.to_bits());
        }
    }

    /// Member storage order does not affect predictions: combination runs
    /// in ascending id order regardless of insertion order.
    #[test]
    fn predictions_ignore_insertion_order(mut sc in scenario()) {
        sc.raw_weights = None;
        let (forward, data) = sc.build();
        let mut reversed = EnsembleModel::new(WeightingMode::Uniform);
        for (k, table) in sc.logits.iter().enumerate().rev() {
            let net = table_net(sc.m, sc.c, table);
            reversed
                .append(SubArchitecture::new(k as u32, net, 0.0, 0.0), 0.5)
                .unwrap();
        }
        let a = ensemble_predict(&forward, data.features()).unwrap();
        let b = ensemble_predict(&reversed, data.features()).unwrap();
        prop_assert_eq!(a, b);
    }

    /// Γ is affine in (λ, β): Γ(λ, β) = λ·Γ(1, 0) + β·Γ(0, 1).
    #[test]
    fn penalty_is_affine_in_coefficients(
        sc in scenario(),
        lambda in 0.0..0.5f64,
        beta in 0.0..0.1f64,
    ) {
        let (ens, _) = sc.build();
        let full = complexity_penalty(&ens, &ComplexityParams { lambda, beta });
        let depth_part = complexity_penalty(&ens, &ComplexityParams { lambda: 1.0, beta: 0.0 });
        let count_part = complexity_penalty(&ens, &ComplexityParams { lambda: 0.0, beta: 1.0 });
        prop_assert!((full - (lambda * depth_part + beta * count_part)).abs() <= 1e-9);
        // Monotone in both coefficients.
        let bumped = complexity_penalty(
            &ens,
            &ComplexityParams { lambda: lambda + 0.1, beta },
        );
        prop_assert!(bumped >= full - TOL);
    }

    /// With ±1-valued margins, the empirical margin error is the same for
    /// every threshold in [−1, 1): it counts exactly the −1 entries.
    #[test]
    fn margin_error_is_threshold_invariant_for_sign_margins(
        signs in prop::collection::vec(prop::bool::ANY, 1..40),
        rho in -1.0..1.0f64,
    ) {
        let g: Vec<f64> = signs.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let base = empirical_margin_error(&g, &MarginParams { rho: 0.0 }).unwrap();
        let other = empirical_margin_error(&g, &MarginParams { rho }).unwrap();
        prop_assert_eq!(base.to_bits(), other.to_bits());
        let wrong = signs.iter().filter(|&&b| !b).count();
        prop_assert_eq!(base, wrong as f64 / signs.len() as f64);
    }

    /// Pairwise entropy losses live in [0, 1], are symmetric bit for bit,
    /// and are exactly zero for identical prediction vectors.
    #[test]
    fn pie_pair_loss_bounds_symmetry_zero(
        (u, v, y) in (4usize..30).prop_flat_map(|m| {
            (
                prop::collection::vec(0u32..4, m),
                prop::collection::vec(0u32..4, m),
                prop::collection::vec(0u32..4, m),
            )
        }),
        alpha in 0.0..=1.0f64,
    ) {
        let uv = pie_pair_loss(&u, &v, &y, alpha).unwrap();
        let vu = pie_pair_loss(&v, &u, &y, alpha).unwrap();
        prop_assert!((0.0..=1.0).contains(&uv), "out of bounds: {}", uv);
        prop_assert_eq!(uv.to_bits(), vu.to_bits());
        let uu = pie_pair_loss(&u, &u, &y, alpha).unwrap();
        prop_assert_eq!(uu.to_bits(), 0.0f64.to_bits());
    }

    /// No criterion ever selects the last live member.
    #[test]
    fn no_criterion_prunes_a_singleton(
        table in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 4),
        labels in prop::collection::vec(0u32..2, 4),
        kind_pick in 0usize..3,
        seed in 0u64..500,
        alpha in 0.0..=1.0f64,
    ) {
        let kind = [CriterionKind::Prs, CriterionKind::Pap, CriterionKind::Pie][kind_pick];
        let mut ens = EnsembleModel::new(WeightingMode::Uniform);
        ens.append(SubArchitecture::new(0, table_net(4, 2, &table), 0.0, 0.0), 1.0)
            .unwrap();
        let data = Dataset::new(probe_features(4), labels, 2, "probe").unwrap();
        let cfg = CriterionConfig {
            kind,
            alpha,
            prs_prune_prob: 1.0,
            pie_policy: PiePolicy::Always,
            pie_threshold_theta: 0.9,
            rng_seed: seed,
        };
        let decision = choose_prune(&ens, &data, &cfg).unwrap();
        prop_assert_eq!(decision.pruned_member, None);
        prop_assert!(decision.criterion_scores.is_empty());
    }
}

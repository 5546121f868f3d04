//! Pruning criteria: given the current ensemble, decide which member (if
//! any) to drop this iteration.
//!
//! Three interchangeable criteria are provided behind one entry point,
//! [`choose_prune`]:
//!
//! * **PRS** — pruning by random selection: a seeded Bernoulli gate decides
//!   whether to prune at all, then the member with the smallest uniform
//!   draw goes.
//! * **PAP** — pruning by accuracy performance: score each member by the
//!   mean change of the margin function g when that member is removed and
//!   its weight redistributed; prune the minimizer only when removal does
//!   not hurt (score ≤ 0).
//! * **PIE** — pruning by information entropy: score each member by the sum
//!   of pairwise losses combining prediction diversity (variation of
//!   information) against label relevance (normalized mutual information);
//!   prune the minimizer, optionally gated by a threshold relative to the
//!   mean score.
//!
//! All criteria iterate members in ascending id order and break ties toward
//! the oldest member, so decisions are deterministic.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::ensemble::{
    combine_probs, g_values, member_probs, weights_without, EnsembleModel,
};
use crate::error::{Error, Result};
use crate::infotheory::{normalized_mi, variation_of_info, PredictionMatrix};
use crate::nn::argmax_labels;

/// Which pruning criterion runs each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    /// Never prune (plain adaptive search baseline).
    None,
    /// Random selection behind a Bernoulli gate.
    Prs,
    /// Accuracy performance (margin change on removal).
    Pap,
    /// Information entropy (diversity/relevance pairwise losses).
    Pie,
}

impl CriterionKind {
    /// Short method tag used in reports and file names.
    pub fn tag(&self) -> &'static str {
        match self {
            CriterionKind::None => "adanet",
            CriterionKind::Prs => "prs",
            CriterionKind::Pap => "pap",
            CriterionKind::Pie => "pie",
        }
    }
}

/// When the information-entropy criterion actually prunes its minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PiePolicy {
    /// Prune the minimizer every iteration.
    Always,
    /// Prune only when the minimizer's score is below θ times the mean
    /// score over live members.
    Threshold,
}

/// Pruning-criterion parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CriterionConfig {
    pub kind: CriterionKind,
    /// Diversity/relevance trade-off of the pairwise entropy loss, in [0, 1].
    pub alpha: f64,
    /// Gate probability of the random criterion, in [0, 1].
    pub prs_prune_prob: f64,
    pub pie_policy: PiePolicy,
    /// Relative threshold θ of [`PiePolicy::Threshold`].
    pub pie_threshold_theta: f64,
    /// Seed of the criterion's private random stream.
    pub rng_seed: u64,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            kind: CriterionKind::None,
            alpha: 0.5,
            prs_prune_prob: 0.5,
            pie_policy: PiePolicy::Threshold,
            pie_threshold_theta: 0.9,
            rng_seed: 0,
        }
    }
}

impl CriterionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.prs_prune_prob) {
            return Err(Error::Config(format!(
                "prs_prune_prob must be in [0, 1], got {}",
                self.prs_prune_prob
            )));
        }
        if !(self.pie_threshold_theta.is_finite() && self.pie_threshold_theta > 0.0) {
            return Err(Error::Config(format!(
                "pie_threshold_theta must be finite and > 0, got {}",
                self.pie_threshold_theta
            )));
        }
        Ok(())
    }
}

/// Outcome of one [`choose_prune`] call.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PruneDecision {
    /// The member to prune, or `None` to keep the ensemble intact.
    pub pruned_member: Option<u32>,
    /// Per-member criterion scores (empty for the none criterion and for
    /// degenerate ensembles with fewer than two live members).
    pub criterion_scores: BTreeMap<u32, f64>,
    /// Human-readable explanation of the decision.
    pub reason: String,
}

impl PruneDecision {
    fn keep(reason: impl Into<String>) -> Self {
        Self {
            pruned_member: None,
            criterion_scores: BTreeMap::new(),
            reason: reason.into(),
        }
    }
}

/// Accuracy-performance loss of member `j`: the mean over instances of
/// `g(full ensemble) − g(ensemble without j)`, where g is ±1 for
/// correct/incorrect predictions. Negative values mean removing `j`
/// improves training accuracy; exactly ±2·(error change).
pub fn pap_loss(ens: &EnsembleModel, j: u32, data: &Dataset) -> Result<f64> {
    let parts = member_probs(ens, data.features())?;
    let full = argmax_labels(&combine_probs(&parts, &ens.live_weights()));
    let without = argmax_labels(&combine_probs(&parts, &weights_without(ens, j)?));
    let g_full = g_values(&full, data.labels())?;
    let g_without = g_values(&without, data.labels())?;
    let sum: f64 = g_full
        .iter()
        .zip(&g_without)
        .map(|(&a, &b)| a - b)
        .sum();
    Ok(sum / data.m() as f64)
}

/// Pairwise information-entropy loss between two members' prediction
/// vectors `u`, `v` against the labels `y`:
///
/// ```text
/// L_p = (1 − α)·VI(u, v) + α·(NMI(u, y) + NMI(v, y)) / 2
/// ```
///
/// Identical prediction vectors score exactly 0 regardless of α: the pair
/// is fully redundant, making either member the cheapest to drop.
pub fn pie_pair_loss(u: &[u32], v: &[u32], y: &[u32], alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    if u.len() != y.len() || v.len() != y.len() {
        return Err(Error::Argument(format!(
            "prediction/label lengths differ: {} / {} vs {}",
            u.len(),
            v.len(),
            y.len()
        )));
    }
    if u == v {
        return Ok(0.0);
    }
    let vi = variation_of_info(u, v)?;
    let relevance = (normalized_mi(u, y)? + normalized_mi(v, y)?) / 2.0;
    Ok((1.0 - alpha) * vi + alpha * relevance)
}

/// Total information-entropy loss of one member: the sum of
/// [`pie_pair_loss`] against every other member, in ascending id order.
pub fn pie_member_loss(
    matrix: &PredictionMatrix,
    y: &[u32],
    id: u32,
    alpha: f64,
) -> Result<f64> {
    let own = matrix
        .row(id)
        .ok_or_else(|| Error::Argument(format!("member {id} not in prediction matrix")))?;
    let mut sum = 0.0;
    for (other, row) in matrix.iter() {
        if other != id {
            sum += pie_pair_loss(own, row, y, alpha)?;
        }
    }
    Ok(sum)
}

/// Smallest-score member in an id-keyed map, ties toward the smaller id.
/// The map is ordered, so the first strict minimum wins.
fn argmin_score(scores: &BTreeMap<u32, f64>) -> Option<(u32, f64)> {
    let mut best: Option<(u32, f64)> = None;
    for (&id, &score) in scores {
        match best {
            Some((_, s)) if score >= s => {}
            _ => best = Some((id, score)),
        }
    }
    best
}

/// Runs the configured criterion once against the current ensemble and the
/// training data, returning which member (if any) to prune along with the
/// scores behind the decision. Never selects the last live member: with
/// fewer than two live members every criterion keeps the ensemble intact.
pub fn choose_prune(
    ens: &EnsembleModel,
    data: &Dataset,
    cfg: &CriterionConfig,
) -> Result<PruneDecision> {
    cfg.validate()?;
    if cfg.kind == CriterionKind::None {
        return Ok(PruneDecision::keep("criterion disabled"));
    }
    let live = ens.live_ids();
    if live.len() < 2 {
        return Ok(PruneDecision::keep("fewer than two live members"));
    }

    match cfg.kind {
        CriterionKind::None => unreachable!("handled above"),
        CriterionKind::Prs => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            let gate = rng.gen_bool(cfg.prs_prune_prob);
            let mut scores = BTreeMap::new();
            for &id in &live {
                scores.insert(id, rng.gen::<f64>());
            }
            if !gate {
                return Ok(PruneDecision {
                    pruned_member: None,
                    criterion_scores: scores,
                    reason: format!(
                        "random gate drew keep (prune probability {})",
                        cfg.prs_prune_prob
                    ),
                });
            }
            let (id, score) = argmin_score(&scores).expect("non-empty scores");
            Ok(PruneDecision {
                pruned_member: Some(id),
                criterion_scores: scores,
                reason: format!("random gate drew prune; member {id} had the smallest draw {score}"),
            })
        }
        CriterionKind::Pap => {
            let mut scores = BTreeMap::new();
            for &id in &live {
                scores.insert(id, pap_loss(ens, id, data)?);
            }
            let (id, score) = argmin_score(&scores).expect("non-empty scores");
            if score <= 0.0 {
                Ok(PruneDecision {
                    pruned_member: Some(id),
                    criterion_scores: scores,
                    reason: format!("accuracy delta {score} ≤ 0 for member {id}"),
                })
            } else {
                Ok(PruneDecision {
                    pruned_member: None,
                    criterion_scores: scores,
                    reason: format!("smallest accuracy delta {score} > 0 (member {id})"),
                })
            }
        }
        CriterionKind::Pie => {
            let parts = member_probs(ens, data.features())?;
            let rows: Vec<(u32, Vec<u32>)> = parts
                .iter()
                .map(|(id, probs)| (*id, argmax_labels(probs)))
                .collect();
            let matrix = PredictionMatrix::new(rows)?;
            let mut scores = BTreeMap::new();
            for &id in &live {
                scores.insert(id, pie_member_loss(&matrix, data.labels(), id, cfg.alpha)?);
            }
            let (id, score) = argmin_score(&scores).expect("non-empty scores");
            match cfg.pie_policy {
                PiePolicy::Always => Ok(PruneDecision {
                    pruned_member: Some(id),
                    criterion_scores: scores,
                    reason: format!("entropy loss {score} minimal for member {id} (policy: always)"),
                }),
                PiePolicy::Threshold => {
                    let mean: f64 = scores.values().sum::<f64>() / scores.len() as f64;
                    let cut = cfg.pie_threshold_theta * mean;
                    if score < cut {
                        Ok(PruneDecision {
                            pruned_member: Some(id),
                            criterion_scores: scores,
                            reason: format!(
                                "entropy loss {score} < {} × mean {mean} for member {id}",
                                cfg.pie_threshold_theta
                            ),
                        })
                    } else {
                        Ok(PruneDecision {
                            pruned_member: None,
                            criterion_scores: scores,
                            reason: format!(
                                "smallest entropy loss {score} ≥ {} × mean {mean} (member {id})",
                                cfg.pie_threshold_theta
                            ),
                        })
                    }
                }
            }
        }
    }
}

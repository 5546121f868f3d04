//! The iterative ensemble search: each iteration trains two candidate
//! networks — one at the current depth and one a layer deeper — accepts
//! whichever yields the lower ensemble objective, then offers the
//! configured pruning criterion one chance to drop a member.
//!
//! Every random choice flows from `master_seed` through tagged stream
//! derivation ([`crate::seed::derive`]), so a run is reproducible bit for
//! bit regardless of execution policy: the two candidate branches use
//! disjoint streams and can train serially or on separate threads with
//! identical results.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::data::Dataset;
use crate::ensemble::{
    combine_probs, empirical_margin_error, ensemble_predict, fit_mixture_weights, g_values,
    member_forward_all, stacked_input, ComplexityParams, EnsembleModel, MarginParams,
    SubArchitecture, WeightingMode,
};
use crate::error::{Error, Result};
use crate::infotheory::{ensemble_disagreement, PredictionMatrix};
use crate::nn::{argmax_labels, init_net, train, TrainConfig};
use crate::pruning::{choose_prune, CriterionConfig};
use crate::seed::{derive, role};

/// Candidate-branch tags for seed derivation.
const BRANCH_SAME_DEPTH: u64 = 0;
const BRANCH_DEEPER: u64 = 1;

/// Candidate mixture-weight grid step: weights 0.05, 0.10, …, 0.95 are
/// tried alongside the uniform share 1/(N+1).
const CANDIDATE_GRID_STEPS: usize = 19;

/// Whether the two candidate branches of an iteration train sequentially
/// or on separate threads. Results are identical either way; this is a
/// wall-clock knob only and deliberately not part of [`SearchConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecPolicy {
    Serial,
    Parallel,
}

/// Full search configuration. Serializes into run reports verbatim, so
/// everything influencing results lives here (and nothing else does).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SearchConfig {
    /// Number of iterations T; each adds one member and may prune one.
    pub iterations: usize,
    pub criterion: CriterionConfig,
    pub margin: MarginParams,
    pub complexity: ComplexityParams,
    pub weighting_mode: WeightingMode,
    /// Hidden-layer width of candidate networks.
    pub candidate_width: usize,
    pub train: TrainConfig,
    /// When set, each candidate's input is the raw features concatenated
    /// with the last-hidden outputs of the live members at its birth.
    pub feature_stacking: bool,
    /// Root of every random stream in the run.
    pub master_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 8,
            criterion: CriterionConfig::default(),
            margin: MarginParams::default(),
            complexity: ComplexityParams::default(),
            weighting_mode: WeightingMode::Uniform,
            candidate_width: 32,
            train: TrainConfig::default(),
            feature_stacking: false,
            master_seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.candidate_width == 0 {
            return Err(Error::Config("candidate_width must be >= 1".into()));
        }
        if self.train.steps == 0 {
            return Err(Error::Config("train steps must be >= 1".into()));
        }
        self.criterion.validate()?;
        self.margin.validate()?;
        self.complexity.validate()?;
        self.train.validate()
    }

    /// Short method tag: criterion tag plus a `.w` suffix for fitted
    /// mixture weights (e.g. `pie.w`).
    pub fn method_tag(&self) -> String {
        let suffix = match self.weighting_mode {
            WeightingMode::Uniform => "",
            WeightingMode::Mixture => ".w",
        };
        format!("{}{}", self.criterion.kind.tag(), suffix)
    }
}

/// Everything recorded about one search iteration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationRecord {
    /// Iteration index, starting at 1.
    pub t: usize,
    /// Objective of the best same-depth trial, `None` if that branch
    /// diverged during training.
    pub objective_same_depth: Option<f64>,
    /// Objective of the best deeper trial, `None` if it diverged.
    pub objective_deeper: Option<f64>,
    /// Hidden depth of the accepted candidate.
    pub accepted_depth: usize,
    /// Id of the member added this iteration (equals `t`).
    pub accepted_id: u32,
    pub pruned_member: Option<u32>,
    pub prune_reason: String,
    /// Live member count after the prune step.
    pub live_size: usize,
    /// Ensemble margin error on the training set.
    pub train_error: f64,
    /// Ensemble accuracy on the test set, as a fraction in [0, 1].
    pub test_accuracy: f64,
    /// Mean pairwise prediction disagreement of live members on the test
    /// set (0 when fewer than two members are live; see the flag).
    pub disagreement: f64,
    pub disagreement_degenerate: bool,
    /// Per-member scores produced by the pruning criterion this iteration.
    pub criterion_scores: BTreeMap<u32, f64>,
}

/// A finished search: the final ensemble plus its full iteration history.
#[derive(Debug)]
pub struct SearchOutcome {
    pub ensemble: EnsembleModel,
    pub history: Vec<IterationRecord>,
}

/// A failed search still reports the iterations completed before the error.
#[derive(Debug)]
pub struct SearchFailure {
    pub error: Error,
    pub partial: Vec<IterationRecord>,
}

impl std::fmt::Display for SearchFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "search failed after {} completed iterations: {}",
            self.partial.len(),
            self.error
        )
    }
}

impl std::error::Error for SearchFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// One trained, weighted, scored candidate from a branch.
struct BranchCandidate {
    net: crate::nn::DenseNet,
    train_loss_final: f64,
    /// Best trial objective over the candidate-weight grid.
    objective: f64,
    /// Candidate weight achieving that objective.
    weight: f64,
    /// Hidden depth of the candidate.
    depth: usize,
}

/// Margin error plus complexity penalty of a hypothetical ensemble given
/// per-member probability parts, weights, and depths.
fn trial_objective(
    parts: &[(u32, Array2<f64>)],
    weights: &BTreeMap<u32, f64>,
    depths: &BTreeMap<u32, usize>,
    labels: &[u32],
    mp: &MarginParams,
    cp: &ComplexityParams,
) -> Result<f64> {
    let preds = argmax_labels(&combine_probs(parts, weights));
    let g = g_values(&preds, labels)?;
    let error = empirical_margin_error(&g, mp)?;
    let mut penalty = 0.0;
    for (id, &w) in weights {
        penalty += (cp.lambda * depths[id] as f64 + cp.beta) * w.abs();
    }
    Ok(error + penalty)
}

/// Trains one candidate branch and scans the candidate-weight grid for its
/// best trial objective. Returns `Ok(None)` when training diverges (the
/// other branch may still carry the iteration); other errors abort.
#[allow(clippy::too_many_arguments)]
fn evaluate_branch(
    ens: &EnsembleModel,
    train_data: &Dataset,
    cand_input: &Array2<f64>,
    parts: &[(u32, Array2<f64>)],
    cfg: &SearchConfig,
    t: usize,
    branch: u64,
    depth: usize,
) -> Result<Option<BranchCandidate>> {
    let mut dims = Vec::with_capacity(depth + 2);
    dims.push(cand_input.ncols());
    dims.extend(std::iter::repeat_n(cfg.candidate_width, depth));
    dims.push(train_data.n_classes());

    let net = init_net(&dims, derive(cfg.master_seed, &[t as u64, branch, role::NET_INIT]))?;
    let mut tc = cfg.train.clone();
    tc.seed = derive(cfg.master_seed, &[t as u64, branch, role::TRAIN_SHUFFLE]);
    let cand_set = Dataset::new(
        cand_input.clone(),
        train_data.labels().to_vec(),
        train_data.n_classes(),
        format!("{}-cand-t{t}", train_data.name()),
    )?;
    let (net, curve) = match train(net, &cand_set, &tc) {
        Ok(out) => out,
        Err(Error::TrainingDiverged { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let train_loss_final = curve.last().copied().expect("steps >= 1");

    // Probability part and depth bookkeeping for the trial ensembles.
    let cand_id = t as u32;
    let cand_probs = crate::nn::softmax_rows(&net.forward(cand_input)?);
    let mut trial_parts: Vec<(u32, Array2<f64>)> =
        parts.iter().map(|(id, p)| (*id, p.clone())).collect();
    trial_parts.push((cand_id, cand_probs));
    let mut depths: BTreeMap<u32, usize> = ens
        .live_ids()
        .iter()
        .map(|&id| (id, ens.member_by_id(id).expect("live id").depth))
        .collect();
    depths.insert(cand_id, depth);

    let live_weights = ens.live_weights();
    let n_live = live_weights.len();
    let grid: Vec<f64> = if n_live == 0 {
        vec![1.0]
    } else {
        match cfg.weighting_mode {
            WeightingMode::Uniform => vec![1.0 / (n_live + 1) as f64],
            WeightingMode::Mixture => {
                let mut g: Vec<f64> = (1..=CANDIDATE_GRID_STEPS)
                    .map(|i| i as f64 / (CANDIDATE_GRID_STEPS + 1) as f64)
                    .collect();
                g.push(1.0 / (n_live + 1) as f64);
                g
            }
        }
    };

    let mut best: Option<(f64, f64)> = None; // (objective, weight)
    for &w in &grid {
        let mut weights: BTreeMap<u32, f64> = match cfg.weighting_mode {
            // Uniform trials refill every share exactly, matching what the
            // ensemble will hold after the append.
            WeightingMode::Uniform => live_weights
                .keys()
                .map(|&id| (id, 1.0 / (n_live + 1) as f64))
                .collect(),
            WeightingMode::Mixture => live_weights
                .iter()
                .map(|(&id, &wk)| (id, wk * (1.0 - w)))
                .collect(),
        };
        weights.insert(cand_id, w);
        let objective = trial_objective(
            &trial_parts,
            &weights,
            &depths,
            train_data.labels(),
            &cfg.margin,
            &cfg.complexity,
        )?;
        if best.is_none_or(|(obj, _)| objective < obj) {
            best = Some((objective, w));
        }
    }
    let (objective, weight) = best.expect("non-empty grid");

    Ok(Some(BranchCandidate {
        net,
        train_loss_final,
        objective,
        weight,
        depth,
    }))
}

/// Runs one search with the serial execution policy.
pub fn run_search(
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &SearchConfig,
) -> std::result::Result<SearchOutcome, SearchFailure> {
    run_search_with(train_data, test_data, cfg, ExecPolicy::Serial)
}

/// Runs one search with an explicit execution policy.
pub fn run_search_with(
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &SearchConfig,
    exec: ExecPolicy,
) -> std::result::Result<SearchOutcome, SearchFailure> {
    let mut history: Vec<IterationRecord> = Vec::with_capacity(cfg.iterations);
    match search_loop(train_data, test_data, cfg, exec, &mut history) {
        Ok(ensemble) => Ok(SearchOutcome { ensemble, history }),
        Err(error) => Err(SearchFailure {
            error,
            partial: history,
        }),
    }
}

fn search_loop(
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &SearchConfig,
    exec: ExecPolicy,
    history: &mut Vec<IterationRecord>,
) -> Result<EnsembleModel> {
    cfg.validate()?;
    if train_data.d() != test_data.d() {
        return Err(Error::Argument(format!(
            "train/test feature widths differ: {} vs {}",
            train_data.d(),
            test_data.d()
        )));
    }
    if train_data.n_classes() != test_data.n_classes() {
        return Err(Error::Argument(format!(
            "train/test class counts differ: {} vs {}",
            train_data.n_classes(),
            test_data.n_classes()
        )));
    }

    let mut ens = EnsembleModel::new(cfg.weighting_mode);
    for t in 1..=cfg.iterations {
        let fwd = member_forward_all(&ens, train_data.features())?;
        let live_before = ens.live_ids();

        // Candidate input: raw features, or features stacked with the live
        // members' last-hidden outputs when stacking is on.
        let owned_input: Array2<f64>;
        let cand_input: &Array2<f64> = if cfg.feature_stacking && !live_before.is_empty() {
            owned_input =
                stacked_input(&ens, train_data.features(), &live_before, &fwd.hidden_by_id)?;
            &owned_input
        } else {
            train_data.features()
        };

        let depth = ens.current_depth();
        let (same, deeper) = match exec {
            ExecPolicy::Serial => {
                let same = evaluate_branch(
                    &ens,
                    train_data,
                    cand_input,
                    &fwd.probs,
                    cfg,
                    t,
                    BRANCH_SAME_DEPTH,
                    depth,
                )?;
                let deeper = evaluate_branch(
                    &ens,
                    train_data,
                    cand_input,
                    &fwd.probs,
                    cfg,
                    t,
                    BRANCH_DEEPER,
                    depth + 1,
                )?;
                (same, deeper)
            }
            ExecPolicy::Parallel => {
                let (same_res, deeper_res) = std::thread::scope(|scope| {
                    let same = scope.spawn(|| {
                        evaluate_branch(
                            &ens,
                            train_data,
                            cand_input,
                            &fwd.probs,
                            cfg,
                            t,
                            BRANCH_SAME_DEPTH,
                            depth,
                        )
                    });
                    let deeper = scope.spawn(|| {
                        evaluate_branch(
                            &ens,
                            train_data,
                            cand_input,
                            &fwd.probs,
                            cfg,
                            t,
                            BRANCH_DEEPER,
                            depth + 1,
                        )
                    });
                    (
                        same.join().expect("branch thread panicked"),
                        deeper.join().expect("branch thread panicked"),
                    )
                });
                (same_res?, deeper_res?)
            }
        };

        let objective_same_depth = same.as_ref().map(|c| c.objective);
        let objective_deeper = deeper.as_ref().map(|c| c.objective);
        let chosen = match (same, deeper) {
            (None, None) => {
                return Err(Error::Iteration {
                    t,
                    message: "both candidate branches diverged during training".into(),
                })
            }
            (Some(c), None) | (None, Some(c)) => c,
            // Ties go to the shallower candidate.
            (Some(s), Some(d)) => {
                if d.objective < s.objective {
                    d
                } else {
                    s
                }
            }
        };

        let mut sub = SubArchitecture::new(
            t as u32,
            chosen.net,
            chosen.train_loss_final,
            chosen.objective,
        );
        if cfg.feature_stacking {
            sub.feature_sources = live_before.clone();
        }
        ens.append(sub, chosen.weight)?;
        ens.set_current_depth(chosen.depth);
        if cfg.weighting_mode == WeightingMode::Mixture {
            fit_mixture_weights(&mut ens, train_data, &cfg.complexity)?;
        }

        // One prune opportunity per iteration, on a per-iteration stream
        // derived from the criterion seed.
        let mut crit = cfg.criterion;
        crit.rng_seed = derive(cfg.criterion.rng_seed, &[role::PRUNE, t as u64]);
        let decision = choose_prune(&ens, train_data, &crit)?;
        if let Some(j) = decision.pruned_member {
            ens.prune(j)?;
            if cfg.weighting_mode == WeightingMode::Mixture {
                fit_mixture_weights(&mut ens, train_data, &cfg.complexity)?;
            }
        }

        // Iteration metrics: training margin error, test accuracy, and
        // test-set prediction diversity of the surviving members.
        let train_preds = ensemble_predict(&ens, train_data.features())?;
        let train_error = empirical_margin_error(
            &g_values(&train_preds, train_data.labels())?,
            &cfg.margin,
        )?;
        let test_fwd = member_forward_all(&ens, test_data.features())?;
        let test_preds = argmax_labels(&combine_probs(&test_fwd.probs, &ens.live_weights()));
        let correct = test_preds
            .iter()
            .zip(test_data.labels())
            .filter(|(p, t)| p == t)
            .count();
        let test_accuracy = correct as f64 / test_data.m() as f64;
        let rows: Vec<(u32, Vec<u32>)> = test_fwd
            .probs
            .iter()
            .map(|(id, probs)| (*id, argmax_labels(probs)))
            .collect();
        let disagreement = ensemble_disagreement(&PredictionMatrix::new(rows)?);

        history.push(IterationRecord {
            t,
            objective_same_depth,
            objective_deeper,
            accepted_depth: chosen.depth,
            accepted_id: t as u32,
            pruned_member: decision.pruned_member,
            prune_reason: decision.reason,
            live_size: ens.live_count(),
            train_error,
            test_accuracy,
            disagreement: disagreement.value,
            disagreement_degenerate: disagreement.degenerate,
            criterion_scores: decision.criterion_scores,
        });
    }
    Ok(ens)
}

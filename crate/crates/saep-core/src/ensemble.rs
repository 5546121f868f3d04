//! Ensemble data model and scalar objectives: weighted-member prediction,
//! the auxiliary margin function g, empirical margin error, the complexity
//! penalty Γ, the candidate-search objective, and mixture-weight fitting.
//!
//! Every prediction — full ensemble, hypothetical member-removed ensemble,
//! trial ensemble during candidate selection — flows through one shared
//! probability-combination path ([`combine_probs`] over [`member_probs`]),
//! so identities relating the accuracy-delta prune loss to error changes
//! hold bit-exactly rather than approximately.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{argmax_labels, softmax_rows, DenseNet};

/// How live-member output weights are maintained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingMode {
    /// All live members weigh 1/N.
    Uniform,
    /// Weights are fit on the simplex by [`fit_mixture_weights`].
    Mixture,
}

/// Margin threshold ρ for the empirical margin error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarginParams {
    pub rho: f64,
}

impl Default for MarginParams {
    fn default() -> Self {
        Self { rho: 0.0 }
    }
}

impl MarginParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= -1.0 && self.rho < 1.0) {
            return Err(Error::Config(format!(
                "rho must be in [-1, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Coefficients of the complexity penalty Γ = Σ (λ·depth + β)·|w|.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComplexityParams {
    pub lambda: f64,
    pub beta: f64,
}

impl Default for ComplexityParams {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            beta: 0.001,
        }
    }
}

impl ComplexityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Config(format!(
                "lambda and beta must be >= 0, got ({}, {})",
                self.lambda, self.beta
            )));
        }
        Ok(())
    }
}

/// One trained ensemble member.
#[derive(Debug, Clone)]
pub struct SubArchitecture {
    /// Iteration of birth; unique within a search.
    pub id: u32,
    pub net: DenseNet,
    /// Hidden-layer count; equals `net.depth()`.
    pub depth: usize,
    /// Final training loss when the member was trained.
    pub train_loss_final: f64,
    /// Search objective of the ensemble at the moment this member was
    /// accepted.
    pub born_objective: f64,
    /// Ids of older members whose last-hidden outputs are concatenated onto
    /// this member's raw input (empty unless feature stacking is enabled).
    pub feature_sources: Vec<u32>,
}

impl SubArchitecture {
    pub fn new(id: u32, net: DenseNet, train_loss_final: f64, born_objective: f64) -> Self {
        let depth = net.depth();
        Self {
            id,
            net,
            depth,
            train_loss_final,
            born_objective,
            feature_sources: Vec::new(),
        }
    }

    /// Width of the last hidden layer (the feature block this member
    /// contributes when stacking).
    pub fn hidden_width(&self) -> usize {
        let dims = self.net.layer_dims();
        dims[dims.len() - 2]
    }
}

/// An ordered collection of members with output weights and a prune set.
///
/// Invariants: live weights are non-negative and sum to 1 (uniform mode
/// keeps them all equal); pruned members' weights are exactly zero.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    members: Vec<SubArchitecture>,
    member_weights: Vec<f64>,
    weighting_mode: WeightingMode,
    pruned_ids: BTreeSet<u32>,
    current_depth: usize,
}

impl EnsembleModel {
    /// An empty ensemble at depth 1 (the search start state).
    pub fn new(weighting_mode: WeightingMode) -> Self {
        Self {
            members: Vec::new(),
            member_weights: Vec::new(),
            weighting_mode,
            pruned_ids: BTreeSet::new(),
            current_depth: 1,
        }
    }

    pub fn weighting_mode(&self) -> WeightingMode {
        self.weighting_mode
    }

    pub fn members(&self) -> &[SubArchitecture] {
        &self.members
    }

    pub fn member_by_id(&self, id: u32) -> Option<&SubArchitecture> {
        self.members.iter().find(|m| m.id == id)
    }

    pub fn pruned_ids(&self) -> &BTreeSet<u32> {
        &self.pruned_ids
    }

    pub fn current_depth(&self) -> usize {
        self.current_depth
    }

    pub fn set_current_depth(&mut self, depth: usize) {
        self.current_depth = depth;
    }

    pub fn is_live(&self, id: u32) -> bool {
        !self.pruned_ids.contains(&id) && self.member_by_id(id).is_some()
    }

    /// Live member ids in ascending order.
    pub fn live_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .members
            .iter()
            .map(|m| m.id)
            .filter(|id| !self.pruned_ids.contains(id))
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn live_count(&self) -> usize {
        self.members.len() - self.pruned_ids.len()
    }

    /// Current output weight of a member (zero if pruned).
    pub fn weight_of(&self, id: u32) -> Option<f64> {
        self.members
            .iter()
            .position(|m| m.id == id)
            .map(|i| self.member_weights[i])
    }

    /// Live `(id, weight)` pairs in ascending id order.
    pub fn live_weights(&self) -> BTreeMap<u32, f64> {
        self.members
            .iter()
            .zip(&self.member_weights)
            .filter(|(m, _)| !self.pruned_ids.contains(&m.id))
            .map(|(m, &w)| (m.id, w))
            .collect()
    }

    /// Appends a member. In uniform mode all live weights reset to 1/N; in
    /// mixture mode existing live weights scale by `1 − candidate_weight`
    /// and the new member takes `candidate_weight`.
    pub fn append(&mut self, sub: SubArchitecture, candidate_weight: f64) -> Result<()> {
        if self.member_by_id(sub.id).is_some() {
            return Err(Error::Argument(format!("duplicate member id {}", sub.id)));
        }
        let n_live_before = self.live_count();
        match self.weighting_mode {
            WeightingMode::Uniform => {
                self.members.push(sub);
                self.member_weights.push(0.0);
                self.refill_uniform();
            }
            WeightingMode::Mixture => {
                let w = if n_live_before == 0 {
                    1.0
                } else {
                    if !(candidate_weight > 0.0 && candidate_weight < 1.0) {
                        return Err(Error::Argument(format!(
                            "candidate weight must be in (0, 1), got {candidate_weight}"
                        )));
                    }
                    candidate_weight
                };
                for (member, weight) in self.members.iter().zip(self.member_weights.iter_mut()) {
                    if !self.pruned_ids.contains(&member.id) {
                        *weight *= 1.0 - w;
                    }
                }
                self.members.push(sub);
                self.member_weights.push(w);
            }
        }
        Ok(())
    }

    /// Zeroes one live member's weight and renormalizes the remainder:
    /// uniform mode refills 1/(N−1); mixture mode rescales proportionally
    /// (falling back to uniform if the remaining mass is exactly zero).
    pub fn prune(&mut self, id: u32) -> Result<()> {
        if !self.is_live(id) {
            return Err(Error::State(format!("member {id} is not live")));
        }
        if self.live_count() < 2 {
            return Err(Error::State("cannot prune the last live member".into()));
        }
        let weights = weights_without(self, id)?;
        let idx = self.members.iter().position(|m| m.id == id).unwrap();
        self.member_weights[idx] = 0.0;
        self.pruned_ids.insert(id);
        for (member, weight) in self.members.iter().zip(self.member_weights.iter_mut()) {
            if let Some(&w) = weights.get(&member.id) {
                *weight = w;
            }
        }
        Ok(())
    }

    /// Overwrites live weights from an id-keyed map (simplex-validated).
    pub fn set_live_weights(&mut self, weights: &BTreeMap<u32, f64>) -> Result<()> {
        let live = self.live_ids();
        if weights.len() != live.len() || live.iter().any(|id| !weights.contains_key(id)) {
            return Err(Error::Argument(
                "weight map must cover exactly the live members".into(),
            ));
        }
        let sum: f64 = weights.values().sum();
        if weights.values().any(|&w| !(w.is_finite() && w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "weights must be non-negative and sum to 1, got sum {sum}"
            )));
        }
        for (member, weight) in self.members.iter().zip(self.member_weights.iter_mut()) {
            if let Some(&w) = weights.get(&member.id) {
                *weight = w;
            }
        }
        Ok(())
    }

    fn refill_uniform(&mut self) {
        let n = self.live_count();
        if n == 0 {
            return;
        }
        let w = 1.0 / n as f64;
        for (member, weight) in self.members.iter().zip(self.member_weights.iter_mut()) {
            *weight = if self.pruned_ids.contains(&member.id) {
                0.0
            } else {
                w
            };
        }
    }
}

/// The auxiliary margin function: +1 when the prediction matches the truth,
/// −1 otherwise.
pub fn g_margin(predicted: u32, truth: u32) -> f64 {
    if predicted == truth {
        1.0
    } else {
        -1.0
    }
}

/// Element-wise [`g_margin`] over prediction/truth vectors.
pub fn g_values(predicted: &[u32], truth: &[u32]) -> Result<Vec<f64>> {
    if predicted.len() != truth.len() {
        return Err(Error::Argument(format!(
            "prediction and truth lengths differ: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    Ok(predicted
        .iter()
        .zip(truth)
        .map(|(&p, &t)| g_margin(p, t))
        .collect())
}

/// Empirical margin error: the fraction of instances with g ≤ ρ.
///
/// Because g is ±1-valued, this equals the 0-1 training error for every
/// ρ ∈ [−1, 1).
pub fn empirical_margin_error(g: &[f64], mp: &MarginParams) -> Result<f64> {
    if g.is_empty() {
        return Err(Error::Argument("margin error of an empty sample".into()));
    }
    let hits = g.iter().filter(|&&v| v <= mp.rho).count();
    Ok(hits as f64 / g.len() as f64)
}

/// Per-member softmax probability matrices over `features` for all live
/// members, in ascending id order, plus each member's last-hidden output
/// (needed to build stacked inputs for younger members).
pub(crate) struct MemberForward {
    /// `(id, m × n_classes probability matrix)` in ascending id order.
    pub probs: Vec<(u32, Array2<f64>)>,
    /// Last-hidden activations per live member id.
    pub hidden_by_id: BTreeMap<u32, Array2<f64>>,
}

/// Builds one member's input: raw features, optionally concatenated with the
/// last-hidden blocks of its recorded source members. Sources that are no
/// longer live (or not yet computed) contribute zero blocks.
pub(crate) fn stacked_input(
    ens: &EnsembleModel,
    features: &Array2<f64>,
    sources: &[u32],
    hidden_by_id: &BTreeMap<u32, Array2<f64>>,
) -> Result<Array2<f64>> {
    let m = features.nrows();
    let zero_blocks: Vec<Array2<f64>>;
    let mut views = vec![features.view()];
    let mut zeros = Vec::new();
    for &source in sources {
        match hidden_by_id.get(&source) {
            Some(hidden) => views.push(hidden.view()),
            None => {
                let width = ens
                    .member_by_id(source)
                    .ok_or_else(|| {
                        Error::State(format!("feature source {source} is not a member"))
                    })?
                    .hidden_width();
                zeros.push(Array2::<f64>::zeros((m, width)));
            }
        }
    }
    zero_blocks = zeros;
    for block in &zero_blocks {
        views.push(block.view());
    }
    ndarray::concatenate(Axis(1), &views).map_err(|e| Error::Shape {
        expected: "stackable feature blocks".into(),
        got: e.to_string(),
    })
}

/// Forwards all live members over `features` in ascending id order.
pub(crate) fn member_forward_all(
    ens: &EnsembleModel,
    features: &Array2<f64>,
) -> Result<MemberForward> {
    let mut probs = Vec::new();
    let mut hidden_by_id: BTreeMap<u32, Array2<f64>> = BTreeMap::new();
    for id in ens.live_ids() {
        let member = ens.member_by_id(id).expect("live id");
        let (scores, hidden) = if member.feature_sources.is_empty() {
            member.net.forward_with_hidden(features)?
        } else {
            let input = stacked_input(ens, features, &member.feature_sources, &hidden_by_id)?;
            member.net.forward_with_hidden(&input)?
        };
        hidden_by_id.insert(id, hidden);
        probs.push((id, softmax_rows(&scores)));
    }
    Ok(MemberForward {
        probs,
        hidden_by_id,
    })
}

/// Per-member probability matrices for all live members (ascending id).
pub(crate) fn member_probs(
    ens: &EnsembleModel,
    features: &Array2<f64>,
) -> Result<Vec<(u32, Array2<f64>)>> {
    Ok(member_forward_all(ens, features)?.probs)
}

/// Weighted sum of per-member probability matrices. Parts must be in
/// ascending id order; missing weights count as zero. This is the single
/// combination path used by every prediction in the crate.
pub(crate) fn combine_probs(
    parts: &[(u32, Array2<f64>)],
    weights: &BTreeMap<u32, f64>,
) -> Array2<f64> {
    let dim = parts
        .first()
        .map(|(_, p)| p.dim())
        .expect("at least one member part");
    let mut acc = Array2::<f64>::zeros(dim);
    for (id, p) in parts {
        if let Some(&w) = weights.get(id) {
            if w != 0.0 {
                acc.scaled_add(w, p);
            }
        }
    }
    acc
}

/// Hypothetical live weights with member `j` removed: uniform mode fills
/// 1/(N−1) exactly; mixture mode renormalizes the remaining weights to sum
/// one, falling back to uniform when the remaining mass is exactly zero.
pub(crate) fn weights_without(ens: &EnsembleModel, j: u32) -> Result<BTreeMap<u32, f64>> {
    if !ens.is_live(j) {
        return Err(Error::State(format!("member {j} is not live")));
    }
    if ens.live_count() < 2 {
        return Err(Error::State(
            "cannot evaluate removal from a single-member ensemble".into(),
        ));
    }
    let weights = ens.live_weights();
    let n_rest = weights.len() - 1;
    let mut out = BTreeMap::new();
    match ens.weighting_mode() {
        WeightingMode::Uniform => {
            let w = 1.0 / n_rest as f64;
            for (&id, _) in weights.iter().filter(|(&id, _)| id != j) {
                out.insert(id, w);
            }
        }
        WeightingMode::Mixture => {
            let rest_sum: f64 = weights
                .iter()
                .filter(|(&id, _)| id != j)
                .map(|(_, &w)| w)
                .sum();
            if rest_sum == 0.0 {
                let w = 1.0 / n_rest as f64;
                for (&id, _) in weights.iter().filter(|(&id, _)| id != j) {
                    out.insert(id, w);
                }
            } else {
                for (&id, &w) in weights.iter().filter(|(&id, _)| id != j) {
                    out.insert(id, w / rest_sum);
                }
            }
        }
    }
    Ok(out)
}

/// Ensemble predictions: argmax over classes of the weighted sum of member
/// softmax probabilities, ties toward the smaller class index.
pub fn ensemble_predict(ens: &EnsembleModel, batch: &Array2<f64>) -> Result<Vec<u32>> {
    if ens.live_count() == 0 {
        return Err(Error::State("ensemble has no live members".into()));
    }
    let parts = member_probs(ens, batch)?;
    Ok(argmax_labels(&combine_probs(&parts, &ens.live_weights())))
}

/// Ensemble predictions with member `j` hypothetically removed.
pub(crate) fn predictions_without(
    ens: &EnsembleModel,
    j: u32,
    batch: &Array2<f64>,
) -> Result<Vec<u32>> {
    let weights = weights_without(ens, j)?;
    let parts = member_probs(ens, batch)?;
    Ok(argmax_labels(&combine_probs(&parts, &weights)))
}

/// Complexity penalty Γ = Σ over live members of (λ·depth + β)·|w|.
pub fn complexity_penalty(ens: &EnsembleModel, cp: &ComplexityParams) -> f64 {
    let weights = ens.live_weights();
    let mut sum = 0.0;
    for (&id, &w) in &weights {
        let member = ens.member_by_id(id).expect("live id");
        sum += (cp.lambda * member.depth as f64 + cp.beta) * w.abs();
    }
    sum
}

/// The candidate-search objective: empirical margin error on `data` plus
/// the complexity penalty.
pub fn search_objective(
    ens: &EnsembleModel,
    data: &Dataset,
    mp: &MarginParams,
    cp: &ComplexityParams,
) -> Result<f64> {
    let preds = ensemble_predict(ens, data.features())?;
    let g = g_values(&preds, data.labels())?;
    Ok(empirical_margin_error(&g, mp)? + complexity_penalty(ens, cp))
}

/// Training error of the ensemble with member `j`'s weight set to zero and
/// the remaining live weights renormalized.
pub fn error_without(
    ens: &EnsembleModel,
    j: u32,
    data: &Dataset,
    mp: &MarginParams,
) -> Result<f64> {
    let preds = predictions_without(ens, j, data.features())?;
    let g = g_values(&preds, data.labels())?;
    empirical_margin_error(&g, mp)
}

/// Logistic sharpening constant of the mixture-weight surrogate loss.
const MIXTURE_LOGISTIC_SCALE: f64 = 4.0;
/// Projected-gradient iterations for [`fit_mixture_weights`].
const MIXTURE_FIT_STEPS: usize = 200;
/// Projected-gradient step size.
const MIXTURE_FIT_RATE: f64 = 0.5;

/// Euclidean projection onto the probability simplex (sorted-threshold
/// method). Deterministic for finite inputs.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Surrogate loss for mixture weights: mean logistic loss of the weighted
/// member-correctness margin plus the l1-weighted complexity penalty.
fn mixture_surrogate(w: &[f64], correctness: &[Vec<f64>], penalties: &[f64]) -> f64 {
    let m = correctness[0].len();
    let mut loss = 0.0;
    for i in 0..m {
        let s: f64 = w
            .iter()
            .zip(correctness)
            .map(|(&wk, row)| wk * row[i])
            .sum();
        let t = -MIXTURE_LOGISTIC_SCALE * s;
        // log(1 + e^t), stable for large |t|
        loss += if t > 30.0 { t } else { t.exp().ln_1p() };
    }
    loss / m as f64 + w.iter().zip(penalties).map(|(&wk, &p)| wk * p).sum::<f64>()
}

/// Fits live-member mixture weights by minimizing a convex logistic
/// surrogate of the margin error plus the complexity penalty, via projected
/// gradient descent on the simplex. Falls back to uniform weights when the
/// surrogate does not improve on them. No-op in uniform weighting mode.
pub fn fit_mixture_weights(
    ens: &mut EnsembleModel,
    data: &Dataset,
    cp: &ComplexityParams,
) -> Result<()> {
    if ens.weighting_mode() == WeightingMode::Uniform {
        return Ok(());
    }
    let live = ens.live_ids();
    if live.is_empty() {
        return Err(Error::State("ensemble has no live members".into()));
    }
    if live.len() == 1 {
        let mut w = BTreeMap::new();
        w.insert(live[0], 1.0);
        return ens.set_live_weights(&w);
    }

    // Member correctness rows a_ki ∈ {+1, −1}: member k's own argmax vs the
    // truth, in ascending id order.
    let parts = member_probs(ens, data.features())?;
    let truth = data.labels();
    let correctness: Vec<Vec<f64>> = parts
        .iter()
        .map(|(_, probs)| {
            argmax_labels(probs)
                .iter()
                .zip(truth)
                .map(|(&p, &t)| g_margin(p, t))
                .collect()
        })
        .collect();
    let penalties: Vec<f64> = live
        .iter()
        .map(|&id| {
            let member = ens.member_by_id(id).expect("live id");
            cp.lambda * member.depth as f64 + cp.beta
        })
        .collect();

    let n = live.len();
    let m = data.m() as f64;
    let uniform = vec![1.0 / n as f64; n];
    let uniform_loss = mixture_surrogate(&uniform, &correctness, &penalties);

    let mut w = uniform.clone();
    let mut best = uniform.clone();
    let mut best_loss = uniform_loss;
    for _ in 0..MIXTURE_FIT_STEPS {
        // ∂/∂w_k of the logistic term: −c·a_ki·σ(−c·s_i) averaged over i.
        let mut grad = penalties.clone();
        for i in 0..truth.len() {
            let s: f64 = w
                .iter()
                .zip(&correctness)
                .map(|(&wk, row)| wk * row[i])
                .sum();
            let sig = 1.0 / (1.0 + (MIXTURE_LOGISTIC_SCALE * s).exp());
            for (gk, row) in grad.iter_mut().zip(&correctness) {
                *gk -= MIXTURE_LOGISTIC_SCALE * row[i] * sig / m;
            }
        }
        let stepped: Vec<f64> = w
            .iter()
            .zip(&grad)
            .map(|(&wk, &gk)| wk - MIXTURE_FIT_RATE * gk)
            .collect();
        w = project_simplex(&stepped);
        let loss = mixture_surrogate(&w, &correctness, &penalties);
        if loss < best_loss {
            best_loss = loss;
            best = w.clone();
        }
    }

    let chosen = if best_loss < uniform_loss {
        best
    } else {
        uniform
    };
    let map: BTreeMap<u32, f64> = live.iter().copied().zip(chosen).collect();
    // Renormalize exactly onto the simplex before storing: projection keeps
    // the sum at 1 up to rounding, and the stored invariant is 1e−12-tight.
    let sum: f64 = map.values().sum();
    let map: BTreeMap<u32, f64> = map.into_iter().map(|(k, v)| (k, v / sum)).collect();
    ens.set_live_weights(&map)
}

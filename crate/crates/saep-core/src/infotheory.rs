//! Exact discrete information-theoretic and diversity measures over label
//! vectors: entropy, joint entropy, mutual information, normalized mutual
//! information (NMI), normalized variation of information (VI), and the
//! pairwise/ensemble disagreement measures.
//!
//! All entropies are in bits (base-2 logarithms). NMI and VI are
//! base-invariant. Frequencies are empirical plug-in estimates with no bias
//! correction.
//!
//! Entropies are computed from *sorted* count vectors, which makes
//! `joint_entropy`, `mutual_information`, `normalized_mi` and
//! `variation_of_info` bitwise symmetric in their arguments and bitwise
//! invariant under relabeling of class symbols — properties the test suite
//! asserts with exact equality, not tolerances.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Entropy of a count vector whose entries sum to `m`, via
/// `H = log2(m) − (Σ n·log2 n)/m`. Counts are sorted first so the result
/// depends only on the count multiset.
fn entropy_from_counts(mut counts: Vec<u64>, m: usize) -> f64 {
    if counts.len() <= 1 {
        return 0.0;
    }
    counts.sort_unstable();
    let mf = m as f64;
    let weighted: f64 = counts
        .iter()
        .map(|&n| {
            let nf = n as f64;
            nf * nf.log2()
        })
        .sum();
    (mf.log2() - weighted / mf).max(0.0)
}

fn check_same_length(u: &[u32], v: &[u32]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Argument(format!(
            "label vectors must have equal lengths, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Argument("label vectors must be non-empty".into()));
    }
    Ok(())
}

/// Empirical entropy H(v) in bits.
///
/// A constant (or empty) vector carries no uncertainty and returns exactly
/// `0.0`.
pub fn entropy(v: &[u32]) -> f64 {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for &x in v {
        *counts.entry(x).or_insert(0) += 1;
    }
    entropy_from_counts(counts.into_values().collect(), v.len())
}

/// Joint entropy H(u, v) of the paired symbol sequence `(u_i, v_i)`.
pub fn joint_entropy(u: &[u32], v: &[u32]) -> Result<f64> {
    check_same_length(u, v)?;
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for (&a, &b) in u.iter().zip(v) {
        *counts.entry((a, b)).or_insert(0) += 1;
    }
    Ok(entropy_from_counts(counts.into_values().collect(), u.len()))
}

/// Mutual information I(u; v) = H(u) + H(v) − H(u, v), clamped at ≥ 0
/// against rounding.
pub fn mutual_information(u: &[u32], v: &[u32]) -> Result<f64> {
    let joint = joint_entropy(u, v)?;
    Ok((entropy(u) + entropy(v) - joint).max(0.0))
}

/// Normalized mutual information I(u; y) / sqrt(H(u)·H(y)), in [0, 1].
///
/// If either marginal entropy is zero the measure is undefined; this
/// implementation returns 0 there (a constant predictor earns no accuracy
/// credit).
pub fn normalized_mi(u: &[u32], y: &[u32]) -> Result<f64> {
    let i = mutual_information(u, y)?;
    let hu = entropy(u);
    let hy = entropy(y);
    if hu == 0.0 || hy == 0.0 {
        return Ok(0.0);
    }
    Ok((i / (hu * hy).sqrt()).clamp(0.0, 1.0))
}

/// Normalized variation of information 1 − I(u; v)/H(u, v), in [0, 1].
///
/// If H(u, v) = 0 (two constant vectors) the measure is undefined; this
/// implementation returns 0 (constant predictors carry no diversity).
pub fn variation_of_info(u: &[u32], v: &[u32]) -> Result<f64> {
    let joint = joint_entropy(u, v)?;
    if joint == 0.0 {
        return Ok(0.0);
    }
    let i = mutual_information(u, v)?;
    Ok((1.0 - i / joint).clamp(0.0, 1.0))
}

/// Fraction of positions where `u` and `v` predict different labels.
pub fn pairwise_disagreement(u: &[u32], v: &[u32]) -> Result<f64> {
    check_same_length(u, v)?;
    let mismatches = u.iter().zip(v).filter(|(a, b)| a != b).count();
    Ok(mismatches as f64 / u.len() as f64)
}

/// Predicted labels of several ensemble members over one instance set:
/// one row of `n_instances` class labels per member, keyed by member id.
///
/// Rows are stored in ascending id order regardless of insertion order, so
/// every reduction over the matrix is deterministic.
#[derive(Debug, Clone)]
pub struct PredictionMatrix {
    ids: Vec<u32>,
    rows: Vec<Vec<u32>>,
}

impl PredictionMatrix {
    /// Builds a matrix from `(member id, predicted labels)` pairs.
    ///
    /// All rows must be non-empty, of equal length, with unique ids.
    pub fn new(entries: Vec<(u32, Vec<u32>)>) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by_key(|(id, _)| *id);
        let mut ids = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        let mut len: Option<usize> = None;
        for (id, row) in entries {
            if row.is_empty() {
                return Err(Error::Argument(format!(
                    "prediction row for member {id} is empty"
                )));
            }
            match len {
                None => len = Some(row.len()),
                Some(l) if l != row.len() => {
                    return Err(Error::Argument(format!(
                        "prediction rows must have equal lengths, got {l} and {} (member {id})",
                        row.len()
                    )))
                }
                _ => {}
            }
            if ids.last() == Some(&id) {
                return Err(Error::Argument(format!("duplicate member id {id}")));
            }
            ids.push(id);
            rows.push(row);
        }
        Ok(Self { ids, rows })
    }

    /// Member ids in ascending order.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn n_members(&self) -> usize {
        self.ids.len()
    }

    pub fn n_instances(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// The prediction row for one member id, if present.
    pub fn row(&self, id: u32) -> Option<&[u32]> {
        let idx = self.ids.binary_search(&id).ok()?;
        Some(&self.rows[idx])
    }

    /// `(id, row)` pairs in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[u32])> {
        self.ids
            .iter()
            .copied()
            .zip(self.rows.iter().map(Vec::as_slice))
    }
}

/// Ensemble disagreement with its degeneracy marker.
///
/// `degenerate` is true when fewer than two members were available, in
/// which case `value` is 0 and result tables render it as `0.0*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disagreement {
    pub value: f64,
    pub degenerate: bool,
}

/// Mean pairwise disagreement over all unordered member pairs.
///
/// With fewer than two members the measure is undefined; the result is 0
/// with the `degenerate` flag set.
pub fn ensemble_disagreement(preds: &PredictionMatrix) -> Disagreement {
    let n = preds.n_members();
    if n < 2 {
        return Disagreement {
            value: 0.0,
            degenerate: true,
        };
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            // Rows are validated equal-length at construction.
            sum += pairwise_disagreement(&preds.rows[i], &preds.rows[j])
                .expect("rows validated at construction");
            pairs += 1;
        }
    }
    Disagreement {
        value: sum / pairs as f64,
        degenerate: false,
    }
}

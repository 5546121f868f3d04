//! Core library for sub-architecture ensemble search with pruning.
//!
//! The crate trains small dense networks as ensemble members, combines them
//! by weighted softmax-probability voting, scores ensembles with a margin
//! objective plus a depth-sensitive complexity penalty, and prunes members
//! with replaceable criteria (random, accuracy-delta, information-entropy).
//! Everything is seeded and deterministic: the same configuration and seed
//! reproduce runs bit for bit.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod infotheory;
pub mod nn;
pub mod pruning;
pub mod search;
pub mod seed;

pub use data::{
    binarize_pair, load_csv, load_idx, make_synthetic, split_train_test, write_csv, Dataset,
    SyntheticKind,
};
pub use ensemble::{
    complexity_penalty, empirical_margin_error, ensemble_predict, error_without,
    fit_mixture_weights, g_margin, g_values, search_objective, ComplexityParams, EnsembleModel,
    MarginParams, SubArchitecture, WeightingMode,
};
pub use error::{Error, Result};
pub use infotheory::{
    ensemble_disagreement, entropy, joint_entropy, mutual_information, normalized_mi,
    pairwise_disagreement, variation_of_info, Disagreement, PredictionMatrix,
};
pub use nn::{init_net, train, Activation, DenseNet, TrainConfig};
pub use pruning::{
    choose_prune, pap_loss, pie_member_loss, pie_pair_loss, CriterionConfig, CriterionKind,
    PiePolicy, PruneDecision,
};
pub use search::{
    run_search, run_search_with, ExecPolicy, IterationRecord, SearchConfig, SearchFailure,
    SearchOutcome,
};

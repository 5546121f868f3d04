//! Experiment configuration: a TOML file with `[dataset]`, `[search]`,
//! `[criterion]`, `[margin]`, `[complexity]`, `[train]`, and `[output]`
//! sections. Every key has a default except the dataset source, so a
//! minimal config is just a `[dataset]` table.
//!
//! Key names mirror the library's config structs one to one; anything that
//! influences results ends up inside the [`SearchConfig`] snapshot embedded
//! in the run report.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use saep_core::data::{binarize_pair, load_csv, load_idx, make_synthetic, SyntheticKind};
use saep_core::ensemble::{ComplexityParams, MarginParams, WeightingMode};
use saep_core::nn::TrainConfig;
use saep_core::pruning::{CriterionConfig, CriterionKind, PiePolicy};
use saep_core::search::SearchConfig;
use saep_core::Dataset;

use crate::CliError;

/// Where the train/test datasets come from.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSection {
    /// Generated two-class point clouds; train and test are disjoint
    /// slices of one deterministic draw.
    Synthetic {
        kind: SyntheticKind,
        #[serde(default = "d_train_instances")]
        train_instances: usize,
        #[serde(default = "d_test_instances")]
        test_instances: usize,
        #[serde(default = "d_noise")]
        noise: f64,
        #[serde(default)]
        data_seed: u64,
    },
    /// Big-endian IDX image/label files, gzipped or plain; paths are
    /// resolved relative to the config file.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Keep only these two classes, remapped to {0, 1}.
        #[serde(default)]
        binarize: Option<[u32; 2]>,
    },
    /// A header-ed CSV with one label column; split deterministically.
    Csv {
        path: PathBuf,
        label_column: String,
        #[serde(default = "d_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        split_seed: u64,
    },
}

fn d_train_instances() -> usize {
    1500
}
fn d_test_instances() -> usize {
    500
}
fn d_noise() -> f64 {
    0.3
}
fn d_test_fraction() -> f64 {
    0.25
}

impl DatasetSection {
    /// Loads the train/test pair; relative file paths resolve against
    /// `base_dir` (the config file's directory).
    pub fn load(&self, base_dir: &Path) -> Result<(Dataset, Dataset), CliError> {
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        match self {
            DatasetSection::Synthetic {
                kind,
                train_instances,
                test_instances,
                noise,
                data_seed,
            } => {
                if *train_instances == 0 || *test_instances == 0 {
                    return Err(CliError::Config(
                        "train_instances and test_instances must be >= 1".into(),
                    ));
                }
                let all = make_synthetic(
                    *kind,
                    train_instances + test_instances,
                    *noise,
                    *data_seed,
                )
                .map_err(CliError::config)?;
                let (train, test) = all.split_at(*train_instances).map_err(CliError::config)?;
                Ok((train, test))
            }
            DatasetSection::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                binarize,
            } => {
                let train = load_idx(&resolve(train_images), &resolve(train_labels))
                    .map_err(CliError::runtime)?;
                let test = load_idx(&resolve(test_images), &resolve(test_labels))
                    .map_err(CliError::runtime)?;
                match binarize {
                    Some([a, b]) => Ok((
                        binarize_pair(&train, *a, *b).map_err(CliError::runtime)?,
                        binarize_pair(&test, *a, *b).map_err(CliError::runtime)?,
                    )),
                    None => Ok((train, test)),
                }
            }
            DatasetSection::Csv {
                path,
                label_column,
                test_fraction,
                split_seed,
            } => {
                let data =
                    load_csv(&resolve(path), label_column).map_err(CliError::runtime)?;
                saep_core::data::split_train_test(&data, *test_fraction, *split_seed)
                    .map_err(CliError::config)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_candidate_width")]
    pub candidate_width: usize,
    #[serde(default = "d_weighting_mode")]
    pub weighting_mode: WeightingMode,
    #[serde(default)]
    pub feature_stacking: bool,
    #[serde(default)]
    pub master_seed: u64,
}

fn d_iterations() -> usize {
    8
}
fn d_candidate_width() -> usize {
    32
}
fn d_weighting_mode() -> WeightingMode {
    WeightingMode::Uniform
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            iterations: d_iterations(),
            candidate_width: d_candidate_width(),
            weighting_mode: d_weighting_mode(),
            feature_stacking: false,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionSection {
    #[serde(default = "d_kind")]
    pub kind: CriterionKind,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_prs_prune_prob")]
    pub prs_prune_prob: f64,
    #[serde(default = "d_pie_policy")]
    pub pie_policy: PiePolicy,
    #[serde(default = "d_pie_threshold_theta")]
    pub pie_threshold_theta: f64,
    /// Defaults to the master seed when omitted.
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

fn d_kind() -> CriterionKind {
    CriterionKind::None
}
fn d_alpha() -> f64 {
    0.5
}
fn d_prs_prune_prob() -> f64 {
    0.5
}
fn d_pie_policy() -> PiePolicy {
    PiePolicy::Threshold
}
fn d_pie_threshold_theta() -> f64 {
    0.9
}

impl Default for CriterionSection {
    fn default() -> Self {
        Self {
            kind: d_kind(),
            alpha: d_alpha(),
            prs_prune_prob: d_prs_prune_prob(),
            pie_policy: d_pie_policy(),
            pie_threshold_theta: d_pie_threshold_theta(),
            rng_seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSection {
    #[serde(default)]
    pub rho: f64,
}

impl Default for MarginSection {
    fn default() -> Self {
        Self { rho: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexitySection {
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
}

fn d_lambda() -> f64 {
    0.01
}
fn d_beta() -> f64 {
    0.001
}

impl Default for ComplexitySection {
    fn default() -> Self {
        Self {
            lambda: d_lambda(),
            beta: d_beta(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "d_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default = "d_cosine_decay")]
    pub cosine_decay: bool,
}

fn d_learning_rate() -> f64 {
    0.025
}
fn d_momentum() -> f64 {
    0.9
}
fn d_steps() -> usize {
    5000
}
fn d_batch_size() -> usize {
    128
}
fn d_cosine_decay() -> bool {
    true
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            learning_rate: d_learning_rate(),
            momentum: d_momentum(),
            steps: d_steps(),
            batch_size: d_batch_size(),
            cosine_decay: d_cosine_decay(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "d_tag")]
    pub tag: String,
}

fn d_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn d_tag() -> String {
    "run".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: d_out_dir(),
            tag: d_tag(),
        }
    }
}

/// The whole parsed config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub criterion: CriterionSection,
    #[serde(default)]
    pub margin: MarginSection,
    #[serde(default)]
    pub complexity: ComplexitySection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Parses and structurally validates a config file.
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Assembles the library search configuration, applying the optional
    /// seed override and the rng-seed default, and validates every field.
    pub fn search_config(&self, seed_override: Option<u64>) -> Result<SearchConfig, CliError> {
        let master_seed = seed_override.unwrap_or(self.search.master_seed);
        let cfg = SearchConfig {
            iterations: self.search.iterations,
            criterion: CriterionConfig {
                kind: self.criterion.kind,
                alpha: self.criterion.alpha,
                prs_prune_prob: self.criterion.prs_prune_prob,
                pie_policy: self.criterion.pie_policy,
                pie_threshold_theta: self.criterion.pie_threshold_theta,
                rng_seed: self.criterion.rng_seed.unwrap_or(master_seed),
            },
            margin: MarginParams {
                rho: self.margin.rho,
            },
            complexity: ComplexityParams {
                lambda: self.complexity.lambda,
                beta: self.complexity.beta,
            },
            weighting_mode: self.search.weighting_mode,
            candidate_width: self.search.candidate_width,
            train: TrainConfig {
                learning_rate: self.train.learning_rate,
                momentum: self.train.momentum,
                steps: self.train.steps,
                batch_size: self.train.batch_size,
                cosine_decay: self.train.cosine_decay,
                seed: 0, // per-candidate seeds are derived during the search
            },
            feature_stacking: self.search.feature_stacking,
            master_seed,
        };
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_documented_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            [dataset]
            source = "synthetic"
            kind = "blobs"
            "#,
        )
        .unwrap();
        let sc = cfg.search_config(None).unwrap();
        assert_eq!(sc.iterations, 8);
        assert_eq!(sc.candidate_width, 32);
        assert_eq!(sc.train.learning_rate, 0.025);
        assert_eq!(sc.train.steps, 5000);
        assert_eq!(sc.train.batch_size, 128);
        assert_eq!(sc.complexity.lambda, 0.01);
        assert_eq!(sc.complexity.beta, 0.001);
        assert_eq!(sc.margin.rho, 0.0);
        assert_eq!(sc.criterion.kind, CriterionKind::None);
        assert_eq!(sc.criterion.alpha, 0.5);
        assert_eq!(sc.criterion.pie_threshold_theta, 0.9);
        assert!(!sc.feature_stacking);
    }

    #[test]
    fn rng_seed_defaults_to_master_seed() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            [dataset]
            source = "synthetic"
            kind = "moons"
            [search]
            master_seed = 123
            "#,
        )
        .unwrap();
        let sc = cfg.search_config(None).unwrap();
        assert_eq!(sc.criterion.rng_seed, 123);
        // An explicit rng_seed survives a seed override…
        let cfg2: ExperimentConfig = toml::from_str(
            r#"
            [dataset]
            source = "synthetic"
            kind = "moons"
            [criterion]
            rng_seed = 9
            "#,
        )
        .unwrap();
        let sc2 = cfg2.search_config(Some(77)).unwrap();
        assert_eq!(sc2.master_seed, 77);
        assert_eq!(sc2.criterion.rng_seed, 9);
        // …while an omitted one follows the override.
        let sc3 = cfg.search_config(Some(500)).unwrap();
        assert_eq!(sc3.criterion.rng_seed, 500);
    }

    #[test]
    fn invalid_alpha_is_rejected_naming_the_field() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            [dataset]
            source = "synthetic"
            kind = "blobs"
            [criterion]
            kind = "pie"
            alpha = 1.5
            "#,
        )
        .unwrap();
        let err = cfg.search_config(None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha"), "message was: {msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let result: Result<ExperimentConfig, _> = toml::from_str(
            r#"
            [dataset]
            source = "synthetic"
            kind = "blobs"
            [search]
            iterations = 4
            widht = 16
            "#,
        );
        let msg = result.unwrap_err().to_string();
        assert!(msg.contains("widht"), "message was: {msg}");
    }

    #[test]
    fn synthetic_dataset_loads_disjoint_split() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            [dataset]
            source = "synthetic"
            kind = "blobs"
            train_instances = 80
            test_instances = 20
            noise = 0.2
            data_seed = 5
            "#,
        )
        .unwrap();
        let (train, test) = cfg.dataset.load(Path::new(".")).unwrap();
        assert_eq!(train.m(), 80);
        assert_eq!(test.m(), 20);
        assert_eq!(train.d(), 2);
        assert_eq!(train.n_classes(), 2);
    }
}

//! Deterministic fixtures shared by the kernel benchmarks: label vectors
//! for the information measures, a training-free ensemble of fixed
//! prediction tables for the pruning criteria, and a real multi-layer net
//! for the forward/gradient kernels.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use saep_core::ensemble::{EnsembleModel, SubArchitecture, WeightingMode};
use saep_core::nn::DenseNet;
use saep_core::Dataset;

/// A reproducible label vector over `{0, .., alphabet-1}`.
pub fn label_vector(m: usize, alphabet: u32, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| rng.gen_range(0..alphabet)).collect()
}

/// A reproducible dense batch with entries in (-1, 1).
pub fn random_batch(m: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((m, d), |_| rng.gen_range(-1.0..1.0))
}

/// A net whose output on the i-th one-hot probe instance is row i of a
/// fixed random logit table — ensembles built from these have fully
/// controlled predictions without any training.
fn table_net(m: usize, c: usize, rng: &mut ChaCha8Rng) -> DenseNet {
    let eye = Array2::from_shape_fn((m, m), |(i, j)| if i == j { 1.0 } else { 0.0 });
    let out = Array2::from_shape_fn((m, c), |_| rng.gen_range(-4.0..4.0));
    DenseNet::from_params(
        vec![m, m, c],
        vec![eye, out],
        vec![Array1::zeros(m), Array1::zeros(c)],
    )
    .expect("table net dimensions are consistent")
}

/// An `n`-member ensemble over a one-hot probe dataset of `m` instances
/// and `c` classes, weighted per `mode`.
pub fn table_ensemble(
    m: usize,
    c: usize,
    n: usize,
    seed: u64,
    mode: WeightingMode,
) -> (EnsembleModel, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ens = EnsembleModel::new(mode);
    for k in 0..n {
        let net = table_net(m, c, &mut rng);
        ens.append(SubArchitecture::new(k as u32, net, 0.0, 0.0), 0.5)
            .expect("member ids are unique");
    }
    let features = Array2::from_shape_fn((m, m), |(i, j)| if i == j { 1.0 } else { 0.0 });
    let labels: Vec<u32> = (0..m).map(|_| rng.gen_range(0..c as u32)).collect();
    let data = Dataset::new(features, labels, c, "bench-probe").expect("probe dataset is valid");
    (ens, data)
}

//! Fixtures shared by the benchmarks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sensorimotor_core::dataset::{FeatureGrid, SyntheticObjects, SyntheticSpec};
use sensorimotor_core::experiment::train_network;
use sensorimotor_core::{Network, NetworkConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn permutation(r: &mut ChaCha8Rng) -> Vec<usize> {
    let mut o: Vec<usize> = (0..25).collect();
    o.shuffle(r);
    o
}

/// Synthetic objects over a shared 40-feature pool.
pub fn objects(per_class: usize, seed: u64) -> Vec<FeatureGrid> {
    let spec = SyntheticSpec { feature_pool_size: 40, perturbation: 0.1, ..Default::default() };
    let mut r = rng(seed);
    SyntheticObjects::generate(&spec, &mut r).unwrap().dataset(per_class, &mut r)
}

/// A network trained on `grids` in random orders.
pub fn trained(grids: &[FeatureGrid], seed: u64) -> Network {
    let mut r = rng(seed);
    let train: Vec<(&FeatureGrid, Vec<usize>)> = grids.iter().map(|g| (g, permutation(&mut r))).collect();
    train_network(NetworkConfig::default(), &train, seed).unwrap()
}

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sensorimotor_core::dataset::{FeatureGrid, SyntheticObjects, SyntheticSpec};
use sensorimotor_core::experiment::train_network;
use sensorimotor_core::{Network, NetworkConfig, Sdr};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn shuffled(seed: u64) -> Vec<usize> {
    let mut o: Vec<usize> = (0..25).collect();
    o.shuffle(&mut rng(seed));
    o
}

pub fn raster() -> Vec<usize> {
    (0..25).collect()
}

/// Objects built from a shared synthetic pool, `per_class` identical copies each.
pub fn synthetic(classes: usize, pool: usize, per_class: usize, seed: u64) -> Vec<FeatureGrid> {
    let spec = SyntheticSpec { num_classes: classes, feature_pool_size: pool, ..Default::default() };
    let mut r = rng(seed);
    SyntheticObjects::generate(&spec, &mut r).unwrap().dataset(per_class, &mut r)
}

/// Trains one network on `grids`, each learned in a fresh random order.
pub fn train(grids: &[FeatureGrid], classes: usize, seed: u64) -> Network {
    let config = NetworkConfig { num_classes: classes, ..Default::default() };
    let train: Vec<(&FeatureGrid, Vec<usize>)> =
        grids.iter().enumerate().map(|(i, g)| (g, shuffled(seed ^ (i as u64 + 1) << 20))).collect();
    train_network(config, &train, seed).unwrap()
}

pub fn novel_feature(seed: u64) -> Sdr {
    Sdr::random(128, 19, &mut rng(seed ^ 0xdead_beef)).unwrap()
}

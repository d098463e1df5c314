//! Fixtures shared by the benchmarks.

use biascorr::rng::seeded;
use biascorr::{augment, AugmentOptions, AugmentedTrainSet, Dataset, Generator};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

/// `n` Gaussian rows in `d` dimensions, one in ten labelled 1 and shifted by 1.
pub fn imbalanced(n: usize, d: usize, seed: u64) -> Dataset {
    let mut r = seeded(seed);
    let y: Vec<u8> = (0..n).map(|i| u8::from(i % 10 == 0)).collect();
    let x = Array2::from_shape_fn((n, d), |(i, _)| r.sample::<f64, _>(StandardNormal) + f64::from(y[i]));
    Dataset::new(x, y).expect("valid fixture")
}

pub fn augmented(n: usize, d: usize, generator: &Generator, seed: u64) -> AugmentedTrainSet {
    augment(&imbalanced(n, d, seed), generator, &AugmentOptions::default(), &mut seeded(seed + 1)).expect("valid fixture")
}

/// `d x d` symmetric matrix with a planted rank-`r` part plus noise.
pub fn spiked(d: usize, r: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    let u = Array2::from_shape_simple_fn((d, r), || rng.sample::<f64, _>(StandardNormal));
    let e = Array2::from_shape_simple_fn((d, d), || 0.05 * rng.sample::<f64, _>(StandardNormal));
    u.dot(&u.t()) + &e + e.t()
}

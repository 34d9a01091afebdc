//! Synthetic routing data: one Gaussian cluster per expert.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::TokenState;

/// `per_expert` samples around each of `experts` cluster means in `dim` dimensions.
///
/// Cluster `e` is centred at `separation * sigma` along axis `e mod dim`, with isotropic
/// noise of standard deviation `sigma`. Every mean therefore sits `separation` standard
/// deviations from the origin and `separation * √2` from every other mean.
pub fn gaussian_clusters(experts: usize, dim: usize, per_expert: usize, separation: f64, sigma: f64, seed: u64) -> Vec<Vec<TokenState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    (0..experts)
        .map(|e| {
            (0..per_expert)
                .map(|_| {
                    let mut v: Vec<f64> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
                    v[e % dim] += separation * sigma;
                    TokenState(v)
                })
                .collect()
        })
        .collect()
}

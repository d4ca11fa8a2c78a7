//! Seed derivation. Every random draw in a run comes from a ChaCha stream
//! keyed by the run seed plus a purpose tag and counter, so results do not
//! depend on call order elsewhere.

use diffcore::{Matrix, Real};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SHUFFLE: u64 = 2;
pub(crate) const STREAM_NOISE: u64 = 3;
pub(crate) const STREAM_DATA: u64 = 4;
pub(crate) const STREAM_KMEANS: u64 = 5;
pub(crate) const STREAM_EVAL: u64 = 6;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a base seed with a sequence of tags into a new seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_for(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// `rows×cols` matrix of i.i.d. standard normals scaled by `scale`.
pub fn normal_matrix<T: Real>(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| {
        let e: f64 = StandardNormal.sample(rng);
        T::of(scale * e)
    })
}

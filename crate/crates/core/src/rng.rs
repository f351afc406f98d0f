//! Seeded sampling utilities.
//!
//! Every randomized procedure takes an explicit seed. Sub-procedures derive
//! their own seed from a parent seed and a stable label, so adding a stage
//! to a pipeline never shifts the random stream of an existing stage.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

/// Derives a child seed from `seed` and `label` (FNV-1a followed by a
/// splitmix64 finalizer).
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(seed: u64, label: &str) -> SeededRng {
    rng(sub_seed(seed, label))
}

/// Uniformly distributed unit vector in dimension `n`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Uniform point in the closed ball of `radius` around `center`.
pub fn point_in_ball<R: Rng + ?Sized>(
    rng: &mut R,
    center: &DVector<f64>,
    radius: f64,
) -> DVector<f64> {
    let n = center.len();
    let dir = unit_vector(rng, n);
    let u: f64 = rng.random();
    center + dir * (radius * u.powf(1.0 / n as f64))
}

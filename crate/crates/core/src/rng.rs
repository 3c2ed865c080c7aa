//! Seeded random streams. Every generator in the crate draws from a
//! `ChaCha8Rng` so instances and schedules are reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a label, so that
/// e.g. schedule randomness never shares a stream with instance generation.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    // FNV-1a over the label, mixed with the base through splitmix64
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn gaussian<F: Scalar>(rng: &mut SeededRng) -> F {
    let v: f64 = StandardNormal.sample(rng);
    F::of(v)
}

pub fn gaussian_vec<F: Scalar>(rng: &mut SeededRng, n: usize) -> Vec<F> {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn uniform<F: Scalar>(rng: &mut SeededRng, lo: f64, hi: f64) -> F {
    F::of(rng.random_range(lo..hi))
}

pub fn uniform_vec<F: Scalar>(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<F> {
    (0..n).map(|_| uniform(rng, lo, hi)).collect()
}

/// Uniformly distributed unit vector.
pub fn unit_direction<F: Scalar>(rng: &mut SeededRng, n: usize) -> Vec<F> {
    loop {
        let v: Vec<F> = gaussian_vec(rng, n);
        let nv = crate::linalg::norm(&v);
        if nv > F::zero() {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

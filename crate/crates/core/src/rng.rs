//! Seed derivation and the few variates the core needs.
//!
//! Every random stage draws from its own ChaCha stream whose seed is
//! derived from the master seed and a stable text label, so stages and
//! months never share or perturb each other's streams.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math::{cos, ln, sqrt};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed for `label` under `master` (FNV-1a over the label, mixed).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(master ^ splitmix64(h))
}

/// Random stream of one labelled stage.
pub type Stream = ChaCha8Rng;

pub fn stream(master: u64, label: &str) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label))
}

/// Uniform on [0, 1) with 53 bits of precision.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on the open interval (0, 1).
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = uniform(rng);
        if u > 0.0 {
            return u;
        }
    }
}

/// Box-Muller; one variate per call.
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = uniform_open(rng);
    let u2 = uniform(rng);
    sqrt(-2.0 * ln(u1)) * cos(core::f64::consts::TAU * u2)
}

/// Standard logistic variate by inversion.
pub fn logistic<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u = uniform_open(rng);
    ln(u / (1.0 - u))
}

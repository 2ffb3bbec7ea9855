//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose 256-bit
//! key is the tuple `(seed, trial, index, tag)`. Two draws share a stream only
//! if all four words agree, so trials, cells and independent copies never
//! overlap, and any single stream can be regenerated in isolation regardless
//! of how trials were scheduled across threads.
//!
//! Poisson variates use inversion by sequential search for means up to
//! [`POISSON_INVERSION_MAX`] and Hörmann's transformed rejection with
//! squeeze (PTRS) above it. Normal variates use the `rand_distr` ziggurat.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

/// Largest Poisson mean sampled by sequential-search inversion.
pub const POISSON_INVERSION_MAX: f64 = 30.0;

/// Low byte of a stream tag: which family of draws the stream feeds.
pub mod family {
    pub const GAUSSIAN: u64 = 0x01;
    pub const POISSON: u64 = 0x02;
    pub const BROWNIAN: u64 = 0x03;
}

/// Builds a tag from a draw family and a stream number (0 = main stream,
/// 1.. = independent copies).
pub const fn tag(family: u64, stream: u64) -> u64 {
    (stream << 8) | family
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub trial: u64,
    pub index: u64,
    pub tag: u64,
}

impl StreamKey {
    pub fn new(seed: u64, trial: u64, index: u64, tag: u64) -> Self {
        Self { seed, trial, index, tag }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.trial.to_le_bytes());
        key[16..24].copy_from_slice(&self.index.to_le_bytes());
        key[24..].copy_from_slice(&self.tag.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws a Poisson variate with the given mean (returned as `f64`).
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    debug_assert!(mean >= 0.0);
    if mean == 0.0 {
        0.0
    } else if mean <= POISSON_INVERSION_MAX {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    let u: f64 = rng.gen();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u32;
    // the accumulated cdf can stall a few ulps below u when u is within
    // rounding of 1; the cap sits far beyond any mass that matters
    let cap = (mean + 40.0 * mean.sqrt() + 100.0) as u32;
    while u > cdf && k < cap {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k as f64
}

// W. Hörmann, "The transformed rejection method for generating Poisson
// random variables", Insurance: Mathematics and Economics 12 (1993).
fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k;
        }
    }
}

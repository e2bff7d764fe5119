//! Deterministic seed ladder.
//!
//! A master seed is split into independent child streams by hashing the
//! path of labels leading to it (run, iteration, restart, ...). Every stream
//! is a ChaCha8 generator, so the same path always yields the same draws no
//! matter which thread consumes it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Bound applied to uniform draws before any log transform.
pub const UNIFORM_CLAMP: f64 = 1e-10;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedLadder {
    seed: u64,
}

impl SeedLadder {
    pub fn new(master: u64) -> Self {
        Self { seed: master }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child ladder for `label`.
    pub fn child(&self, label: u64) -> Self {
        Self { seed: splitmix(self.seed ^ splitmix(label.wrapping_add(0x5851_F42D_4C95_7F2D))) }
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.seed)
    }
}

/// Seed of run `run` under `master`; shared by every method so the harness
/// and the library agree on the mapping.
pub fn run_seed(master: u64, run: usize) -> u64 {
    SeedLadder::new(master).child(run as u64).seed()
}

/// Uniform draw on `[UNIFORM_CLAMP, 1 - UNIFORM_CLAMP]`.
#[inline]
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    u.clamp(UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP)
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
}

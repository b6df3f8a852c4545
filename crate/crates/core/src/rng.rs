//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream derived
//! from `(master seed, domain, index)`, so results do not depend on the
//! order in which series, frames or particles are processed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Independent random-stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    BankDirect = 1,
    BankReflect = 2,
    EvalDirect = 3,
    EvalReflect = 4,
    Swarm = 5,
    RandomPhase = 6,
    UeDrop = 7,
    Test = 99,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the generator for stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> SimRng {
    let k = splitmix64(seed ^ splitmix64(domain as u64) ^ splitmix64(index.wrapping_mul(0xd6e8_feb8_6659_fd93)));
    ChaCha8Rng::seed_from_u64(k)
}

/// Circularly-symmetric complex Gaussian with the given total variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

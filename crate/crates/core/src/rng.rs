//! Seeded random streams.
//!
//! Every random quantity in a run comes from a `ChaCha8Rng` whose seed is a
//! pure function of the master seed and a path of integer tags, for example
//! `[DROP, d, REALIZATION, r]`. Tags are folded in with SplitMix64, so
//! adding sweep points or changing the thread count never shifts the stream
//! of an existing work item.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The random stream type used throughout the crate.
pub type SeededStream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `master` to obtain a substream seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

/// Independent stream for the work item identified by `path`.
pub fn substream(master: u64, path: &[u64]) -> SeededStream {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

pub fn stream(seed: u64) -> SeededStream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circularly symmetric CN(0, 1): real and imaginary parts each N(0, ½).
#[inline]
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Tags for [`derive_seed`] paths, kept distinct so that paths of equal
/// length from different subsystems never collide.
pub mod tag {
    pub const DROP: u64 = 0xD0;
    pub const LAYOUT: u64 = 0x1A;
    pub const LINKS: u64 = 0x11;
    pub const ANTENNAS: u64 = 0xA7;
    pub const USERS: u64 = 0x05;
    pub const CELL: u64 = 0xCE;
    pub const REALIZATION: u64 = 0x4E;
}

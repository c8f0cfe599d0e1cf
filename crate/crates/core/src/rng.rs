//! Seed derivation. Every random stream in a scenario is keyed by
//! (master seed, epoch, stream) so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

/// Named random streams inside one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    UeNoise = 1,
    AttackerNoise = 2,
    Jammer = 3,
    Array = 4,
    Uplink = 5,
    Topology = 6,
    Trajectory = 7,
    Calibration = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with an epoch index and stream label.
pub fn derive_seed(master: u64, epoch: u64, stream: Stream) -> u64 {
    splitmix64(
        splitmix64(master ^ splitmix64(epoch))
            ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407),
    )
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

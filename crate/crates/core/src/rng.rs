//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream whose seed is a
//! hash of the master seed, a purpose tag and an index. Adding a consumer
//! (a tap, an attack, a noise source) therefore never shifts the draws seen
//! by another one.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Purpose tags for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Data = 1,
    ClientBatches = 2,
    ClientNoise = 3,
    ServerSampling = 4,
    Init = 5,
    Attack = 6,
    Selection = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    splitmix64(b ^ index.wrapping_mul(0x9FB2_1C65_1E98_DF25))
}

pub fn stream(master: u64, stream: Stream, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, stream, index))
}

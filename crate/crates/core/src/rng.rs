//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha20 generator seeded with the
//! user seed and a fixed stream id, so independent pieces (the Gaussian matrix,
//! the regression weights, the noise, column sampling, solver index draws) never
//! share a stream and reproduce bit-for-bit on any platform.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const STREAM_MATRIX: u64 = 0;
pub const STREAM_WEIGHTS: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_SAMPLING: u64 = 3;
pub const STREAM_SOLVER: u64 = 4;

pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

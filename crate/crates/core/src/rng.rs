//! Per-round random streams.
//!
//! Every round draws from its own ChaCha8 stream keyed by `(seed, round)`,
//! so results do not depend on how rounds are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RoundRng = ChaCha8Rng;

pub fn round_rng(seed: u64, round: u64) -> RoundRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

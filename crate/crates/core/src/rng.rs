//! Deterministic per-trial random streams.
//!
//! Every experiment derives one ChaCha12 stream per trial from a base seed
//! and the trial index, so reruns with the same seed are byte-identical and
//! trials are independent regardless of execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

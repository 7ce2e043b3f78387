//! Per-trial random streams.
//!
//! Trial `i` of an experiment seeded with `master` always draws from
//! ChaCha8 keyed by `master`, stream `i`, so results do not depend on how
//! trials are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng
}

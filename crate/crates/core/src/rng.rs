//! Deterministic random streams.
//!
//! Every trial draws from its own ChaCha8 stream: the key comes from the
//! master seed and the 64-bit stream id is the trial index. Distinct trial
//! indices therefore never share keystream blocks, and a trial's draws do not
//! depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Random stream for `trial_index` under `master_seed`.
pub fn trial_stream(master_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `words` into `seed`, giving a new well-mixed 64-bit seed.
///
/// Used to hand each grid point of a sweep its own master seed derived from
/// the sweep seed and the point's coordinates.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix64(seed), |acc, &w| mix64(acc ^ mix64(w)))
}

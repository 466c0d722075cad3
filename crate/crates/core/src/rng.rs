//! Counter-based random streams.
//!
//! Every environment owns a ChaCha stream keyed by the root seed and its
//! environment index. The keystream position is the draw counter, so the
//! values an environment sees never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type EnvRng = ChaCha8Rng;

/// Stream id reserved for data that belongs to no single environment
/// (benchmark actions, policy sampling).
pub const AUX_STREAM: u64 = u64::MAX;

/// Independent stream number `stream` under `root_seed`.
pub fn stream(root_seed: u64, stream: u64) -> EnvRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(stream);
    rng
}

/// Stream of environment `env_id`.
pub fn env_stream(root_seed: u64, env_id: usize) -> EnvRng {
    stream(root_seed, env_id as u64)
}

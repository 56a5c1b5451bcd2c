//! Counter-based random streams.
//!
//! Every random draw is keyed by `(seed, stream)`, so a trial produces the
//! same numbers no matter which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for step `step` of trial `trial`; steps are limited to 2³².
pub fn trial_step_stream(trial: u64, step: u64) -> u64 {
    debug_assert!(step < 1 << 32);
    (trial << 32) | step
}

/// Streams reserved for data generation (synthetic factors, points, x*).
/// Kept at the top of the id space, far from trial streams.
pub mod reserved {
    pub const LEFT_FACTOR: u64 = u64::MAX;
    pub const RIGHT_FACTOR: u64 = u64::MAX - 1;
    pub const POINTS: u64 = u64::MAX - 2;
    pub const SOLUTION: u64 = u64::MAX - 3;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = stream_rng(7, 3).random_iter().take(4).collect();
        let b: Vec<u64> = stream_rng(7, 3).random_iter().take(4).collect();
        let c: Vec<u64> = stream_rng(7, 4).random_iter().take(4).collect();
        let d: Vec<u64> = stream_rng(8, 3).random_iter().take(4).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn trial_step_ids_do_not_collide() {
        assert_ne!(trial_step_stream(1, 0), trial_step_stream(0, 1));
        assert_eq!(trial_step_stream(2, 5), (2 << 32) | 5);
    }
}

//! Deterministic parallel map-reduce over trial indices.
//!
//! Trials are grouped into fixed-size chunks and chunk results are merged
//! with a fixed pairwise tree. The grouping depends only on the trial
//! count, so results are bit-identical for any number of threads.

use rayon::prelude::*;

const CHUNK: usize = 4;
const WAVE: usize = 16;

/// Environment variable limiting trial parallelism.
pub const THREADS_ENV: &str = "SKETCHLAB_THREADS";

/// Installs a global rayon pool sized from `SKETCHLAB_THREADS`, if set.
/// Returns the configured thread count.
pub fn configure_threads_from_env() -> Option<usize> {
    let threads = std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok()?;
    let threads = threads.max(1);
    // Fails only if a global pool already exists; that pool stays in effect.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Some(threads)
}

/// Binary-counter pairwise reduction: merges equal-sized partial results.
struct PairwiseStack<T> {
    levels: Vec<(u32, T)>,
}

impl<T> PairwiseStack<T> {
    fn new() -> Self {
        PairwiseStack { levels: Vec::new() }
    }

    fn push(&mut self, value: T, combine: &impl Fn(T, T) -> T) {
        let mut level = 0;
        let mut value = value;
        while let Some(&(top, _)) = self.levels.last() {
            if top != level {
                break;
            }
            let (_, earlier) = self.levels.pop().unwrap();
            value = combine(earlier, value);
            level += 1;
        }
        self.levels.push((level, value));
    }

    fn finish(self, combine: &impl Fn(T, T) -> T) -> Option<T> {
        let mut acc: Option<T> = None;
        for (_, value) in self.levels.into_iter().rev() {
            acc = Some(match acc {
                None => value,
                Some(later) => combine(value, later),
            });
        }
        acc
    }
}

/// Maps `0..count` through `map` and merges in a fixed order.
///
/// `combine(a, b)` always receives `a` from lower indices than `b`.
pub fn ordered_map_reduce<T, M, C>(count: usize, map: M, combine: C) -> Option<T>
where
    T: Send,
    M: Fn(usize) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let mut stack = PairwiseStack::new();
    let mut chunk = 0;
    while chunk < chunks {
        let wave_end = (chunk + WAVE).min(chunks);
        let partials: Vec<T> = (chunk..wave_end)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(count);
                (start + 1..end).fold(map(start), |acc, i| combine(acc, map(i)))
            })
            .collect();
        for p in partials {
            stack.push(p, &combine);
        }
        chunk = wave_end;
    }
    stack.finish(&combine)
}

/// Pairwise sum with a tree shape that depends only on the slice length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1) as f64).sqrt())
}

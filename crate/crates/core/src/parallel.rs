//! Seed handling and deterministic fan-out.
//!
//! Every random object `i` of a run draws from its own ChaCha stream
//! `(seed, i)`, so results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator for item `index` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Evaluates `f(0..count)` on `jobs` threads, returning results in index
/// order.
pub fn parallel_map<T, F>(count: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.clamp(1, count.max(1));
    if jobs == 1 {
        return (0..count).map(f).collect();
    }
    let f = &f;
    let mut out: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = count.div_ceil(jobs);
        for (c, slot) in out.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                for (j, s) in slot.iter_mut().enumerate() {
                    *s = Some(f(c * chunk + j));
                }
            });
        }
    });
    out.into_iter().map(|x| x.expect("every slot is filled")).collect()
}

/// Logical core count, the default worker count.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let draw = |i: usize| stream_rng(9, i as u64).random::<u64>();
        let one = parallel_map(37, 1, draw);
        let many = parallel_map(37, 4, draw);
        assert_eq!(one, many);
        assert_ne!(one[0], one[1]);
    }
}

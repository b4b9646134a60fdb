//! Chunked random streams.
//!
//! Draw `k` of a run with seed `s` always comes from chunk `k / CHUNK_LEN`,
//! generated by a ChaCha8 generator keyed by `s` on stream number equal to
//! the chunk index. Chunks are filled independently and concatenated in
//! index order, so results do not depend on how rayon schedules them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Draws per chunk.
pub const CHUNK_LEN: usize = 4096;

pub fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn chunk_count(count: usize) -> usize {
    count.div_ceil(CHUNK_LEN)
}

/// Number of draws in chunk `chunk` of a run of `count` draws.
pub fn chunk_len(count: usize, chunk: usize) -> usize {
    let start = chunk * CHUNK_LEN;
    CHUNK_LEN.min(count.saturating_sub(start))
}

/// Runs `fill(rng, len)` for every chunk of `streams` in parallel and
/// returns the per-chunk outputs in stream order.
pub fn map_chunks<T, F>(seed: u64, streams: &[(u64, usize)], fill: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    streams
        .par_iter()
        .map(|&(stream, len)| {
            let mut rng = chunk_rng(seed, stream);
            fill(&mut rng, len)
        })
        .collect()
}

/// The (stream, length) layout of a run of `count` draws.
pub fn layout(count: usize) -> Vec<(u64, usize)> {
    (0..chunk_count(count))
        .map(|c| (c as u64, chunk_len(count, c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn layout_covers_count() {
        let l = layout(2 * CHUNK_LEN + 5);
        assert_eq!(l.len(), 3);
        assert_eq!(l.iter().map(|c| c.1).sum::<usize>(), 2 * CHUNK_LEN + 5);
        assert_eq!(l[2], (2, 5));
        assert!(layout(0).is_empty());
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = chunk_rng(7, 0).random();
        let b: u64 = chunk_rng(7, 1).random();
        let c: u64 = chunk_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn parallel_map_is_schedule_independent() {
        let l = layout(5 * CHUNK_LEN);
        let f = |rng: &mut ChaCha8Rng, len: usize| (0..len).map(|_| rng.random::<f64>()).sum::<f64>();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let two = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let x = one.install(|| map_chunks(3, &l, f));
        let y = two.install(|| map_chunks(3, &l, f));
        assert_eq!(x, y);
    }
}

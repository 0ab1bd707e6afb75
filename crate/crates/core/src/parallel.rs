//! Deterministic chunked parallelism capped by `QCR_THREADS`.

use std::ops::Range;

pub const THREADS_ENV: &str = "QCR_THREADS";

/// Worker count from `QCR_THREADS`; unset, invalid or `0` means sequential.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

/// Splits `0..len` into fixed chunks, evaluates `f` on each and returns the
/// results in chunk order. Chunk boundaries do not depend on the thread count,
/// so reductions over the result are reproducible.
pub fn map_chunks<T, F>(len: usize, chunk: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let chunk = chunk.max(1);
    let ranges: Vec<Range<usize>> = (0..len.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(len))
        .collect();
    let threads = threads.clamp(1, ranges.len().max(1));
    if threads == 1 {
        return ranges.into_iter().map(&f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..ranges.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let ranges = &ranges;
                let f = &f;
                s.spawn(move || {
                    (w..ranges.len())
                        .step_by(threads)
                        .map(|i| (i, f(ranges[i].clone())))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, v) in h.join().expect("worker panicked") {
                slots[i] = Some(v);
            }
        }
    });
    slots.into_iter().map(|v| v.expect("every chunk evaluated")).collect()
}

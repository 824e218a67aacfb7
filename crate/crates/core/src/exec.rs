//! Execution helpers. With the `parallel` feature these fan out over rayon;
//! without it the same partitioning runs sequentially on the calling thread.

use std::ops::Range;

use crate::error::{IrisError, Result};

/// Splits `0..len` into at most `parts` contiguous, near-equal, non-empty blocks.
///
/// The blocks cover `0..len` exactly once; earlier blocks receive the remainder.
pub fn block_ranges(len: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1).min(len);
    if parts == 0 {
        return Vec::new();
    }
    let base = len / parts;
    let extra = len % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let size = base + usize::from(p < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}

/// Cuts `data` into the disjoint mutable slices described by `ranges`.
///
/// `ranges` must be sorted, contiguous, and start at zero.
pub(crate) fn split_blocks<'a, T>(mut data: &'a mut [T], ranges: &[Range<usize>]) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(ranges.len());
    let mut consumed = 0;
    for r in ranges {
        debug_assert_eq!(r.start, consumed);
        let (head, tail) = std::mem::take(&mut data).split_at_mut(r.end - r.start);
        out.push(head);
        data = tail;
        consumed = r.end;
    }
    out
}

/// Ordered map over a slice.
pub(crate) fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Ordered map over an index range.
pub(crate) fn map_range<U, F>(range: Range<usize>, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        range.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(f).collect()
    }
}

/// Fixed-size pool of workers. Each call to [`WorkerPool::run_blocks`] hands
/// every worker one disjoint block and returns only after all of them finish.
pub struct WorkerPool {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool")
            .field("workers", &self.workers)
            .finish()
    }
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(IrisError::InvalidArgument(
                "worker_count must be at least 1".into(),
            ));
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("bpnn-worker-{i}"))
                .build()
                .map_err(|e| IrisError::Pool(e.to_string()))?;
            Ok(WorkerPool { workers, pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(WorkerPool { workers })
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f(block_range, block)` once per range over disjoint slices of `data`.
    pub fn run_blocks<T, F>(&self, data: &mut [T], ranges: &[Range<usize>], f: F)
    where
        T: Send,
        F: Fn(Range<usize>, &mut [T]) + Sync,
    {
        let blocks = split_blocks(data, ranges);
        #[cfg(feature = "parallel")]
        {
            if blocks.len() <= 1 {
                for (r, b) in ranges.iter().zip(blocks) {
                    f(r.clone(), b);
                }
                return;
            }
            let f = &f;
            let joined = std::sync::atomic::AtomicUsize::new(0);
            let joined_ref = &joined;
            let expected = blocks.len();
            self.pool.scope(|s| {
                for (r, b) in ranges.iter().zip(blocks) {
                    s.spawn(move |_| {
                        f(r.clone(), b);
                        joined_ref.fetch_add(1, std::sync::atomic::Ordering::Release);
                    });
                }
            });
            // stage barrier: the next stage may only start once every block is written
            debug_assert_eq!(joined.load(std::sync::atomic::Ordering::Acquire), expected);
        }
        #[cfg(not(feature = "parallel"))]
        {
            for (r, b) in ranges.iter().zip(blocks) {
                f(r.clone(), b);
            }
        }
    }
}

/// Default worker count: the host's available parallelism.
pub fn available_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn blocks_are_a_disjoint_cover(len in 0usize..2000, parts in 1usize..64) {
            let blocks = block_ranges(len, parts);
            let mut owner = vec![0u32; len];
            for b in &blocks {
                prop_assert!(!b.is_empty());
                for i in b.clone() {
                    owner[i] += 1;
                }
            }
            prop_assert!(owner.iter().all(|&c| c == 1));
            prop_assert!(blocks.len() <= parts);
            if len > 0 {
                let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
                let max = *sizes.iter().max().unwrap();
                let min = *sizes.iter().min().unwrap();
                prop_assert!(max - min <= 1);
            }
        }
    }

    #[test]
    fn run_blocks_touches_every_element_once() {
        let pool = WorkerPool::new(3).unwrap();
        let mut data = vec![0u32; 10];
        let ranges = block_ranges(10, 3);
        pool.run_blocks(&mut data, &ranges, |r, block| {
            for (slot, i) in block.iter_mut().zip(r) {
                *slot += i as u32 + 1;
            }
        });
        assert_eq!(data, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(WorkerPool::new(0).is_err());
    }
}

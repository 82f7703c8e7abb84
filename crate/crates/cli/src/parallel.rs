//! Deterministic fixed-chunk parallelism.
//!
//! Work is split into chunks of a fixed size that does not depend on the
//! worker count; workers pull chunk indices from a shared counter and each
//! chunk's result is stored by index. Since every chunk is a pure function
//! of its index range, the concatenated result is identical for any worker
//! count or scheduling order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Monte-Carlo sample indices per chunk; fixed so artifacts never depend on
/// the worker count.
pub const SAMPLE_CHUNK: usize = 65_536;

/// Apply `f` to `[lo, hi)` index ranges of `0..total` in chunks of
/// `chunk_size`, concatenating results in chunk order.
pub fn map_chunked<T, F>(total: usize, chunk_size: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> Vec<T> + Sync,
{
    let n_chunks = total.div_ceil(chunk_size);
    if n_chunks <= 1 || workers <= 1 {
        return f(0, total);
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Vec<T>>>> = (0..n_chunks).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n_chunks) {
            scope.spawn(|| loop {
                let c = next.fetch_add(1, Ordering::Relaxed);
                if c >= n_chunks {
                    break;
                }
                let lo = c * chunk_size;
                let hi = (lo + chunk_size).min(total);
                let out = f(lo, hi);
                *slots[c].lock().unwrap() = Some(out);
            });
        }
    });
    let mut result = Vec::with_capacity(total);
    for slot in slots {
        result.extend(slot.into_inner().unwrap().expect("chunk computed"));
    }
    result
}

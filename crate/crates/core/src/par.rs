//! Deterministic chunked parallelism.
//!
//! Work is split into fixed, index-addressed chunks; each chunk owns its own
//! random substream and its result slot. Chunks may execute on any thread in
//! any order, but results are always combined in chunk order, so output is
//! bit-identical for every thread count — and identical to the sequential
//! build (`--no-default-features`).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(0..n_chunks)` and returns results in chunk order.
pub fn map_chunks<T, F>(n_chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n_chunks).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_chunks).map(f).collect()
    }
}

/// Fills `buf` by slicing it into pieces of `chunk_len` (last may be short)
/// and running `fill(chunk_index, piece)` on each.
pub fn fill_chunks<T, F>(buf: &mut [T], chunk_len: usize, fill: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    {
        buf.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, piece)| fill(i, piece));
    }
    #[cfg(not(feature = "parallel"))]
    {
        buf.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, piece)| fill(i, piece));
    }
}

/// Configures the global worker pool. `threads == 0` keeps the library
/// default (all cores). Returns an error message if the pool was already
/// initialized with a different size; callers may ignore it when re-running
/// commands in-process.
pub fn configure_threads(threads: usize) -> Result<(), String> {
    if threads == 0 {
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}

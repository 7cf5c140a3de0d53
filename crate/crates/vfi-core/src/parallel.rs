//! Data-parallel execution helpers.
//!
//! Every hot loop in the crate is expressed through the helpers here so that
//! the same code runs on rayon (feature `parallel`, on by default) or as plain
//! sequential iteration (feature disabled, or [`set_parallel`]`(false)` at
//! runtime, which the benches use to compare both modes in one process).
//!
//! Determinism rule: helpers only split work into disjoint output chunks and
//! each chunk is filled by exactly one closure call, so results are bit-equal
//! across thread counts and between the parallel and sequential modes. No
//! helper performs a floating-point tree reduction.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enable or disable rayon dispatch at runtime. No-op when the `parallel`
/// feature is compiled out.
pub fn set_parallel(enabled: bool) {
    #[cfg(feature = "parallel")]
    PARALLEL.store(enabled, Ordering::Relaxed);
    #[cfg(not(feature = "parallel"))]
    let _ = enabled;
}

/// True when work will actually be dispatched onto the rayon pool.
pub fn parallel_enabled() -> bool {
    #[cfg(feature = "parallel")]
    {
        PARALLEL.load(Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Below this many output elements the rayon dispatch overhead outweighs the
/// work; such calls stay sequential even in parallel mode.
const MIN_PAR_LEN: usize = 4096;

/// Split `out` into equal `chunk_len` pieces and fill each by index.
///
/// `f(chunk_index, chunk)` must fully determine the chunk contents.
pub fn for_each_chunk_mut<F>(out: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(chunk_len > 0 && out.len() % chunk_len == 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= MIN_PAR_LEN && out.len() > chunk_len {
        out.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    for (i, c) in out.chunks_mut(chunk_len).enumerate() {
        f(i, c);
    }
}

/// Chunk size for flat elementwise maps.
const ELEM_CHUNK: usize = 32 * 1024;

/// `out[i] = f(src[i])`, chunked.
pub fn map_into<F>(out: &mut [f64], src: &[f64], f: F)
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    assert_eq!(out.len(), src.len());
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= MIN_PAR_LEN {
        out.par_chunks_mut(ELEM_CHUNK)
            .zip(src.par_chunks(ELEM_CHUNK))
            .for_each(|(o, s)| {
                for (ov, &sv) in o.iter_mut().zip(s) {
                    *ov = f(sv);
                }
            });
        return;
    }
    for (ov, &sv) in out.iter_mut().zip(src) {
        *ov = f(sv);
    }
}

/// `out[i] = f(a[i], b[i])`, chunked.
pub fn zip_into<F>(out: &mut [f64], a: &[f64], b: &[f64], f: F)
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    assert_eq!(out.len(), a.len());
    assert_eq!(out.len(), b.len());
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= MIN_PAR_LEN {
        out.par_chunks_mut(ELEM_CHUNK)
            .zip(a.par_chunks(ELEM_CHUNK).zip(b.par_chunks(ELEM_CHUNK)))
            .for_each(|(o, (ca, cb))| {
                for ((ov, &av), &bv) in o.iter_mut().zip(ca).zip(cb) {
                    *ov = f(av, bv);
                }
            });
        return;
    }
    for ((ov, &av), &bv) in out.iter_mut().zip(a).zip(b) {
        *ov = f(av, bv);
    }
}

/// `out[i] = f(i)` with the global element index, chunked.
pub fn fill_with_index<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= MIN_PAR_LEN {
        out.par_chunks_mut(ELEM_CHUNK)
            .enumerate()
            .for_each(|(chunk, o)| {
                let base = chunk * ELEM_CHUNK;
                for (j, ov) in o.iter_mut().enumerate() {
                    *ov = f(base + j);
                }
            });
        return;
    }
    for (i, ov) in out.iter_mut().enumerate() {
        *ov = f(i);
    }
}

/// Run `f(i)` for `i in 0..n` where every call writes to disjoint state.
///
/// Caller is responsible for the disjointness (e.g. via raw output pointers
/// wrapped in a `Sync` cell); prefer [`for_each_chunk_mut`] when the output is
/// a single contiguous buffer.
pub fn for_each_index<F>(n: usize, min_len: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && n * min_len.max(1) >= MIN_PAR_LEN && n > 1 {
        (0..n).into_par_iter().for_each(f);
        return;
    }
    let _ = min_len;
    for i in 0..n {
        f(i);
    }
}

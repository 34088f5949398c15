//! Deterministic data-parallel helpers.
//!
//! Reductions are chunked with a fixed chunk size and the per-chunk partials
//! are combined sequentially in chunk order, so the floating-point result is
//! identical whether the `parallel` feature is on or off and independent of
//! the rayon thread count. Verification runs must be byte-reproducible, which
//! rules out order-free parallel reductions over floats.

use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk size for fixed-order reductions.
pub const CHUNK: usize = 2048;

/// Sum of `f(i)` over `0..len` with a fixed reduction tree.
pub fn sum_c64<F>(len: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let partials = partial_sums(len, &f);
    partials.into_iter().sum()
}

/// Real-valued variant of [`sum_c64`].
pub fn sum_f64<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = chunk_ranges(len);
    let fold = |range: std::ops::Range<usize>| range.map(&f).sum::<f64>();
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = chunks.into_par_iter().map(fold).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = chunks.into_iter().map(fold).collect();
    partials.into_iter().sum()
}

/// `map`-collect over an index range, parallel when the feature is enabled.
pub fn map_collect<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Sequential reference implementations, kept unconditionally for the
/// criterion benches that compare both execution paths.
pub mod seq {
    use super::*;

    pub fn sum_c64<F>(len: usize, f: F) -> Complex64
    where
        F: Fn(usize) -> Complex64,
    {
        chunk_ranges(len)
            .into_iter()
            .map(|r| r.map(&f).sum::<Complex64>())
            .sum()
    }

    pub fn map_collect<T, F>(len: usize, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T,
    {
        (0..len).map(f).collect()
    }
}

fn chunk_ranges(len: usize) -> Vec<std::ops::Range<usize>> {
    (0..len.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(len))
        .collect()
}

fn partial_sums<F>(len: usize, f: &F) -> Vec<Complex64>
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let chunks = chunk_ranges(len);
    let fold = |range: std::ops::Range<usize>| range.map(f).sum::<Complex64>();
    #[cfg(feature = "parallel")]
    {
        chunks.into_par_iter().map(fold).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        chunks.into_iter().map(fold).collect()
    }
}

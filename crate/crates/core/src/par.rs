//! Deterministic data-parallel reductions.
//!
//! Work is split into fixed-size chunks whose boundaries do not depend on the
//! number of threads. Each chunk is reduced sequentially and the chunk results
//! are combined left to right, so sums are bit-identical with and without the
//! `parallel` feature and across thread counts.

use std::ops::Range;

use crate::error::Result;

/// Chunk length used by every reduction in the crate.
pub const CHUNK: usize = 256;

fn chunk_ranges(n: usize) -> impl Iterator<Item = Range<usize>> + Clone {
    (0..n.div_ceil(CHUNK)).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(n))
}

/// Map every chunk of `0..n` through `f`, preserving chunk order.
pub fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let ranges: Vec<Range<usize>> = chunk_ranges(n).collect();
        ranges.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        chunk_ranges(n).map(f).collect()
    }
}

/// Sum `term(i)` over `0..n` with a fixed chunked left-to-right order.
pub fn chunked_sum<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(n, |r| {
        let mut acc = 0.0;
        for i in r {
            acc += term(i);
        }
        acc
    })
    .into_iter()
    .fold(0.0, |acc, s| acc + s)
}

/// Index and value of the best score over `0..n`.
///
/// `better(a, b)` says whether score `a` strictly beats `b`; ties keep the
/// smaller index, so the result does not depend on scheduling.
pub fn best_index<F, B>(n: usize, score: F, better: B) -> Result<Option<(usize, f64)>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
    B: Fn(f64, f64) -> bool + Sync + Send,
{
    let partial = map_chunks(n, |r| -> Result<Option<(usize, f64)>> {
        let mut best: Option<(usize, f64)> = None;
        for i in r {
            let v = score(i)?;
            match best {
                Some((_, b)) if !better(v, b) => {}
                _ => best = Some((i, v)),
            }
        }
        Ok(best)
    });
    let mut best: Option<(usize, f64)> = None;
    for p in partial {
        if let Some((i, v)) = p? {
            match best {
                Some((_, b)) if !better(v, b) => {}
                _ => best = Some((i, v)),
            }
        }
    }
    Ok(best)
}

/// Run `f` on every item, in parallel when enabled, keeping input order.
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
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

//! Thin indirection over rayon so every data-parallel loop in the crate has a
//! sequential twin. The `parallel` feature (default) routes `map_collect` and
//! `for_each_mut` through rayon; without it they fall back to the `_seq`
//! versions. The `_seq` functions are always compiled so benchmarks can
//! compare both code paths in one binary.
//!
//! Reductions stay deterministic: parallel maps collect in input order and
//! callers fold the resulting `Vec` sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_collect_seq(items, f)
    }
}

/// Sequential twin of [`map_collect`].
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map `f` over an index range, preserving order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_range_seq(n, f)
    }
}

/// Sequential twin of [`map_range`].
pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Apply `f` to disjoint chunks of `data` in parallel.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for_each_chunk_mut_seq(data, chunk, f);
    }
}

/// Sequential twin of [`for_each_chunk_mut`].
pub fn for_each_chunk_mut_seq<T, F>(data: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let a = map_collect(&xs, |x| x * x + 1.0);
        let b = map_collect_seq(&xs, |x| x * x + 1.0);
        assert_eq!(a, b);
        let c = map_range(1000, |i| (i * 7) % 13);
        let d = map_range_seq(1000, |i| (i * 7) % 13);
        assert_eq!(c, d);
    }

    #[test]
    fn chunked_mutation_matches() {
        let mut a: Vec<f64> = (0..256).map(|i| i as f64).collect();
        let mut b = a.clone();
        for_each_chunk_mut(&mut a, 16, |i, c| {
            for v in c.iter_mut() {
                *v += i as f64;
            }
        });
        for_each_chunk_mut_seq(&mut b, 16, |i, c| {
            for v in c.iter_mut() {
                *v += i as f64;
            }
        });
        assert_eq!(a, b);
    }
}

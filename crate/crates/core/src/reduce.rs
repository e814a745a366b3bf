//! Order-fixed parallel summation.
//!
//! Indices are cut into chunks of [`CHUNK_LEN`] at fixed boundaries. Each chunk
//! is summed left to right, possibly on different workers, and the chunk sums
//! are then added in ascending chunk order. The result is bit-identical for any
//! rayon pool size.

use rayon::prelude::*;

pub const CHUNK_LEN: usize = 4096;

/// Sums `values` with the fixed chunk layout.
pub fn ordered_sum(values: &[f64]) -> f64 {
    if values.len() <= CHUNK_LEN {
        return values.iter().sum();
    }
    let partials: Vec<f64> = values
        .par_chunks(CHUNK_LEN)
        .map(|chunk| chunk.iter().sum::<f64>())
        .collect();
    partials.iter().sum()
}

/// Sums `term(k)` for `k in 0..len` with the same chunk layout as
/// [`ordered_sum`].
pub fn ordered_sum_by<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if len <= CHUNK_LEN {
        return (0..len).map(&term).sum();
    }
    let n_chunks = len.div_ceil(CHUNK_LEN);
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK_LEN;
            let hi = (lo + CHUNK_LEN).min(len);
            (lo..hi).map(&term).sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

/// Fills `out[k] = term(k)` in parallel over fixed chunks.
pub fn fill_by<F>(out: &mut [f64], term: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    out.par_chunks_mut(CHUNK_LEN)
        .enumerate()
        .for_each(|(c, chunk)| {
            let base = c * CHUNK_LEN;
            for (k, slot) in chunk.iter_mut().enumerate() {
                *slot = term(base + k);
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sequential_reference(values: &[f64]) -> f64 {
        let mut total = 0.0;
        for chunk in values.chunks(CHUNK_LEN) {
            let mut s = 0.0;
            for v in chunk {
                s += v;
            }
            total += s;
        }
        total
    }

    fn awkward(n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| ((k as f64 * 0.7).sin() * 1e8).powi(if k % 3 == 0 { 1 } else { -1 }))
            .collect()
    }

    #[test]
    fn matches_chunked_sequential_sum_bitwise() {
        let v = awkward(100_003);
        let expected = sequential_reference(&v);
        for threads in [1, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let got = pool.install(|| ordered_sum(&v));
            assert_eq!(got.to_bits(), expected.to_bits());
            let got_by = pool.install(|| ordered_sum_by(v.len(), |k| v[k]));
            assert_eq!(got_by.to_bits(), expected.to_bits());
        }
    }

    #[test]
    fn short_inputs() {
        assert_eq!(ordered_sum(&[]), 0.0);
        assert_eq!(ordered_sum(&[1.5, 2.5]), 4.0);
        assert_eq!(ordered_sum_by(0, |_| 1.0), 0.0);
    }

    #[test]
    fn fill_by_covers_every_slot() {
        let mut out = vec![0.0; 9000];
        fill_by(&mut out, |k| k as f64);
        assert!(out.iter().enumerate().all(|(k, &v)| v == k as f64));
    }
}

//! Deterministic chunked Monte Carlo driver.
//!
//! Work is split into fixed-size chunks, each with its own keyed stream.
//! Chunk accumulators are merged by a balanced pairwise tree in chunk order,
//! so the reduction is identical for any number of rayon workers.

use rayon::prelude::*;

use crate::error::Result;
use crate::rng::{stream, SimRng};
use crate::stats::{Moments, PairMoments};

pub const CHUNK: usize = 4096;

/// Something that can absorb another partial result.
pub trait Merge: Send {
    fn merge_from(&mut self, other: Self);
}

impl Merge for Moments {
    fn merge_from(&mut self, other: Self) {
        self.merge(&other);
    }
}

impl Merge for PairMoments {
    fn merge_from(&mut self, other: Self) {
        self.merge(&other);
    }
}

impl Merge for u64 {
    fn merge_from(&mut self, other: Self) {
        *self += other;
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge_from(&mut self, other: Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.iter_mut().zip(other) {
            a.merge_from(b);
        }
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge_from(&mut self, other: Self) {
        self.0.merge_from(other.0);
        self.1.merge_from(other.1);
    }
}

impl<A: Merge, B: Merge, C: Merge> Merge for (A, B, C) {
    fn merge_from(&mut self, other: Self) {
        self.0.merge_from(other.0);
        self.1.merge_from(other.1);
        self.2.merge_from(other.2);
    }
}

fn tree_merge<A: Merge>(mut parts: Vec<A>) -> Option<A> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.merge_from(b);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop()
}

/// Run `n` draws of `step` split into keyed chunks and merge the results.
///
/// `step` receives the chunk stream and the chunk accumulator and performs a
/// single draw.
pub fn run<A, I, F>(n: usize, seed: u64, tag: u64, key: u64, init: I, step: F) -> Result<A>
where
    A: Merge,
    I: Fn() -> A + Sync,
    F: Fn(&mut SimRng, &mut A) -> Result<()> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, tag, key, c as u64);
            let mut acc = init();
            let todo = CHUNK.min(n - c * CHUNK);
            for _ in 0..todo {
                step(&mut rng, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<A>>>()?;
    Ok(tree_merge(parts).unwrap_or_else(init))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn result_independent_of_thread_count() {
        let f = || {
            run(50_000, 9, 1, 0, Moments::new, |rng, m| {
                m.push(rng.random::<f64>());
                Ok(())
            })
            .unwrap()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f);
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(f);
        assert_eq!(one, four);
        assert_eq!(one.n, 50_000);
    }
}

//! Chunked Monte Carlo averaging.
//!
//! A budget of `n` samples is split into fixed-size chunks; chunk `c` draws from
//! its own stream seeded with `derive_seed(seed, c)`. Chunks may be evaluated on
//! any number of workers, and are merged in chunk order, so the estimate depends
//! only on `(seed, n)`.

use rayon::prelude::*;

use crate::distributions::InputDistribution;
use crate::rng::{derive_seed, rng_from_seed};

pub const CHUNK: usize = 8192;

/// Running mean and sum of squared deviations per coordinate.
#[derive(Debug, Clone)]
pub struct Moments {
    pub n: usize,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for ((m, s), &xi) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = xi - *m;
            *m += delta * inv;
            *s += delta * (xi - *m);
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let n = self.n + other.n;
        let wa = self.n as f64;
        let wb = other.n as f64;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * wb / n as f64;
            self.m2[i] += other.m2[i] + delta * delta * wa * wb / n as f64;
        }
        self.n = n;
    }

    /// Unbiased sample variance per coordinate.
    pub fn variance(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.mean.len()];
        }
        self.m2.iter().map(|s| s / (self.n - 1) as f64).collect()
    }

    pub fn std_err(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.variance().iter().map(|v| (v.max(0.0) / n).sqrt()).collect()
    }
}

/// Averages `f(x)` over `n` draws of `x ~ dist`. `f` writes `out_dim` values.
pub fn estimate<F>(dist: &InputDistribution, n: usize, seed: u64, out_dim: usize, f: F) -> Moments
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = rng_from_seed(derive_seed(seed, c as u64));
            let mut x = vec![0.0; dist.dim()];
            let mut out = vec![0.0; out_dim];
            let mut acc = Moments::new(out_dim);
            for _ in 0..len {
                dist.sample_into(&mut rng, &mut x);
                f(&x, &mut out);
                acc.push(&out);
            }
            acc
        })
        .collect();
    let mut total = Moments::new(out_dim);
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Same as [`estimate`] but over a fixed, row-major sample matrix.
pub fn estimate_on<F>(samples: &[f64], dim: usize, out_dim: usize, f: F) -> Moments
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let parts: Vec<Moments> = samples
        .par_chunks(CHUNK * dim)
        .map(|block| {
            let mut out = vec![0.0; out_dim];
            let mut acc = Moments::new(out_dim);
            for x in block.chunks_exact(dim) {
                f(x, &mut out);
                acc.push(&out);
            }
            acc
        })
        .collect();
    let mut total = Moments::new(out_dim);
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Draws `n` samples into a row-major matrix, chunk-seeded like [`estimate`].
pub fn draw_samples(dist: &InputDistribution, n: usize, seed: u64) -> Vec<f64> {
    let d = dist.dim();
    let mut out = vec![0.0; n * d];
    out.par_chunks_mut(CHUNK * d)
        .enumerate()
        .for_each(|(c, block)| {
            let mut rng = rng_from_seed(derive_seed(seed, c as u64));
            for x in block.chunks_exact_mut(d) {
                dist.sample_into(&mut rng, x);
            }
        });
    out
}

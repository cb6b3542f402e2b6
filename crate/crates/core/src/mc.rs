//! Reproducible parallel Monte Carlo.
//!
//! Draws are split into `workers` fixed shares. Worker `i` owns the ChaCha8
//! stream `i` of the generator seeded with `seed`, so the estimate depends only
//! on `(seed, workers)` and not on how rayon schedules the shares. Per-worker
//! accumulators are merged in worker order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type McRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub stderr: f64,
    /// Unbiased sample variance of a single draw.
    pub variance: f64,
    pub n: u64,
    pub seed: u64,
    pub worker_count: usize,
}

impl MCEstimate {
    /// Number of standard errors separating the mean from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr
    }

    pub fn within_sigma(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.stderr
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }
}

/// Default worker count: the rayon pool size.
pub fn default_workers() -> usize {
    rayon::current_num_threads().max(1)
}

/// The generator for worker `index`.
pub fn worker_rng(seed: u64, index: usize) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Estimates `E[draw(rng)]` from `n` draws split over `workers` substreams.
pub fn estimate<F>(n: u64, seed: u64, workers: usize, draw: F) -> Result<MCEstimate>
where
    F: Fn(&mut McRng) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::InvalidParameter(format!("Monte Carlo needs n >= 2 draws, got {n}")));
    }
    if workers == 0 {
        return Err(Error::InvalidParameter("worker count must be at least 1".into()));
    }
    let base = n / workers as u64;
    let extra = n % workers as u64;
    let parts: Vec<Moments> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let share = base + u64::from((w as u64) < extra);
            let mut rng = worker_rng(seed, w);
            let mut m = Moments::default();
            for _ in 0..share {
                m.push(draw(&mut rng));
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let variance = total.m2 / (total.n - 1) as f64;
    Ok(MCEstimate {
        mean: total.mean,
        stderr: (variance / total.n as f64).sqrt(),
        variance,
        n: total.n,
        seed,
        worker_count: workers,
    })
}

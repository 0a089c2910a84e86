//! Seeded, worker-count-independent Monte Carlo replication.
//!
//! Replication `r` draws from its own generator seeded by `mix(seed, r)`.
//! Results are collected in replication order and reduced sequentially, so
//! the output does not depend on how rayon schedules the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Default replication count for Monte Carlo operations.
pub const DEFAULT_REPS: usize = 10_000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a stream index.
pub fn mix(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream))
}

/// Run `f(rep, rng)` for every replication in parallel; results come back in
/// replication order.
pub fn replicate<T, F>(reps: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r as u64);
            f(r, &mut rng)
        })
        .collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample mean and its standard error (sample sd / √reps).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
    /// Sample variance of the draws (divisor `reps - 1`).
    pub variance: f64,
}

pub fn mean_estimate(xs: &[f64]) -> MeanEstimate {
    let reps = xs.len();
    if reps == 0 {
        return MeanEstimate { mean: f64::NAN, std_error: f64::NAN, reps, variance: f64::NAN };
    }
    let mut s = CompensatedSum::default();
    xs.iter().for_each(|&x| s.add(x));
    let mean = s.value() / reps as f64;
    if reps < 2 {
        return MeanEstimate { mean, std_error: 0.0, reps, variance: 0.0 };
    }
    let mut ss = CompensatedSum::default();
    xs.iter().for_each(|&x| ss.add((x - mean) * (x - mean)));
    let variance = ss.value() / (reps - 1) as f64;
    MeanEstimate { mean, std_error: (variance / reps as f64).sqrt(), reps, variance }
}

/// Nearest-rank quantile of `xs` for `q` in (0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

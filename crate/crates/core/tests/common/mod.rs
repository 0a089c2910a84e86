//! Shared generators for the integration tests.
#![allow(dead_code)]

use blockcalc::population::{StrataMoments, Stratum};
use blockcalc::PotentialOutcomeTable;
use rand::Rng;
use rand_distr::StandardNormal;

/// `|a − b| ≤ rtol · max(|a|, |b|)`, with a tiny absolute floor for values
/// that are zero up to rounding.
pub fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()) + 1e-13
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn gcd_all(sizes: &[usize]) -> usize {
    sizes.iter().fold(0, |g, &s| gcd(g, s))
}

/// Block sizes with `n ∈ [4, 10]`, `K ∈ [1, 3]`, every block at least 2 and a
/// common divisor of at least 2, so some common proportion is feasible.
pub fn random_sizes<R: Rng>(rng: &mut R) -> Vec<usize> {
    loop {
        let k = rng.random_range(1..=3);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(2..=8)).collect();
        let n: usize = sizes.iter().sum();
        if (4..=10).contains(&n) && gcd_all(&sizes) >= 2 {
            return sizes;
        }
    }
}

/// Outcome draws: mostly continuous, sometimes coarse integers to provoke ties
/// and zero variances.
fn outcome<R: Rng>(rng: &mut R, coarse: bool) -> f64 {
    if coarse {
        rng.random_range(-3..=3) as f64
    } else {
        3.0 * rng.sample::<f64, _>(StandardNormal)
    }
}

pub fn random_table<R: Rng>(rng: &mut R, sizes: &[usize]) -> PotentialOutcomeTable {
    let coarse = rng.random_bool(0.3);
    let shift: Vec<f64> = sizes.iter().map(|_| outcome(rng, coarse)).collect();
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = sizes
        .iter()
        .zip(&shift)
        .map(|(&s, &m)| {
            let yc: Vec<f64> = (0..s).map(|_| m + outcome(rng, coarse)).collect();
            let yt: Vec<f64> = yc.iter().map(|c| c + 0.5 * outcome(rng, coarse)).collect();
            (yt, yc)
        })
        .collect();
    PotentialOutcomeTable::from_blocks(&blocks).unwrap()
}

/// Per-block treated counts in `1..n_k`.
pub fn random_counts<R: Rng>(rng: &mut R, sizes: &[usize]) -> Vec<usize> {
    sizes.iter().map(|&s| rng.random_range(1..s)).collect()
}

/// A common proportion `j/g` feasible for every block.
pub fn random_common_p<R: Rng>(rng: &mut R, sizes: &[usize]) -> f64 {
    let g = gcd_all(sizes);
    rng.random_range(1..g) as f64 / g as f64
}

/// Strata with integer sizes summing to `n` (weights `n_k/n`), every size a
/// multiple of `g`, and arbitrary valid moments.
pub fn random_strata<R: Rng>(rng: &mut R, g: usize) -> (StrataMoments, usize) {
    let k = rng.random_range(1..=5);
    let sizes: Vec<usize> = (0..k).map(|_| g * rng.random_range(1..=4)).collect();
    let n: usize = sizes.iter().sum();
    let strata = sizes
        .iter()
        .map(|&s| {
            let sigma_t: f64 = rng.random_range(0.0..3.0);
            let sigma_c: f64 = rng.random_range(0.0..3.0);
            let rho: f64 = rng.random_range(-1.0..=1.0);
            Stratum {
                weight: s as f64 / n as f64,
                mu_t: 5.0 * rng.sample::<f64, _>(StandardNormal),
                mu_c: 5.0 * rng.sample::<f64, _>(StandardNormal),
                sigma2_t: sigma_t * sigma_t,
                sigma2_c: sigma_c * sigma_c,
                sigma2_tc: (sigma_t * sigma_t + sigma_c * sigma_c - 2.0 * rho * sigma_t * sigma_c).max(0.0),
            }
        })
        .collect();
    (StrataMoments::with_derived_pooled(strata).unwrap(), n)
}

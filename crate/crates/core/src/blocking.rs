//! Forming blocks from a single covariate, and measuring how predictive a
//! block structure is of the outcomes.
//!
//! All blocking functions return dense labels `0..K` in unit order. Units are
//! ranked by `x` with ties broken by `unit_id`. When the block size does not
//! divide `n`, the leftover units join the last block.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::population::PotentialOutcomeTable;

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateUnit {
    pub unit_id: String,
    pub x: f64,
}

/// One blocking covariate per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSample {
    units: Vec<CovariateUnit>,
}

impl CovariateSample {
    pub fn new(units: Vec<CovariateUnit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut seen = HashSet::new();
        for u in &units {
            if !u.x.is_finite() {
                return Err(Error::NonFiniteCovariate { unit_id: u.unit_id.clone() });
            }
            if !seen.insert(u.unit_id.as_str()) {
                return Err(Error::DuplicateUnitId(u.unit_id.clone()));
            }
        }
        Ok(Self { units })
    }

    /// Ids `u00001`, `u00002`, … matching [`PotentialOutcomeTable::from_parts`].
    pub fn from_values(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().enumerate().map(|(i, &x)| CovariateUnit { unit_id: format!("u{:05}", i + 1), x }).collect())
    }

    pub fn units(&self) -> &[CovariateUnit] {
        &self.units
    }

    pub fn values(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.x).collect()
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Unit indices sorted by `(x, unit_id)`.
    fn ranked(&self, idx: impl Iterator<Item = usize>) -> Vec<usize> {
        let mut v: Vec<usize> = idx.collect();
        v.sort_by(|&a, &b| {
            let (ua, ub) = (&self.units[a], &self.units[b]);
            ua.x.total_cmp(&ub.x).then_with(|| ua.unit_id.cmp(&ub.unit_id))
        });
        v
    }
}

/// Sort by `x` and cut into consecutive groups of `block_size`.
pub fn make_blocks_flex(sample: &CovariateSample, block_size: usize) -> Result<Vec<usize>> {
    if block_size < 2 {
        return Err(Error::BadBlockSize(block_size));
    }
    let n = sample.len();
    let k = (n / block_size).max(1);
    let mut labels = vec![0; n];
    for (rank, i) in sample.ranked(0..n).into_iter().enumerate() {
        labels[i] = (rank / block_size).min(k - 1);
    }
    Ok(labels)
}

/// Sort by `x` and deal units round-robin into `k` blocks, so each block
/// spans the whole range of `x`.
pub fn make_blocks_interleave(sample: &CovariateSample, k: usize) -> Result<Vec<usize>> {
    let n = sample.len();
    if k < 2 || n / k < 2 {
        return Err(Error::BadBlockCount(k));
    }
    let dealt = k * (n / k);
    let mut labels = vec![0; n];
    for (rank, i) in sample.ranked(0..n).into_iter().enumerate() {
        labels[i] = if rank < dealt { rank % k } else { k - 1 };
    }
    Ok(labels)
}

/// Parity-balanced blocks for an integer covariate: odd and even units are
/// each sorted by `x`, and every block takes `block_size/2` consecutive units
/// from each list.
pub fn make_blocks_peevish(sample: &CovariateSample, block_size: usize) -> Result<Vec<usize>> {
    if block_size < 2 || !block_size.is_multiple_of(2) {
        return Err(Error::BadBlockSize(block_size));
    }
    if sample.units.iter().any(|u| u.x.fract() != 0.0) {
        return Err(Error::NonIntegerCovariate);
    }
    let n = sample.len();
    let is_odd = |i: &usize| (sample.units[*i].x as i64).rem_euclid(2) == 1;
    let odd = sample.ranked((0..n).filter(is_odd));
    let even = sample.ranked((0..n).filter(|i| !is_odd(i)));
    if odd.len() != even.len() {
        return Err(Error::ParityMismatch { odd: odd.len(), even: even.len() });
    }
    let half = block_size / 2;
    let k = (odd.len() / half).max(1);
    let mut labels = vec![0; n];
    for list in [&odd, &even] {
        for (rank, &i) in list.iter().enumerate() {
            labels[i] = (rank / half).min(k - 1);
        }
    }
    Ok(labels)
}

/// Uniformly random partition of `0..n` into blocks of the given sizes.
pub fn make_blocks_random<R: Rng + ?Sized>(n: usize, sizes: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    let sum: usize = sizes.iter().sum();
    if sum != n {
        return Err(Error::SizeMismatch { sum, n });
    }
    if sizes.contains(&0) {
        return Err(Error::BadBlockSize(0));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    let mut pos = 0;
    for (k, &s) in sizes.iter().enumerate() {
        for &i in &order[pos..pos + s] {
            labels[i] = k;
        }
        pos += s;
    }
    Ok(labels)
}

/// Between-block share of the total sum of squares of the stacked outcome
/// vector (every `y_c`, then every `y_t`), with one group per block. A unit's
/// two outcomes both count toward its block.
pub fn r2_grouped(y_c: &[f64], y_t: &[f64], labels: &[usize]) -> Result<f64> {
    if y_c.len() != labels.len() || y_t.len() != labels.len() {
        return Err(Error::LengthMismatch { left: labels.len(), right: y_c.len().min(y_t.len()) });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sum = vec![0.0; k];
    let mut cnt = vec![0usize; k];
    for ((&b, &c), &t) in labels.iter().zip(y_c).zip(y_t) {
        sum[b] += c + t;
        cnt[b] += 2;
    }
    let total_n = 2 * labels.len();
    let grand = sum.iter().sum::<f64>() / total_n as f64;
    let total: f64 = y_c.iter().chain(y_t).map(|y| (y - grand).powi(2)).sum();
    let between: f64 =
        sum.iter().zip(&cnt).filter(|(_, &c)| c > 0).map(|(s, &c)| c as f64 * (s / c as f64 - grand).powi(2)).sum();
    // Relative to the data scale, a total this small is rounding noise.
    let scale = y_c.iter().chain(y_t).map(|y| y * y).sum::<f64>();
    if total <= 1e-24 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::ZeroTotalVariation);
    }
    Ok((between / total).clamp(0.0, 1.0))
}

pub fn r2_blocks(table: &PotentialOutcomeTable) -> Result<f64> {
    let yc: Vec<f64> = table.units().iter().map(|u| u.y_c).collect();
    let yt: Vec<f64> = table.units().iter().map(|u| u.y_t).collect();
    r2_grouped(&yc, &yt, &table.labels())
}

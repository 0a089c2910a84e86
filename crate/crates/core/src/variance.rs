//! Closed-form variances of the complete-randomization (CR) and blocked
//! estimators, their differences under each sampling framework, and Monte
//! Carlo evaluation of the two frameworks whose difference is an expectation
//! over randomly drawn blocks.
//!
//! Site sampling draws blocks i.i.d. with replacement from a finite list,
//! standing in for an infinite population of blocks. Two-stage sampling draws
//! stratum types with probability equal to their weights, then gives each
//! drawn stratum a size set by a [`SizeRule`].

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use serde::Serialize;

use crate::design::{equal_proportion_counts, treated_count, Design};
use crate::error::{Error, Result};
use crate::mc::{mean_estimate, replicate};
use crate::population::{mixture, summarize, Component, PotentialOutcomeTable, StrataMoments, Stratum};

/// Sampling framework a [`VarianceReport`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framework {
    Finite,
    Srs,
    Stratified,
    SiteSampling,
    TwoStage,
    Mixed,
}

/// How the variance difference splits into interpretable parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decomposition {
    /// `diff = between − within`.
    Finite { between: f64, within: f64 },
    /// `diff = between + unequal_p`.
    UnequalProportions { between: f64, unequal_p: f64 },
}

impl Decomposition {
    pub fn between(&self) -> f64 {
        match *self {
            Decomposition::Finite { between, .. } | Decomposition::UnequalProportions { between, .. } => between,
        }
    }

    /// The difference implied by the parts.
    pub fn diff(&self) -> f64 {
        match *self {
            Decomposition::Finite { between, within } => between - within,
            Decomposition::UnequalProportions { between, unequal_p } => between + unequal_p,
        }
    }
}

/// A pair of estimator variances and their difference `var_cr − var_bk`.
///
/// In [`MixedMode::CrSrsVsCrStrat`] the `var_bk` slot holds the CR variance
/// under stratified sampling, since that comparison involves no blocking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub framework: Framework,
    pub var_cr: f64,
    pub var_bk: f64,
    pub diff: f64,
    pub decomposition: Option<Decomposition>,
    /// Monte Carlo standard error of `diff`.
    pub std_error: Option<f64>,
    pub reps: Option<usize>,
}

impl VarianceReport {
    fn closed(framework: Framework, var_cr: f64, var_bk: f64, diff: f64, decomposition: Option<Decomposition>) -> Self {
        Self { framework, var_cr, var_bk, diff, decomposition, std_error: None, reps: None }
    }

    /// `var_bk / var_cr`, or `None` when `var_cr` is 0.
    pub fn ratio(&self) -> Option<f64> {
        (self.var_cr != 0.0).then(|| self.var_bk / self.var_cr)
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w > 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::BadWeights { sum });
    }
    Ok(())
}

/// Weighted between-group variance `Σ w_k (x_k − Σ w_j x_j)²`.
pub fn var_k(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: weights.len() });
    }
    check_weights(weights)?;
    let mean: f64 = values.iter().zip(weights).map(|(x, w)| x * w).sum();
    Ok(values.iter().zip(weights).map(|(x, w)| w * (x - mean) * (x - mean)).sum())
}

/// `S²_t/n_t + S²_c/n_c − S²_tc/n`.
pub fn neyman_var_cr(table: &PotentialOutcomeTable, n_t: usize) -> Result<f64> {
    let n = table.n();
    if n < 2 {
        return Err(Error::TooFewUnits { needed: 2, got: n });
    }
    Design::complete(n_t).validate(table)?;
    let s = summarize(table).pooled;
    let (s2t, s2c, s2tc) = (s.s2_t.unwrap(), s.s2_c.unwrap(), s.s2_tc.unwrap());
    let n_c = n - n_t;
    Ok(s2t / n_t as f64 + s2c / n_c as f64 - s2tc / n as f64)
}

/// Variance of one block's difference in means: `S²_t/n_t + S²_c/n_c − S²_tc/n_k`.
fn block_var(s2t: f64, s2c: f64, s2tc: f64, nk: f64, ntk: f64) -> f64 {
    s2t / ntk + s2c / (nk - ntk) - s2tc / nk
}

/// `Σ (n_k/n)² (S²_tk/n_tk + S²_ck/n_ck − S²_tck/n_k)`.
pub fn neyman_var_blocked(table: &PotentialOutcomeTable, design: &Design) -> Result<f64> {
    let Design::Blocked { n_treated } = design else {
        return Err(Error::Input("a blocked design is required".into()));
    };
    design.validate(table)?;
    let s = summarize(table);
    let s2t = s.block_s2(Component::Treatment)?;
    let s2c = s.block_s2(Component::Control)?;
    let s2tc = s.block_s2(Component::Effect)?;
    let n = table.n() as f64;
    Ok((0..table.n_blocks())
        .map(|k| {
            let nk = table.block_sizes()[k] as f64;
            (nk / n).powi(2) * block_var(s2t[k], s2c[k], s2tc[k], nk, n_treated[k] as f64)
        })
        .sum())
}

/// Finite-sample comparison at a common treated proportion `p`:
/// `between = (1/(n−1)) Var_k(√(p/(1−p)) Ȳ_k(c) + √((1−p)/p) Ȳ_k(t))`,
/// `within = (1/(n−1)) Σ (n_k/n)((n−n_k)/n) var(τ̂_k)`, `diff = between − within`.
pub fn var_diff_finite(table: &PotentialOutcomeTable, p: f64) -> Result<VarianceReport> {
    let n_t = treated_count(p, table.n())?;
    let counts = equal_proportion_counts(table.block_sizes(), p)?;
    let design = Design::blocked(counts.clone());
    design.validate(table)?;
    let s = summarize(table);
    let s2t = s.block_s2(Component::Treatment)?;
    let s2c = s.block_s2(Component::Control)?;
    let s2tc = s.block_s2(Component::Effect)?;
    let n = table.n() as f64;
    let (a, b) = ((p / (1.0 - p)).sqrt(), ((1.0 - p) / p).sqrt());
    let weights: Vec<f64> = table.block_sizes().iter().map(|&nk| nk as f64 / n).collect();
    let composite: Vec<f64> = s.blocks.iter().map(|bk| a * bk.mean_c + b * bk.mean_t).collect();
    let between = var_k(&composite, &weights)? / (n - 1.0);
    let mut within = 0.0;
    for k in 0..table.n_blocks() {
        let nk = table.block_sizes()[k] as f64;
        within += (nk / n) * ((n - nk) / n) * block_var(s2t[k], s2c[k], s2tc[k], nk, counts[k] as f64);
    }
    within /= n - 1.0;
    let var_cr = neyman_var_cr(table, n_t)?;
    let var_bk = neyman_var_blocked(table, &design)?;
    let d = Decomposition::Finite { between, within };
    Ok(VarianceReport::closed(Framework::Finite, var_cr, var_bk, d.diff(), Some(d)))
}

/// Difference for `K` equal-sized blocks, `p = 1/2` and `y_t = y_c`:
/// `(1/(n−1)) [4 Var_k(Ȳ_k(c)) − (4(K−1)/n)(1/K) Σ S²_ck]`.
pub fn var_diff_equal_blocks(table: &PotentialOutcomeTable) -> Result<f64> {
    let sizes = table.block_sizes();
    if sizes.iter().any(|&s| s != sizes[0]) {
        return Err(Error::Input("blocks must have equal sizes".into()));
    }
    if table.units().iter().any(|u| u.y_t != u.y_c) {
        return Err(Error::Input("treated and control outcomes must coincide".into()));
    }
    equal_proportion_counts(sizes, 0.5)?;
    let s = summarize(table);
    let s2c = s.block_s2(Component::Control)?;
    let k = table.n_blocks() as f64;
    let n = table.n() as f64;
    let means: Vec<f64> = s.blocks.iter().map(|b| b.mean_c).collect();
    let between = 4.0 * var_k(&means, &vec![1.0 / k; means.len()])?;
    let within = 4.0 * (k - 1.0) / n * s2c.iter().sum::<f64>() / k;
    Ok((between - within) / (n - 1.0))
}

/// Integer stratum sizes `w_k n`, rejecting weights that do not give integers.
pub fn stratum_sizes(moments: &StrataMoments, n: usize) -> Result<Vec<usize>> {
    moments
        .weights()
        .iter()
        .map(|&w| {
            let x = w * n as f64;
            let r = x.round();
            if (x - r).abs() > 1e-9 || r < 1.0 {
                Err(Error::NonIntegerCount { p: w, n: n as f64 })
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

fn pooled_or_mixture(moments: &StrataMoments) -> crate::population::PooledMoments {
    moments.pooled().copied().unwrap_or_else(|| mixture(moments.strata()))
}

/// `σ²_t/n_t + σ²_c/n_c` for simple random sampling from the pooled population.
pub fn var_cr_srs(moments: &StrataMoments, n_t: usize, n_c: usize) -> Result<f64> {
    if n_t == 0 || n_c == 0 {
        return Err(Error::TreatedOutOfRange { n_t, n: n_t + n_c });
    }
    let pooled = moments.require_pooled()?;
    Ok(pooled.sigma2_t / n_t as f64 + pooled.sigma2_c / n_c as f64)
}

/// Blocked variance under stratified sampling:
/// `Σ (n_k/n)² (σ²(t,k)/n_tk + σ²(c,k)/n_ck)`.
pub fn var_blocked_strat(moments: &StrataMoments, sizes: &[usize], n_treated: &[usize]) -> Result<f64> {
    let s = moments.strata();
    if sizes.len() != s.len() {
        return Err(Error::LengthMismatch { left: s.len(), right: sizes.len() });
    }
    if n_treated.len() != s.len() {
        return Err(Error::DesignShape { expected: s.len(), got: n_treated.len() });
    }
    let n: usize = sizes.iter().sum();
    let nf = n as f64;
    let mut v = 0.0;
    for (k, st) in s.iter().enumerate() {
        let (nk, ntk) = (sizes[k], n_treated[k]);
        if ntk == 0 || ntk >= nk {
            return Err(Error::BlockTreatedOutOfRange { block: k + 1, n_t: ntk, n: nk });
        }
        let w = nk as f64 / nf;
        v += w * w * (st.sigma2_t / ntk as f64 + st.sigma2_c / (nk - ntk) as f64);
    }
    Ok(v)
}

/// CR variance under stratified sampling with fixed stratum sizes:
/// `Σ w σ²(c,k)/n_c + Σ w σ²(t,k)/n_t
///  + Σ n_k/(n−1) [Δ²_ck/n_c + Δ²_tk/n_t] − Σ n_k/(n(n−1)) (τ_k − τ)²`.
pub fn var_cr_strat(moments: &StrataMoments, sizes: &[usize], n_t: usize) -> Result<f64> {
    let s = moments.strata();
    if sizes.len() != s.len() {
        return Err(Error::LengthMismatch { left: s.len(), right: sizes.len() });
    }
    let n: usize = sizes.iter().sum();
    if n_t == 0 || n_t >= n {
        return Err(Error::TreatedOutOfRange { n_t, n });
    }
    let nf = n as f64;
    let (ntf, ncf) = (n_t as f64, (n - n_t) as f64);
    let w: Vec<f64> = sizes.iter().map(|&k| k as f64 / nf).collect();
    let mu_c: f64 = s.iter().zip(&w).map(|(x, w)| w * x.mu_c).sum();
    let mu_t: f64 = s.iter().zip(&w).map(|(x, w)| w * x.mu_t).sum();
    let mut v = 0.0;
    for (k, st) in s.iter().enumerate() {
        let nk = sizes[k] as f64;
        let (dc, dt) = (st.mu_c - mu_c, st.mu_t - mu_t);
        v += w[k] * (st.sigma2_c / ncf + st.sigma2_t / ntf);
        v += nk / (nf - 1.0) * (dc * dc / ncf + dt * dt / ntf);
        v -= nk / (nf * (nf - 1.0)) * (dt - dc) * (dt - dc);
    }
    Ok(v)
}

fn strat_between(strata: &[Stratum], weights: &[f64], n: f64, p: f64) -> Result<f64> {
    let (a, b) = ((p / (1.0 - p)).sqrt(), ((1.0 - p) / p).sqrt());
    let composite: Vec<f64> = strata.iter().map(|s| a * s.mu_c + b * s.mu_t).collect();
    Ok(var_k(&composite, weights)? / (n - 1.0))
}

/// Stratified-sampling difference at a common proportion `p`:
/// `(1/(n−1)) Var_k(√(p/(1−p)) μ(c,k) + √((1−p)/p) μ(t,k))`, never negative.
pub fn var_diff_strat(moments: &StrataMoments, n: usize, p: f64) -> Result<VarianceReport> {
    let sizes = stratum_sizes(moments, n)?;
    let counts = equal_proportion_counts(&sizes, p)?;
    let between = strat_between(moments.strata(), &moments.weights(), n as f64, p)?;
    let var_bk = var_blocked_strat(moments, &sizes, &counts)?;
    let d = Decomposition::Finite { between, within: 0.0 };
    Ok(VarianceReport::closed(Framework::Stratified, var_bk + between, var_bk, between, Some(d)))
}

/// Stratified-sampling difference when block `k` treats a proportion `p_k`
/// whose weighted average is `p`: the common-proportion term plus
/// `Σ (p−p_k) n_k/n² [σ²(c,k)/((1−p_k)(1−p)) − σ²(t,k)/(p_k p)]`.
pub fn var_diff_strat_unequal(moments: &StrataMoments, n: usize, p_k: &[f64], p: f64) -> Result<VarianceReport> {
    let s = moments.strata();
    if p_k.len() != s.len() {
        return Err(Error::LengthMismatch { left: s.len(), right: p_k.len() });
    }
    let sizes = stratum_sizes(moments, n)?;
    let weights = moments.weights();
    let avg: f64 = weights.iter().zip(p_k).map(|(w, q)| w * q).sum();
    if (avg - p).abs() > 1e-12 {
        return Err(Error::Input(format!("weighted block proportions average {avg}, not p = {p}")));
    }
    treated_count(p, n)?;
    let counts: Vec<usize> = sizes.iter().zip(p_k).map(|(&nk, &q)| treated_count(q, nk)).collect::<Result<_>>()?;
    let nf = n as f64;
    let between = strat_between(s, &weights, nf, p)?;
    let mut unequal_p = 0.0;
    for (k, st) in s.iter().enumerate() {
        let q = p_k[k];
        unequal_p +=
            (p - q) * sizes[k] as f64 / (nf * nf) * (st.sigma2_c / ((1.0 - q) * (1.0 - p)) - st.sigma2_t / (q * p));
    }
    let var_bk = var_blocked_strat(moments, &sizes, &counts)?;
    let d = Decomposition::UnequalProportions { between, unequal_p };
    Ok(VarianceReport::closed(Framework::Stratified, var_bk + d.diff(), var_bk, d.diff(), Some(d)))
}

/// The unequal-proportion term when `σ²(c,k) = σ²(t,k) = σ²_k`:
/// `Σ n_k/(n² p(1−p)) [(p−p_k)(p−(1−p_k))/((1−p_k)p_k)] σ²_k`.
pub fn unequal_p_term_common_variance(sizes: &[usize], p_k: &[f64], sigma2: &[f64], p: f64) -> Result<f64> {
    if sizes.len() != p_k.len() || sizes.len() != sigma2.len() {
        return Err(Error::LengthMismatch { left: sizes.len(), right: p_k.len().min(sigma2.len()) });
    }
    let n: usize = sizes.iter().sum();
    let nf = n as f64;
    Ok(sizes
        .iter()
        .zip(p_k)
        .zip(sigma2)
        .map(|((&nk, &q), &s2)| {
            nk as f64 / (nf * nf * p * (1.0 - p)) * ((p - q) * (p - (1.0 - q)) / ((1.0 - q) * q)) * s2
        })
        .sum())
}

/// Which pair of designs-and-frameworks a mixed comparison contrasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixedMode {
    /// CR under simple random sampling against blocking under stratified sampling.
    CrSrsVsBkStrat,
    /// CR under simple random sampling against CR under stratified sampling.
    CrSrsVsCrStrat,
}

/// Comparisons that change the sampling framework along with (or instead of)
/// the design. Pooled moments are derived from the strata when absent.
pub fn var_diff_mixed(moments: &StrataMoments, n_t: usize, n_c: usize, mode: MixedMode) -> Result<VarianceReport> {
    let n = n_t + n_c;
    let sizes = stratum_sizes(moments, n)?;
    let pooled = pooled_or_mixture(moments);
    let withp = moments.clone().with_pooled(pooled)?;
    let var_srs = var_cr_srs(&withp, n_t, n_c)?;
    let nf = n as f64;
    let (ntf, ncf) = (n_t as f64, n_c as f64);
    let s = moments.strata();
    match mode {
        MixedMode::CrSrsVsBkStrat => {
            let p = ntf / nf;
            let counts = equal_proportion_counts(&sizes, p)?;
            let var_bk = var_blocked_strat(moments, &sizes, &counts)?;
            let diff: f64 = s
                .iter()
                .map(|x| x.weight * ((x.mu_c - pooled.mu_c).powi(2) / ncf + (x.mu_t - pooled.mu_t).powi(2) / ntf))
                .sum();
            Ok(VarianceReport::closed(Framework::Mixed, var_srs, var_bk, diff, None))
        }
        MixedMode::CrSrsVsCrStrat => {
            let var_strat = var_cr_strat(moments, &sizes, n_t)?;
            let diff: f64 = s
                .iter()
                .zip(&sizes)
                .map(|(x, &nk)| {
                    let (dc, dt) = (x.mu_c - pooled.mu_c, x.mu_t - pooled.mu_t);
                    nk as f64 / (nf * (nf - 1.0))
                        * ((ncf - 1.0) / ncf * dc * dc + (ntf - 1.0) / ntf * dt * dt - 2.0 * dc * dt)
                })
                .sum();
            Ok(VarianceReport::closed(Framework::Mixed, var_srs, var_strat, diff, None))
        }
    }
}

fn monte_carlo_report(framework: Framework, draws: Vec<(f64, f64, f64)>) -> VarianceReport {
    let reps = draws.len();
    let cr = mean_estimate(&draws.iter().map(|d| d.0).collect::<Vec<_>>());
    let bk = mean_estimate(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
    let diff = mean_estimate(&draws.iter().map(|d| d.2).collect::<Vec<_>>());
    VarianceReport {
        framework,
        var_cr: cr.mean,
        var_bk: bk.mean,
        diff: diff.mean,
        decomposition: None,
        std_error: Some(diff.std_error),
        reps: Some(reps),
    }
}

/// Monte Carlo expectation of the finite-sample difference when each
/// experiment's `k_draw` blocks are drawn i.i.d. with replacement from
/// `population`. Each population table is used as one block.
pub fn var_diff_site_sampling(
    population: &[PotentialOutcomeTable],
    k_draw: usize,
    p: f64,
    reps: usize,
    seed: u64,
) -> Result<VarianceReport> {
    if population.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    if k_draw == 0 {
        return Err(Error::BadBlockCount(0));
    }
    if reps == 0 {
        return Err(Error::Input("at least one replication is required".into()));
    }
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = population
        .iter()
        .map(|t| (t.units().iter().map(|u| u.y_t).collect(), t.units().iter().map(|u| u.y_c).collect()))
        .collect();
    for (i, (yt, _)) in blocks.iter().enumerate() {
        if yt.len() < 2 {
            return Err(Error::SingletonBlock { block: i + 1 });
        }
        treated_count(p, yt.len())?;
    }
    let draws = replicate(reps, seed, |_, rng| {
        let chosen: Vec<_> = (0..k_draw).map(|_| blocks[rng.random_range(0..blocks.len())].clone()).collect();
        let table = PotentialOutcomeTable::from_blocks(&chosen)?;
        let r = var_diff_finite(&table, p)?;
        Ok((r.var_cr, r.var_bk, r.diff))
    });
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(monte_carlo_report(Framework::SiteSampling, draws))
}

/// Stratum size for each drawn stratum in two-stage sampling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeRule {
    /// Every drawn stratum has this many units.
    Constant(usize),
    /// Size by stratum type, one entry per population row.
    PerType(Vec<usize>),
}

impl SizeRule {
    fn size(&self, row: usize) -> usize {
        match self {
            SizeRule::Constant(n) => *n,
            SizeRule::PerType(v) => v[row],
        }
    }
}

/// Monte Carlo expectation of the stratified-sampling difference when `k_draw`
/// strata are first drawn from `population` (weights used as draw
/// probabilities) and sized by `rule`. Each per-draw term is a weighted
/// variance, so the estimate is never negative.
pub fn var_diff_two_stage(
    population: &StrataMoments,
    k_draw: usize,
    rule: &SizeRule,
    p: f64,
    reps: usize,
    seed: u64,
) -> Result<VarianceReport> {
    if population.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    if k_draw == 0 {
        return Err(Error::BadBlockCount(0));
    }
    if reps == 0 {
        return Err(Error::Input("at least one replication is required".into()));
    }
    if let SizeRule::PerType(v) = rule {
        if v.len() != population.len() {
            return Err(Error::LengthMismatch { left: population.len(), right: v.len() });
        }
    }
    for row in 0..population.len() {
        let nk = rule.size(row);
        if nk < 2 {
            return Err(Error::BadBlockSize(nk));
        }
        treated_count(p, nk)?;
    }
    let dist = WeightedIndex::new(population.weights()).map_err(|e| Error::Input(e.to_string()))?;
    let strata = population.strata();
    let draws = replicate(reps, seed, |_, rng| {
        let rows: Vec<usize> = (0..k_draw).map(|_| dist.sample(rng)).collect();
        let sizes: Vec<usize> = rows.iter().map(|&r| rule.size(r)).collect();
        let n: usize = sizes.iter().sum();
        let nf = n as f64;
        let drawn: Vec<Stratum> =
            rows.iter().zip(&sizes).map(|(&r, &nk)| Stratum { weight: nk as f64 / nf, ..strata[r] }).collect();
        let weights: Vec<f64> = drawn.iter().map(|s| s.weight).collect();
        let between = strat_between(&drawn, &weights, nf, p)?;
        let var_bk: f64 = drawn
            .iter()
            .zip(&sizes)
            .map(|(s, &nk)| {
                let ntk = p * nk as f64;
                s.weight * s.weight * (s.sigma2_t / ntk + s.sigma2_c / (nk as f64 - ntk))
            })
            .sum();
        Ok((var_bk + between, var_bk, between))
    });
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(monte_carlo_report(Framework::TwoStage, draws))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pairs() -> PotentialOutcomeTable {
        PotentialOutcomeTable::from_blocks(&[(vec![0.0, 2.0], vec![0.0, 2.0]), (vec![0.0, 2.0], vec![0.0, 2.0])])
            .unwrap()
    }

    fn stratum(weight: f64, mu_c: f64, mu_t: f64, s2: f64) -> Stratum {
        Stratum { weight, mu_t, mu_c, sigma2_t: s2, sigma2_c: s2, sigma2_tc: 0.0 }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn var_k_examples() {
        assert_eq!(var_k(&[0.0, 4.0], &[0.5, 0.5]).unwrap(), 4.0);
        assert_eq!(var_k(&[3.0, 3.0, 3.0], &[0.2, 0.3, 0.5]).unwrap(), 0.0);
        assert_eq!(var_k(&[7.0], &[1.0]).unwrap(), 0.0);
        assert!(matches!(var_k(&[1.0], &[0.5, 0.5]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(var_k(&[1.0, 2.0], &[0.5, 0.6]), Err(Error::BadWeights { .. })));
    }

    #[test]
    fn neyman_examples() {
        let t = PotentialOutcomeTable::from_blocks(&[(vec![1.0, 3.0], vec![0.0, 0.0])]).unwrap();
        assert_eq!(neyman_var_cr(&t, 1).unwrap(), 1.0);
        assert!(close(neyman_var_cr(&two_pairs(), 2).unwrap(), 4.0 / 3.0));
        assert_eq!(neyman_var_blocked(&two_pairs(), &Design::blocked(vec![1, 1])).unwrap(), 2.0);

        let add = PotentialOutcomeTable::from_blocks(&[(vec![6.0, 9.0, 5.0], vec![1.0, 4.0, 0.0])]).unwrap();
        let s = summarize(&add).pooled;
        assert!(close(neyman_var_cr(&add, 1).unwrap(), s.s2_t.unwrap() + s.s2_c.unwrap() / 2.0));
        assert!(close(neyman_var_blocked(&add, &Design::blocked(vec![1])).unwrap(), neyman_var_cr(&add, 1).unwrap()));
        let c =
            PotentialOutcomeTable::from_blocks(&[(vec![2.0; 2], vec![2.0; 2]), (vec![2.0; 3], vec![2.0; 3])]).unwrap();
        assert_eq!(neyman_var_blocked(&c, &Design::blocked(vec![1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn finite_difference_examples() {
        let r = var_diff_finite(&two_pairs(), 0.5).unwrap();
        assert_eq!(r.decomposition, Some(Decomposition::Finite { between: 0.0, within: 2.0 / 3.0 }));
        assert!(close(r.diff, -2.0 / 3.0));
        assert!(close(r.diff, r.var_cr - r.var_bk));

        let one = PotentialOutcomeTable::from_blocks(&[(vec![1.0, 4.0, 2.0, 7.0], vec![0.0, 1.0, 5.0, 2.0])]).unwrap();
        assert!(close(var_diff_finite(&one, 0.5).unwrap().diff, 0.0));

        let t =
            PotentialOutcomeTable::from_blocks(&[(vec![0.0, 0.0], vec![0.0, 0.0]), (vec![2.0, 2.0], vec![2.0, 2.0])])
                .unwrap();
        let r = var_diff_finite(&t, 0.5).unwrap();
        let Some(Decomposition::Finite { between, within }) = r.decomposition else { panic!() };
        assert_eq!(within, 0.0);
        assert!(between > 0.0 && r.diff == between);
        assert!(close(r.diff, var_diff_equal_blocks(&t).unwrap()));

        let odd = PotentialOutcomeTable::from_blocks(&[(vec![0.0; 3], vec![0.0; 3])]).unwrap();
        assert!(matches!(var_diff_finite(&odd, 0.5), Err(Error::NonIntegerCount { .. })));
    }

    #[test]
    fn srs_and_blocked_strat_examples() {
        let m =
            StrataMoments::with_derived_pooled(vec![stratum(0.5, 0.0, 0.0, 1.0), stratum(0.5, 2.0, 2.0, 1.0)]).unwrap();
        assert_eq!(var_cr_srs(&m, 2, 2).unwrap(), 2.0);
        let single = StrataMoments::with_derived_pooled(vec![stratum(1.0, 0.0, 0.0, 1.0)]).unwrap();
        assert!(close(var_cr_srs(&single, 10, 10).unwrap(), 0.2));
        assert_eq!(
            var_cr_srs(&StrataMoments::new(vec![stratum(1.0, 0.0, 0.0, 1.0)]).unwrap(), 1, 1),
            Err(Error::MissingPooledMoments)
        );

        assert_eq!(var_blocked_strat(&m, &[2, 2], &[1, 1]).unwrap(), 1.0);
        let z = StrataMoments::new(vec![stratum(0.5, 0.0, 1.0, 0.0), stratum(0.5, 3.0, 1.0, 0.0)]).unwrap();
        assert_eq!(var_blocked_strat(&z, &[2, 2], &[1, 1]).unwrap(), 0.0);
        assert!(close(var_blocked_strat(&single, &[20], &[10]).unwrap(), var_cr_srs(&single, 10, 10).unwrap()));
    }

    #[test]
    fn stratified_common_p_examples() {
        let m = StrataMoments::new(vec![stratum(0.5, 0.0, 0.0, 1.0), stratum(0.5, 2.0, 2.0, 1.0)]).unwrap();
        let r = var_diff_strat(&m, 4, 0.5).unwrap();
        assert!(close(r.diff, 4.0 / 3.0));
        // Independent route: CR variance under stratified sampling.
        assert!(close(var_cr_strat(&m, &[2, 2], 2).unwrap() - r.var_bk, r.diff));

        let flat = StrataMoments::new(vec![stratum(0.5, 1.0, 3.0, 1.0), stratum(0.5, 1.0, 3.0, 5.0)]).unwrap();
        assert_eq!(var_diff_strat(&flat, 4, 0.5).unwrap().diff, 0.0);
        let one = StrataMoments::new(vec![stratum(1.0, 1.0, 3.0, 1.0)]).unwrap();
        assert_eq!(var_diff_strat(&one, 4, 0.5).unwrap().diff, 0.0);
    }

    #[test]
    fn stratified_unequal_p_examples() {
        let m = StrataMoments::new(vec![stratum(0.5, 0.0, 0.0, 1.0), stratum(0.5, 0.0, 0.0, 1.0)]).unwrap();
        let r = var_diff_strat_unequal(&m, 8, &[0.25, 0.75], 0.5).unwrap();
        assert!(close(r.diff, -1.0 / 6.0));
        let simple = unequal_p_term_common_variance(&[4, 4], &[0.25, 0.75], &[1.0, 1.0], 0.5).unwrap();
        assert!(close(simple, -1.0 / 6.0));
        assert!(close(var_cr_strat(&m, &[4, 4], 4).unwrap() - r.var_bk, r.diff));

        let m = StrataMoments::new(vec![stratum(0.5, 0.0, 1.0, 2.0), stratum(0.5, 4.0, 2.0, 1.0)]).unwrap();
        let eq = var_diff_strat_unequal(&m, 8, &[0.5, 0.5], 0.5).unwrap();
        assert_eq!(eq.diff, var_diff_strat(&m, 8, 0.5).unwrap().diff);

        assert!(matches!(var_diff_strat_unequal(&m, 8, &[0.25, 0.5], 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn mixed_examples() {
        let m = StrataMoments::new(vec![stratum(0.5, 0.0, 0.0, 1.0), stratum(0.5, 2.0, 2.0, 1.0)]).unwrap();
        let r = var_diff_mixed(&m, 2, 2, MixedMode::CrSrsVsBkStrat).unwrap();
        assert!(close(r.diff, 1.0));
        assert!(close(r.diff, r.var_cr - r.var_bk));

        let m = StrataMoments::new(vec![stratum(0.5, 0.0, 1.0, 1.0), stratum(0.5, 2.0, 3.0, 1.0)]).unwrap();
        let r = var_diff_mixed(&m, 2, 2, MixedMode::CrSrsVsCrStrat).unwrap();
        assert!(close(r.diff, -1.0 / 3.0));
        assert!(close(r.diff, r.var_cr - r.var_bk));

        let flat = StrataMoments::new(vec![stratum(0.5, 1.0, 1.0, 1.0), stratum(0.5, 1.0, 1.0, 3.0)]).unwrap();
        for mode in [MixedMode::CrSrsVsBkStrat, MixedMode::CrSrsVsCrStrat] {
            assert!(close(var_diff_mixed(&flat, 2, 2, mode).unwrap().diff, 0.0));
        }
    }

    #[test]
    fn site_sampling_examples() {
        let spread = |v: &[f64]| PotentialOutcomeTable::from_blocks(&[(v.to_vec(), v.to_vec())]).unwrap();
        // Equal block means, positive within-block spread.
        let pop = vec![spread(&[0.0, 2.0]), spread(&[-1.0, 3.0]), spread(&[0.5, 1.5, 1.0, 1.0])];
        let r = var_diff_site_sampling(&pop, 4, 0.5, 2000, 11).unwrap();
        assert!(r.diff < -3.0 * r.std_error.unwrap());
        assert_eq!(r, var_diff_site_sampling(&pop, 4, 0.5, 2000, 11).unwrap());

        let pop = vec![spread(&[0.0, 0.0]), spread(&[2.0, 2.0]), spread(&[5.0, 5.0, 5.0, 5.0])];
        assert!(var_diff_site_sampling(&pop, 3, 0.5, 500, 3).unwrap().diff > 0.0);
        assert_eq!(var_diff_site_sampling(&[], 3, 0.5, 10, 0), Err(Error::EmptyPopulation));
    }

    #[test]
    fn two_stage_examples() {
        let same = StrataMoments::new(vec![stratum(0.5, 1.0, 2.0, 1.0), stratum(0.5, 1.0, 2.0, 4.0)]).unwrap();
        let r = var_diff_two_stage(&same, 3, &SizeRule::Constant(4), 0.5, 200, 5).unwrap();
        assert_eq!(r.diff, 0.0);

        let two = StrataMoments::new(vec![stratum(0.5, 0.0, 0.0, 1.0), stratum(0.5, 2.0, 2.0, 1.0)]).unwrap();
        let r = var_diff_two_stage(&two, 4, &SizeRule::PerType(vec![2, 4]), 0.5, 2000, 5).unwrap();
        assert!(r.diff > 0.0);
        assert_eq!(r, var_diff_two_stage(&two, 4, &SizeRule::PerType(vec![2, 4]), 0.5, 2000, 5).unwrap());
        assert!(var_diff_two_stage(&two, 2, &SizeRule::Constant(3), 0.5, 10, 5).is_err());
    }
}

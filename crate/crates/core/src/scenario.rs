//! Data-generating processes for the simulation studies.
//!
//! [`gen_scenario_population`] builds a blocked population whose block means,
//! variances and within-block correlation hit their targets exactly. Blocks
//! are scored by size, `s_k = 1 − 2·rank/(K−1)` with the smallest block
//! ranked first, so control means `control_mean_spread·s_k` and effects
//! `effect_spread·s_k` both fall as blocks get larger.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::blocking::CovariateSample;
use crate::error::{Error, Result};
use crate::population::PotentialOutcomeTable;

/// One synthetic blocked population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub block_sizes: Vec<usize>,
    pub treated_counts: Vec<usize>,
    pub control_mean_spread: f64,
    pub effect_spread: f64,
    pub rho: f64,
    pub base_sigma: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadScenario(m.to_string()));
        if self.block_sizes.is_empty() {
            return bad("no blocks");
        }
        if self.treated_counts.len() != self.block_sizes.len() {
            return bad("treated_counts and block_sizes differ in length");
        }
        for (k, (&nt, &nk)) in self.treated_counts.iter().zip(&self.block_sizes).enumerate() {
            if nk < 3 {
                return bad(&format!("block {} has {nk} units; at least 3 are needed", k + 1));
            }
            if nt == 0 || nt >= nk {
                return Err(Error::BlockTreatedOutOfRange { block: k + 1, n_t: nt, n: nk });
            }
        }
        if !(self.control_mean_spread >= 0.0 && self.effect_spread >= 0.0) {
            return bad("spreads must be nonnegative");
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [-1, 1]");
        }
        if !(self.base_sigma > 0.0 && self.base_sigma.is_finite()) {
            return bad("base_sigma must be positive");
        }
        Ok(())
    }

    /// Size-rank score of each block, in `[-1, 1]`.
    pub fn block_scores(&self) -> Vec<f64> {
        let k = self.block_sizes.len();
        if k == 1 {
            return vec![0.0];
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| self.block_sizes[i]);
        let mut score = vec![0.0; k];
        for (rank, &i) in order.iter().enumerate() {
            score[i] = 1.0 - 2.0 * rank as f64 / (k - 1) as f64;
        }
        score
    }

    /// Target control means `μ_ck`.
    pub fn control_means(&self) -> Vec<f64> {
        self.block_scores().iter().map(|s| self.control_mean_spread * s).collect()
    }

    /// Target block effects `τ_k`.
    pub fn effects(&self) -> Vec<f64> {
        self.block_scores().iter().map(|s| self.effect_spread * s).collect()
    }
}

fn center(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Scale a centered vector to sample variance 1; `false` if it is constant.
fn unit_scale(v: &mut [f64]) -> bool {
    let ss: f64 = v.iter().map(|x| x * x).sum();
    let sd = (ss / (v.len() - 1) as f64).sqrt();
    if !(sd > 1e-8) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= sd);
    true
}

/// Two standardized vectors with sample correlation exactly 0.
fn orthonormal_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    loop {
        let mut a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        center(&mut a);
        center(&mut b);
        if !unit_scale(&mut a) {
            continue;
        }
        let proj = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a.iter().map(|x| x * x).sum::<f64>();
        b.iter_mut().zip(&a).for_each(|(y, x)| *y -= proj * x);
        center(&mut b);
        if unit_scale(&mut b) {
            return (a, b);
        }
    }
}

/// Potential outcomes with exact per-block moments: control mean `μ_ck`,
/// treated mean `μ_ck + τ_k`, both standard deviations `base_sigma`, and
/// within-block correlation `rho`.
pub fn gen_scenario_population(config: &ScenarioConfig) -> Result<PotentialOutcomeTable> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mu_c = config.control_means();
    let tau = config.effects();
    let sigma = config.base_sigma;
    let r = config.rho;
    let r_perp = (1.0 - r * r).max(0.0).sqrt();
    let mut blocks = Vec::with_capacity(config.block_sizes.len());
    for (k, &nk) in config.block_sizes.iter().enumerate() {
        let (z, e) = orthonormal_pair(nk, &mut rng);
        let yc: Vec<f64> = z.iter().map(|z| mu_c[k] + sigma * z).collect();
        let yt: Vec<f64> = z.iter().zip(&e).map(|(z, e)| mu_c[k] + tau[k] + sigma * (r * z + r_perp * e)).collect();
        blocks.push((yt, yc));
    }
    PotentialOutcomeTable::from_blocks(&blocks)
}

/// Covariate-outcome relationship for the flexible-blocking study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    /// `y = x + ε`.
    Linear,
    /// `y = ε`.
    Indep,
    /// `y = 10·[x odd] + ε`.
    Odd,
}

impl Dgp {
    pub const ALL: [Dgp; 3] = [Dgp::Linear, Dgp::Indep, Dgp::Odd];

    pub fn name(self) -> &'static str {
        match self {
            Dgp::Linear => "linear",
            Dgp::Indep => "indep",
            Dgp::Odd => "odd",
        }
    }
}

/// A covariate `x` cycling through `1..=16` and a zero-effect outcome
/// (`y_t = y_c = y`), as one unblocked table.
pub fn gen_xy_population<R: Rng + ?Sized>(
    dgp: Dgp,
    n: usize,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<(CovariateSample, PotentialOutcomeTable)> {
    if n == 0 || !n.is_multiple_of(16) {
        return Err(Error::NotMultipleOf16(n));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Input(format!("noise_sigma must be nonnegative, got {noise_sigma}")));
    }
    let x: Vec<f64> = (0..n).map(|i| (i % 16 + 1) as f64).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&x| {
            let eps: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sigma;
            match dgp {
                Dgp::Linear => x + eps,
                Dgp::Indep => eps,
                Dgp::Odd => (if x as i64 % 2 == 1 { 10.0 } else { 0.0 }) + eps,
            }
        })
        .collect();
    let sample = CovariateSample::from_values(&x)?;
    let table = PotentialOutcomeTable::from_parts(&vec![0; n], &y, &y)?;
    Ok((sample, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocking::r2_blocks;
    use crate::population::summarize;

    fn config(spread: f64, rho: f64) -> ScenarioConfig {
        ScenarioConfig {
            block_sizes: vec![10, 10, 10, 15, 15, 15, 20, 20],
            treated_counts: vec![2, 2, 2, 3, 3, 3, 4, 4],
            control_mean_spread: spread,
            effect_spread: spread,
            rho,
            base_sigma: 1.0,
            seed: 7,
        }
    }

    #[test]
    fn scores_fall_with_size() {
        let c = ScenarioConfig { block_sizes: vec![20, 10, 15], treated_counts: vec![1; 3], ..config(1.0, 0.0) };
        assert_eq!(c.block_scores(), vec![-1.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_spread_gives_zero_r2() {
        let t = gen_scenario_population(&config(0.0, 0.5)).unwrap();
        assert!(r2_blocks(&t).unwrap().abs() < 1e-12);
    }

    #[test]
    fn moments_hit_targets() {
        let c = config(2.0, 0.3);
        let t = gen_scenario_population(&c).unwrap();
        let s = summarize(&t);
        let (mu, tau) = (c.control_means(), c.effects());
        for (k, b) in s.blocks.iter().enumerate() {
            assert!((b.mean_c - mu[k]).abs() < 1e-9);
            assert!((b.tau - tau[k]).abs() < 1e-9);
            assert!((b.s2_c.unwrap() - 1.0).abs() < 1e-9);
            assert!((b.s2_t.unwrap() - 1.0).abs() < 1e-9);
            // S²_tc = S²_t + S²_c − 2ρ S_t S_c.
            assert!((b.s2_tc.unwrap() - (2.0 - 2.0 * 0.3)).abs() < 1e-9);
        }
    }

    #[test]
    fn rho_one_gives_additive_effects() {
        let s = summarize(&gen_scenario_population(&config(1.0, 1.0)).unwrap());
        assert!(s.blocks.iter().all(|b| b.s2_tc.unwrap().abs() < 1e-12));
    }

    #[test]
    fn scenario_validation() {
        let mut c = config(1.0, 0.0);
        c.block_sizes[0] = 2;
        assert!(matches!(gen_scenario_population(&c), Err(Error::BadScenario(_))));
        let mut c = config(1.0, 0.0);
        c.treated_counts[1] = 10;
        assert!(matches!(c.validate(), Err(Error::BlockTreatedOutOfRange { block: 2, .. })));
        assert!(config(1.0, 1.5).validate().is_err());
    }

    #[test]
    fn xy_populations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, t) = gen_xy_population(Dgp::Linear, 32, 0.0, &mut rng).unwrap();
        assert!(t.units().iter().zip(x.units()).all(|(u, c)| u.y_c == c.x && u.y_t == u.y_c));
        let (x, t) = gen_xy_population(Dgp::Odd, 16, 0.0, &mut rng).unwrap();
        for (u, c) in t.units().iter().zip(x.units()) {
            assert_eq!(u.y_c, if c.x as i64 % 2 == 1 { 10.0 } else { 0.0 });
        }
        assert_eq!(gen_xy_population(Dgp::Indep, 20, 1.0, &mut rng).unwrap_err(), Error::NotMultipleOf16(20));

        let (x, t) = gen_xy_population(Dgp::Indep, 10_000, 1.0, &mut rng).unwrap();
        let xs = x.values();
        let ys: Vec<f64> = t.units().iter().map(|u| u.y_c).collect();
        let mx = xs.iter().sum::<f64>() / 10_000.0;
        let my = ys.iter().sum::<f64>() / 10_000.0;
        let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|b| (b - my).powi(2)).sum();
        assert!((cov / (vx * vy).sqrt()).abs() < 0.02);
    }
}

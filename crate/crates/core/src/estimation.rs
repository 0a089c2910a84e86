//! Neyman variance estimators and what happens to the complete-randomization
//! estimator when it is applied to a blocked experiment.
//!
//! The exact bias of the misapplied estimator holds for any correlation
//! between potential outcomes. Whether the bias is negative (anti-conservative)
//! depends on that correlation and on how much the block means differ; the
//! library reports the signed value and does not enforce a sign condition.

use rand::Rng;

use crate::design::{equal_proportion_counts, treated_count, Design};
use crate::error::{Error, Result};
use crate::mc::{mean_estimate, replicate};
use crate::oracle::{count_assignments, exact_moments, Statistic};
use crate::population::{summarize, Component, PotentialOutcomeTable, StrataMoments};
use crate::randomizer::{assign, Assignment};
use crate::variance::{neyman_var_blocked, stratum_sizes};

/// Designs with at most this many assignments are evaluated exactly.
pub const EXACT_THRESHOLD: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedUnit {
    pub block: usize,
    pub treated: bool,
    pub y: f64,
}

/// What one experiment reveals: block, arm and the observed outcome per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSample {
    units: Vec<ObservedUnit>,
    n_blocks: usize,
}

impl ObservedSample {
    pub fn new(units: Vec<ObservedUnit>, n_blocks: usize) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptyTable);
        }
        if units.iter().any(|u| u.block >= n_blocks) {
            return Err(Error::BadBlockLabels);
        }
        Ok(Self { units, n_blocks })
    }

    pub fn units(&self) -> &[ObservedUnit] {
        &self.units
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Observed outcomes of one arm, optionally restricted to a block.
    fn arm(&self, treated: bool, block: Option<usize>) -> Vec<f64> {
        self.units.iter().filter(|u| u.treated == treated && block.is_none_or(|b| u.block == b)).map(|u| u.y).collect()
    }
}

/// Reveal `y_t` for treated units and `y_c` for controls.
pub fn observe(table: &PotentialOutcomeTable, assignment: &Assignment) -> Result<ObservedSample> {
    if assignment.len() != table.n() {
        return Err(Error::LengthMismatch { left: table.n(), right: assignment.len() });
    }
    let units = table
        .units()
        .iter()
        .zip(assignment.as_slice())
        .map(|(u, &z)| ObservedUnit { block: u.block, treated: z, y: if z { u.y_t } else { u.y_c } })
        .collect();
    ObservedSample::new(units, table.n_blocks())
}

fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// `s²_c/n_c + s²_t/n_t`, ignoring block membership.
pub fn var_est_cr(obs: &ObservedSample) -> Result<f64> {
    let t = obs.arm(true, None);
    let c = obs.arm(false, None);
    if t.len() < 2 {
        return Err(Error::ArmTooSmall { arm: "treatment", got: t.len(), needed: 2 });
    }
    if c.len() < 2 {
        return Err(Error::ArmTooSmall { arm: "control", got: c.len(), needed: 2 });
    }
    Ok(sample_var(&c) / c.len() as f64 + sample_var(&t) / t.len() as f64)
}

/// `Σ (n_k/n)² (s²_ck/n_ck + s²_tk/n_tk)`. Every block needs two units per
/// arm; estimators for singleton arms are not provided.
pub fn var_est_blocked(obs: &ObservedSample) -> Result<f64> {
    let n = obs.units.len() as f64;
    let mut est = 0.0;
    for k in 0..obs.n_blocks {
        let t = obs.arm(true, Some(k));
        let c = obs.arm(false, Some(k));
        if t.len() < 2 {
            return Err(Error::SingletonArm { block: k + 1, arm: "treatment" });
        }
        if c.len() < 2 {
            return Err(Error::SingletonArm { block: k + 1, arm: "control" });
        }
        let nk = (t.len() + c.len()) as f64;
        let w = nk / n;
        est += w * w * (sample_var(&c) / c.len() as f64 + sample_var(&t) / t.len() as f64);
    }
    Ok(est)
}

/// Which arm a statistic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Treatment,
    Control,
}

fn blocked_counts(design: &Design, table: &PotentialOutcomeTable) -> Result<Vec<usize>> {
    design.validate(table)?;
    match design {
        Design::Blocked { n_treated } if design.has_equal_proportions(table) => Ok(n_treated.clone()),
        Design::Blocked { .. } => Err(Error::UnequalProportions),
        Design::Complete { .. } => Err(Error::Input("a blocked design is required".into())),
    }
}

/// Expected arm sample variance `E[s²_z]` when units are assigned by an
/// equal-proportion blocked design but pooled as if completely randomized:
/// `Σ (n_k/n − p_z(n−n_k)/(n(n_z−1))) S²_zk + (1/(n_z−1)) Σ n_zk (Ȳ_k(z) − Ȳ(z))²`.
pub fn expected_s2_under_blocking(table: &PotentialOutcomeTable, arm: Arm, design: &Design) -> Result<f64> {
    let n_treated = blocked_counts(design, table)?;
    let n = table.n();
    let (comp, arm_counts): (Component, Vec<usize>) = match arm {
        Arm::Treatment => (Component::Treatment, n_treated),
        Arm::Control => {
            (Component::Control, table.block_sizes().iter().zip(&n_treated).map(|(nk, nt)| nk - nt).collect())
        }
    };
    let nz: usize = arm_counts.iter().sum();
    if nz < 2 {
        return Err(Error::ArmTooSmall {
            arm: if arm == Arm::Treatment { "treatment" } else { "control" },
            got: nz,
            needed: 2,
        });
    }
    let s = summarize(table);
    let s2 = s.block_s2(comp)?;
    let nf = n as f64;
    let nzf = nz as f64;
    let pz = nzf / nf;
    let grand = s.pooled.mean(comp);
    let mut out = 0.0;
    for ((b, s2k), &nzk) in s.blocks.iter().zip(s2).zip(&arm_counts) {
        let nk = b.n as f64;
        out += (nk / nf - pz * (nf - nk) / (nf * (nzf - 1.0))) * s2k;
        let d = b.mean(comp) - grand;
        out += nzk as f64 * d * d / (nzf - 1.0);
    }
    Ok(out)
}

/// `E[v̂_BK]` under its own design: `Σ (n_k/n)² (S²_ck/n_ck + S²_tk/n_tk)`,
/// which exceeds the true variance by `Σ (n_k/n)² S²_tck/n_k`.
pub fn expected_varest_blocked(table: &PotentialOutcomeTable, design: &Design) -> Result<f64> {
    let Design::Blocked { n_treated } = design else {
        return Err(Error::Input("a blocked design is required".into()));
    };
    design.validate(table)?;
    let s = summarize(table);
    let s2t = s.block_s2(Component::Treatment)?;
    let s2c = s.block_s2(Component::Control)?;
    let n = table.n() as f64;
    Ok(s.blocks
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let nk = b.n as f64;
            let ntk = n_treated[k] as f64;
            (nk / n).powi(2) * (s2c[k] / (nk - ntk) + s2t[k] / ntk)
        })
        .sum())
}

/// Expected value, true variance and bias of the CR variance estimator under
/// a blocked design.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CrEstimatorBias {
    pub expected_varest_cr: f64,
    pub true_var_bk: f64,
    pub bias: f64,
}

/// Bias of `v̂_CR` when the experiment was blocked with proportion `p` in
/// every block:
/// `(1/(n_c−1)) Σ w_k Δ²_ck + (1/(n_t−1)) Σ w_k Δ²_tk
///  − [Σ (n−n_k)/(n²(n_c−1)) S²_ck + Σ (n−n_k)/(n²(n_t−1)) S²_tk − Σ n_k/n² S²_tck]`
/// where `Δ_zk` is block mean minus overall mean for arm `z`.
pub fn cr_varest_bias_under_blocking(table: &PotentialOutcomeTable, p: f64) -> Result<CrEstimatorBias> {
    let counts = equal_proportion_counts(table.block_sizes(), p)?;
    let design = Design::blocked(counts);
    design.validate(table)?;
    let n = table.n() as f64;
    let n_t = treated_count(p, table.n())? as f64;
    let n_c = n - n_t;
    if n_t < 2.0 || n_c < 2.0 {
        return Err(Error::TooFewUnits { needed: 2, got: n_t.min(n_c) as usize });
    }
    let s = summarize(table);
    let s2t = s.block_s2(Component::Treatment)?;
    let s2c = s.block_s2(Component::Control)?;
    let s2tc = s.block_s2(Component::Effect)?;
    let mut between = 0.0;
    let mut within = 0.0;
    for (k, b) in s.blocks.iter().enumerate() {
        let nk = b.n as f64;
        let w = nk / n;
        let dc = b.mean_c - s.pooled.mean_c;
        let dt = b.mean_t - s.pooled.mean_t;
        between += w * dc * dc / (n_c - 1.0) + w * dt * dt / (n_t - 1.0);
        within += (n - nk) / (n * n * (n_c - 1.0)) * s2c[k] + (n - nk) / (n * n * (n_t - 1.0)) * s2t[k]
            - nk / (n * n) * s2tc[k];
    }
    let bias = between - within;
    let true_var_bk = neyman_var_blocked(table, &design)?;
    Ok(CrEstimatorBias { expected_varest_cr: true_var_bk + bias, true_var_bk, bias })
}

/// Bias of `v̂_CR` under blocking when units come from stratified sampling:
/// `(1/(n_c−1)) Σ w_k (μ(c,k)−μ_c)² + (1/(n_t−1)) Σ w_k (μ(t,k)−μ_t)²`,
/// never negative.
pub fn cr_varest_bias_strat(moments: &StrataMoments, n: usize, p: f64) -> Result<f64> {
    let sizes = stratum_sizes(moments, n)?;
    equal_proportion_counts(&sizes, p)?;
    let nf = n as f64;
    let n_t = treated_count(p, n)? as f64;
    let n_c = nf - n_t;
    if n_t < 2.0 || n_c < 2.0 {
        return Err(Error::TooFewUnits { needed: 2, got: n_t.min(n_c) as usize });
    }
    let s = moments.strata();
    let mu_c: f64 = s.iter().map(|x| x.weight * x.mu_c).sum();
    let mu_t: f64 = s.iter().map(|x| x.weight * x.mu_t).sum();
    let sc: f64 = s.iter().map(|x| x.weight * (x.mu_c - mu_c).powi(2)).sum();
    let st: f64 = s.iter().map(|x| x.weight * (x.mu_t - mu_t).powi(2)).sum();
    Ok(sc / (n_c - 1.0) + st / (n_t - 1.0))
}

/// Which variance estimator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarEstimator {
    Cr,
    Blocked,
}

/// Distribution summary of a variance estimator over the randomization law.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct VarestVariability {
    pub mean_varest: f64,
    pub var_of_varest: f64,
    /// True when computed by full enumeration rather than Monte Carlo.
    pub exact: bool,
    /// Assignments enumerated, or replications drawn.
    pub draws: u64,
}

/// Mean and variance of `estimator` across assignments of `design`. Exact
/// enumeration is used when the design has at most [`EXACT_THRESHOLD`]
/// assignments; otherwise `reps` seeded draws.
pub fn varest_variability(
    table: &PotentialOutcomeTable,
    design: &Design,
    estimator: VarEstimator,
    reps: usize,
    seed: u64,
) -> Result<VarestVariability> {
    let total = match count_assignments(table, design) {
        Ok(c) => Some(c),
        Err(Error::AboveCap(..)) => None,
        Err(e) => return Err(e),
    };
    if let Some(count) = total.filter(|&c| c <= EXACT_THRESHOLD) {
        let stat = match estimator {
            VarEstimator::Cr => Statistic::VarEstCr,
            VarEstimator::Blocked => Statistic::VarEstBlocked,
        };
        let m = exact_moments(table, design, &stat)?;
        return Ok(VarestVariability { mean_varest: m.mean, var_of_varest: m.variance, exact: true, draws: count });
    }
    if reps < 2 {
        return Err(Error::Input("at least two replications are required".into()));
    }
    let draws = replicate(reps, seed, |_, rng| varest_draw(table, design, estimator, rng));
    let draws: Vec<f64> = draws.into_iter().collect::<Result<_>>()?;
    let m = mean_estimate(&draws);
    Ok(VarestVariability { mean_varest: m.mean, var_of_varest: m.variance, exact: false, draws: reps as u64 })
}

fn varest_draw<R: Rng + ?Sized>(
    table: &PotentialOutcomeTable,
    design: &Design,
    estimator: VarEstimator,
    rng: &mut R,
) -> Result<f64> {
    let a = assign(table, design, rng)?;
    let obs = observe(table, &a)?;
    match estimator {
        VarEstimator::Cr => var_est_cr(&obs),
        VarEstimator::Blocked => var_est_blocked(&obs),
    }
}

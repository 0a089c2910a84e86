//! The three canonical simulation studies, plus the paired check that
//! flexible blocking on an irrelevant covariate neither helps nor hurts.
//!
//! Every study takes a JSON-deserializable config whose missing fields fall
//! back to the defaults below, and returns tidy rows ready for CSV output.
//! Results depend only on the config (seed included), never on thread count.

use serde::{Deserialize, Serialize};

use crate::blocking::{make_blocks_flex, make_blocks_interleave, make_blocks_peevish, r2_blocks, CovariateSample};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimation::{cr_varest_bias_under_blocking, expected_varest_blocked, varest_variability, VarEstimator};
use crate::io::write_rows;
use crate::mc::{mean_estimate, mix, replicate, MeanEstimate};
use crate::population::PotentialOutcomeTable;
use crate::scenario::{gen_scenario_population, gen_xy_population, Dgp, ScenarioConfig};
use crate::variance::{neyman_var_blocked, neyman_var_cr};

pub const BLOCK_SIZES: [usize; 8] = [10, 10, 10, 15, 15, 15, 20, 20];
pub const TREATED_EQUAL: [usize; 8] = [2, 2, 2, 3, 3, 3, 4, 4];
pub const TREATED_UNEQUAL: [usize; 8] = [1, 3, 3, 2, 4, 2, 3, 5];

fn default_rhos() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

/// Names accepted by [`run_study`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyName {
    RatioSweep,
    FlexibleBlocking,
    Misconceptions,
}

impl std::str::FromStr for StudyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio-sweep" => Ok(StudyName::RatioSweep),
            "flexible-blocking" => Ok(StudyName::FlexibleBlocking),
            "misconceptions" => Ok(StudyName::Misconceptions),
            other => Err(Error::Input(format!("unknown study {other:?}"))),
        }
    }
}

impl StudyName {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyName::RatioSweep => "ratio-sweep",
            StudyName::FlexibleBlocking => "flexible-blocking",
            StudyName::Misconceptions => "misconceptions",
        }
    }
}

// ---------------------------------------------------------------- ratio sweep

/// Blocked-to-CR variance ratio as blocks become more predictive. Each grid
/// point scales both the control-mean spread and the effect spread by
/// `scale`; `rho` is the within-block correlation of potential outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioSweepConfig {
    pub block_sizes: Vec<usize>,
    pub treated_equal: Vec<usize>,
    pub treated_unequal: Vec<usize>,
    pub base_sigma: f64,
    pub rhos: Vec<f64>,
    pub scales: Vec<f64>,
    pub seed: u64,
}

impl Default for RatioSweepConfig {
    fn default() -> Self {
        Self {
            block_sizes: BLOCK_SIZES.to_vec(),
            treated_equal: TREATED_EQUAL.to_vec(),
            treated_unequal: TREATED_UNEQUAL.to_vec(),
            base_sigma: 1.0,
            rhos: default_rhos(),
            scales: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSweepRow {
    pub scale: f64,
    pub rho: f64,
    pub r2: f64,
    pub var_cr: f64,
    pub var_bk_equal_p: f64,
    pub var_bk_unequal_p: f64,
    pub ratio_equal_p: f64,
    pub ratio_unequal_p: f64,
}

fn scenario(block_sizes: &[usize], treated: &[usize], scale: f64, rho: f64, sigma: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        block_sizes: block_sizes.to_vec(),
        treated_counts: treated.to_vec(),
        control_mean_spread: scale,
        effect_spread: scale,
        rho,
        base_sigma: sigma,
        seed,
    }
}

/// Populations share one seed per `rho`, so along the `scale` axis only the
/// block targets move.
pub fn ratio_sweep(config: &RatioSweepConfig) -> Result<Vec<RatioSweepRow>> {
    let n_t: usize = config.treated_equal.iter().sum();
    if config.treated_unequal.iter().sum::<usize>() != n_t {
        return Err(Error::BadScenario("equal and unequal designs must treat the same number of units".into()));
    }
    let eq = Design::blocked(config.treated_equal.clone());
    let uneq = Design::blocked(config.treated_unequal.clone());
    let mut rows = Vec::new();
    for (ri, &rho) in config.rhos.iter().enumerate() {
        for &scale in &config.scales {
            let sc = scenario(
                &config.block_sizes,
                &config.treated_equal,
                scale,
                rho,
                config.base_sigma,
                mix(config.seed, ri as u64),
            );
            let table = gen_scenario_population(&sc)?;
            if !eq.has_equal_proportions(&table) {
                return Err(Error::UnequalProportions);
            }
            let var_cr = neyman_var_cr(&table, n_t)?;
            let var_bk_equal_p = neyman_var_blocked(&table, &eq)?;
            let var_bk_unequal_p = neyman_var_blocked(&table, &uneq)?;
            rows.push(RatioSweepRow {
                scale,
                rho,
                r2: r2_blocks(&table)?,
                var_cr,
                var_bk_equal_p,
                var_bk_unequal_p,
                ratio_equal_p: var_bk_equal_p / var_cr,
                ratio_unequal_p: var_bk_unequal_p / var_cr,
            });
        }
    }
    Ok(rows)
}

// --------------------------------------------------------- flexible blocking

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockingMethod {
    Flex,
    Interleave,
    Peevish,
}

impl BlockingMethod {
    pub const ALL: [BlockingMethod; 3] = [BlockingMethod::Flex, BlockingMethod::Interleave, BlockingMethod::Peevish];

    pub fn name(self) -> &'static str {
        match self {
            BlockingMethod::Flex => "flex",
            BlockingMethod::Interleave => "interleave",
            BlockingMethod::Peevish => "peevish",
        }
    }
}

/// Relative standard error of blocking against complete randomization when
/// blocks are built from one covariate by different methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlexibleBlockingConfig {
    pub n: usize,
    pub block_size: usize,
    pub interleave_blocks: usize,
    pub noise_sigma: f64,
    pub reps: usize,
    pub dgps: Vec<Dgp>,
    pub methods: Vec<BlockingMethod>,
    pub seed: u64,
}

impl Default for FlexibleBlockingConfig {
    fn default() -> Self {
        Self {
            n: 64,
            block_size: 8,
            interleave_blocks: 8,
            noise_sigma: 1.0,
            reps: 2000,
            dgps: Dgp::ALL.to_vec(),
            methods: BlockingMethod::ALL.to_vec(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlexibleBlockingRow {
    pub method: &'static str,
    pub dgp: &'static str,
    /// `100 · mean(SE_bk) / mean(SE_cr)`.
    pub relative_se_pct: f64,
    /// `100 · mean(average within-block S² of x / overall S² of x)`.
    pub x_ratio_pct: f64,
    pub y_ratio_pct: f64,
    pub reps: usize,
}

fn blocks_for(method: BlockingMethod, x: &CovariateSample, config: &FlexibleBlockingConfig) -> Result<Vec<usize>> {
    match method {
        BlockingMethod::Flex => make_blocks_flex(x, config.block_size),
        BlockingMethod::Interleave => make_blocks_interleave(x, config.interleave_blocks),
        BlockingMethod::Peevish => make_blocks_peevish(x, config.block_size),
    }
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Average within-block sample variance over overall sample variance.
pub fn within_share(values: &[f64], labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); k];
    for (&b, &v) in labels.iter().zip(values) {
        groups[b].push(v);
    }
    let within = groups.iter().map(|g| sample_var(g)).sum::<f64>() / k as f64;
    within / sample_var(values)
}

/// Blocked design treating half of every block; all blocks must be even.
fn half_design(table: &PotentialOutcomeTable) -> Result<Design> {
    let counts = table
        .block_sizes()
        .iter()
        .map(|&s| if s % 2 == 0 { Ok(s / 2) } else { Err(Error::BadBlockSize(s)) })
        .collect::<Result<Vec<_>>>()?;
    Ok(Design::blocked(counts))
}

pub fn flexible_blocking(config: &FlexibleBlockingConfig) -> Result<Vec<FlexibleBlockingRow>> {
    if config.reps == 0 {
        return Err(Error::Input("reps must be positive".into()));
    }
    let n_t = config.n / 2;
    let mut rows = Vec::new();
    for (di, &dgp) in config.dgps.iter().enumerate() {
        let per_rep = replicate(config.reps, mix(config.seed, di as u64), |_, rng| {
            let (x, table) = gen_xy_population(dgp, config.n, config.noise_sigma, rng)?;
            let var_cr = neyman_var_cr(&table, n_t)?;
            let ys: Vec<f64> = table.units().iter().map(|u| u.y_c).collect();
            config
                .methods
                .iter()
                .map(|&m| {
                    let labels = blocks_for(m, &x, config)?;
                    let blocked = table.with_block_labels(&labels)?;
                    let var_bk = neyman_var_blocked(&blocked, &half_design(&blocked)?)?;
                    Ok((var_bk.sqrt(), var_cr.sqrt(), within_share(&x.values(), &labels), within_share(&ys, &labels)))
                })
                .collect::<Result<Vec<_>>>()
        });
        let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
        for (mi, &m) in config.methods.iter().enumerate() {
            let col = |f: fn(&(f64, f64, f64, f64)) -> f64| -> Vec<f64> { per_rep.iter().map(|r| f(&r[mi])).collect() };
            let se_bk = mean_estimate(&col(|r| r.0)).mean;
            let se_cr = mean_estimate(&col(|r| r.1)).mean;
            rows.push(FlexibleBlockingRow {
                method: m.name(),
                dgp: dgp.name(),
                relative_se_pct: 100.0 * se_bk / se_cr,
                x_ratio_pct: 100.0 * mean_estimate(&col(|r| r.2)).mean,
                y_ratio_pct: 100.0 * mean_estimate(&col(|r| r.3)).mean,
                reps: config.reps,
            });
        }
    }
    Ok(rows)
}

/// Paired Monte Carlo of `var_bk − var_cr` with flexible blocks of
/// `block_size` on `x` and half of each block treated.
pub fn paired_flex_difference(
    dgp: Dgp,
    n: usize,
    block_size: usize,
    noise_sigma: f64,
    reps: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    let diffs = replicate(reps, seed, |_, rng| {
        let (x, table) = gen_xy_population(dgp, n, noise_sigma, rng)?;
        let blocked = table.with_block_labels(&make_blocks_flex(&x, block_size)?)?;
        Ok(neyman_var_blocked(&blocked, &half_design(&blocked)?)? - neyman_var_cr(&table, n / 2)?)
    });
    let diffs = diffs.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(mean_estimate(&diffs))
}

// ------------------------------------------------------------ misconceptions

/// Bias and variability of the two variance estimators on the ratio-sweep
/// populations, equal proportions only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MisconceptionsConfig {
    pub block_sizes: Vec<usize>,
    pub treated_counts: Vec<usize>,
    pub base_sigma: f64,
    pub rhos: Vec<f64>,
    pub scales: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for MisconceptionsConfig {
    fn default() -> Self {
        Self {
            block_sizes: BLOCK_SIZES.to_vec(),
            treated_counts: TREATED_EQUAL.to_vec(),
            base_sigma: 1.0,
            rhos: default_rhos(),
            scales: vec![0.0, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0],
            reps: 5000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisconceptionsRow {
    pub scale: f64,
    pub rho: f64,
    pub r2: f64,
    pub var_bk: f64,
    /// `E[v̂_CR]` under the blocked design, over the true blocked variance.
    pub cr_estimator_ratio: f64,
    /// `E[v̂_BK]` under the blocked design, over the true blocked variance.
    pub bk_estimator_ratio: f64,
    /// Variance of `v̂_CR` under complete randomization.
    pub var_varest_cr: f64,
    /// Variance of `v̂_BK` under the blocked design.
    pub var_varest_bk: f64,
    pub variability_ratio: f64,
    pub reps: usize,
}

pub fn misconceptions(config: &MisconceptionsConfig) -> Result<Vec<MisconceptionsRow>> {
    let n_t: usize = config.treated_counts.iter().sum();
    let n: usize = config.block_sizes.iter().sum();
    let p = n_t as f64 / n as f64;
    let design = Design::blocked(config.treated_counts.clone());
    let mut rows = Vec::new();
    for (ri, &rho) in config.rhos.iter().enumerate() {
        for (si, &scale) in config.scales.iter().enumerate() {
            let sc = scenario(
                &config.block_sizes,
                &config.treated_counts,
                scale,
                rho,
                config.base_sigma,
                mix(config.seed, ri as u64),
            );
            let table = gen_scenario_population(&sc)?;
            if !design.has_equal_proportions(&table) {
                return Err(Error::UnequalProportions);
            }
            let bias = cr_varest_bias_under_blocking(&table, p)?;
            let e_bk = expected_varest_blocked(&table, &design)?;
            let stream = mix(config.seed, 1000 + (ri * config.scales.len() + si) as u64);
            let cr = varest_variability(&table, &Design::complete(n_t), VarEstimator::Cr, config.reps, mix(stream, 0))?;
            let bk = varest_variability(&table, &design, VarEstimator::Blocked, config.reps, mix(stream, 1))?;
            rows.push(MisconceptionsRow {
                scale,
                rho,
                r2: r2_blocks(&table)?,
                var_bk: bias.true_var_bk,
                cr_estimator_ratio: bias.expected_varest_cr / bias.true_var_bk,
                bk_estimator_ratio: e_bk / bias.true_var_bk,
                var_varest_cr: cr.var_of_varest,
                var_varest_bk: bk.var_of_varest,
                variability_ratio: cr.var_of_varest / bk.var_of_varest,
                reps: config.reps,
            });
        }
    }
    Ok(rows)
}

// ------------------------------------------------------------------ dispatch

/// A resolved study configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StudyConfig {
    RatioSweep(RatioSweepConfig),
    FlexibleBlocking(FlexibleBlockingConfig),
    Misconceptions(MisconceptionsConfig),
}

impl StudyConfig {
    pub fn default_for(name: StudyName) -> Self {
        match name {
            StudyName::RatioSweep => StudyConfig::RatioSweep(Default::default()),
            StudyName::FlexibleBlocking => StudyConfig::FlexibleBlocking(Default::default()),
            StudyName::Misconceptions => StudyConfig::Misconceptions(Default::default()),
        }
    }

    /// Parse a JSON config for `name`; absent fields take their defaults.
    pub fn from_json(name: StudyName, json: &str) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::Input(format!("{} config: {e}", name.as_str()));
        Ok(match name {
            StudyName::RatioSweep => StudyConfig::RatioSweep(serde_json::from_str(json).map_err(bad)?),
            StudyName::FlexibleBlocking => StudyConfig::FlexibleBlocking(serde_json::from_str(json).map_err(bad)?),
            StudyName::Misconceptions => StudyConfig::Misconceptions(serde_json::from_str(json).map_err(bad)?),
        })
    }

    pub fn name(&self) -> StudyName {
        match self {
            StudyConfig::RatioSweep(_) => StudyName::RatioSweep,
            StudyConfig::FlexibleBlocking(_) => StudyName::FlexibleBlocking,
            StudyConfig::Misconceptions(_) => StudyName::Misconceptions,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            StudyConfig::RatioSweep(c) => c.seed,
            StudyConfig::FlexibleBlocking(c) => c.seed,
            StudyConfig::Misconceptions(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            StudyConfig::RatioSweep(c) => c.seed = seed,
            StudyConfig::FlexibleBlocking(c) => c.seed = seed,
            StudyConfig::Misconceptions(c) => c.seed = seed,
        }
    }

    /// Override the replication count. The ratio sweep is exact and has none.
    pub fn set_reps(&mut self, reps: usize) {
        match self {
            StudyConfig::RatioSweep(_) => {}
            StudyConfig::FlexibleBlocking(c) => c.reps = reps,
            StudyConfig::Misconceptions(c) => c.reps = reps,
        }
    }
}

/// Rows produced by one study.
#[derive(Debug, Clone, PartialEq)]
pub enum StudyRows {
    RatioSweep(Vec<RatioSweepRow>),
    FlexibleBlocking(Vec<FlexibleBlockingRow>),
    Misconceptions(Vec<MisconceptionsRow>),
}

impl StudyRows {
    pub fn len(&self) -> usize {
        match self {
            StudyRows::RatioSweep(r) => r.len(),
            StudyRows::FlexibleBlocking(r) => r.len(),
            StudyRows::Misconceptions(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W, comment: Option<&str>) -> Result<()> {
        match self {
            StudyRows::RatioSweep(r) => write_rows(w, r, comment),
            StudyRows::FlexibleBlocking(r) => write_rows(w, r, comment),
            StudyRows::Misconceptions(r) => write_rows(w, r, comment),
        }
    }
}

pub fn run_study(config: &StudyConfig) -> Result<StudyRows> {
    Ok(match config {
        StudyConfig::RatioSweep(c) => StudyRows::RatioSweep(ratio_sweep(c)?),
        StudyConfig::FlexibleBlocking(c) => StudyRows::FlexibleBlocking(flexible_blocking(c)?),
        StudyConfig::Misconceptions(c) => StudyRows::Misconceptions(misconceptions(c)?),
    })
}

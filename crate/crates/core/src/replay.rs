//! Replay hypothetical blocked experiments on one realized data set.
//!
//! The observed outcome stands in for both potential outcomes (no treatment
//! effect), so each strategy's blocked variance can be compared with complete
//! randomization of the same number of treated units. When a strategy asks
//! for balanced proportions, treated counts are apportioned to blocks by the
//! largest-remainder rule (ties go to the lower block index); a strategy is
//! infeasible when some block would get no treated or no control unit.
//!
//! Sorting on the outcome itself never does worse than complete
//! randomization when the apportioned proportions come out equal. When
//! rounding leaves them unequal it can.

use serde::{Deserialize, Serialize};

use crate::blocking::make_blocks_random;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::io::ReplayRow;
use crate::mc::{mean_estimate, mix, quantile, replicate};
use crate::population::{PotentialOutcomeTable, RawRecord};
use crate::variance::{neyman_var_blocked, neyman_var_cr};

pub const DEFAULT_ALLOCATIONS: usize = 1000;

/// A realized experiment prepared for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayData {
    pub table: PotentialOutcomeTable,
    pub baseline: Vec<f64>,
    pub treated: Vec<bool>,
}

fn parse_treated(s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "t" | "true" | "treated" => Ok(true),
        "0" | "c" | "false" | "control" => Ok(false),
        other => Err(Error::Input(format!("unrecognized treated value {other:?}"))),
    }
}

impl ReplayData {
    pub fn from_rows(rows: Vec<ReplayRow>) -> Result<Self> {
        let mut baseline = Vec::with_capacity(rows.len());
        let mut treated = Vec::with_capacity(rows.len());
        let mut records = Vec::with_capacity(rows.len());
        for r in rows {
            if !r.baseline.is_finite() {
                return Err(Error::NonFiniteCovariate { unit_id: r.unit_id });
            }
            baseline.push(r.baseline);
            treated.push(parse_treated(&r.treated)?);
            records.push(RawRecord { unit_id: r.unit_id, block: r.block, y_t: r.y, y_c: r.y });
        }
        let table = PotentialOutcomeTable::from_records(records)?;
        Ok(Self { table, baseline, treated })
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&z| z).count()
    }

    /// Realized treated count in each original block.
    pub fn realized_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.table.n_blocks()];
        for (u, &z) in self.table.units().iter().zip(&self.treated) {
            c[u.block] += z as usize;
        }
        c
    }
}

/// Largest-remainder apportionment of `n_t` over blocks of the given sizes.
pub fn apportion(sizes: &[usize], n_t: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let mut counts: Vec<usize> = sizes.iter().map(|&s| s * n_t / n).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // Remainders compared exactly as integers `(s·n_t) mod n`.
    order.sort_by(|&a, &b| ((sizes[b] * n_t) % n).cmp(&((sizes[a] * n_t) % n)).then(a.cmp(&b)));
    let left = n_t - counts.iter().sum::<usize>();
    for &k in order.iter().take(left) {
        counts[k] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    KeepBlocks,
    BalanceProportions,
    RandomBlocks,
    BaselineSortedBlocks,
    OutcomeSortedBlocks,
}

impl StrategyName {
    pub const ALL: [StrategyName; 5] = [
        StrategyName::KeepBlocks,
        StrategyName::BalanceProportions,
        StrategyName::RandomBlocks,
        StrategyName::BaselineSortedBlocks,
        StrategyName::OutcomeSortedBlocks,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::KeepBlocks => "keep-blocks",
            StrategyName::BalanceProportions => "balance-proportions",
            StrategyName::RandomBlocks => "random-blocks",
            StrategyName::BaselineSortedBlocks => "baseline-sorted-blocks",
            StrategyName::OutcomeSortedBlocks => "outcome-sorted-blocks",
        }
    }

    /// Whether treated counts are balanced when the params leave it open.
    fn balanced_by_default(self) -> bool {
        !matches!(self, StrategyName::KeepBlocks)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    /// Apportion treated counts to the overall proportion (otherwise keep
    /// the realized per-block counts, matched by block position).
    pub balanced: Option<bool>,
    /// Random allocations for `random-blocks`.
    pub allocations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub name: StrategyName,
    #[serde(default)]
    pub params: StrategyParams,
}

impl Strategy {
    pub fn defaults() -> Vec<Strategy> {
        StrategyName::ALL.iter().map(|&name| Strategy { name, params: StrategyParams::default() }).collect()
    }
}

/// One strategy's result. `relative_se_pct` is `100 · SE_bk / SE_cr`; for
/// `random-blocks` it uses the mean SE over allocations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub strategy: &'static str,
    pub balanced: bool,
    pub n_blocks: usize,
    pub relative_se_pct: f64,
    pub p99_relative_se_pct: Option<f64>,
    pub allocations: Option<usize>,
}

fn counts_for(data: &ReplayData, sizes: &[usize], balanced: bool, name: StrategyName) -> Result<Vec<usize>> {
    let counts = if balanced { apportion(sizes, data.n_treated()) } else { data.realized_counts() };
    if let Some(k) = counts.iter().zip(sizes).position(|(&c, &s)| c == 0 || c >= s) {
        return Err(Error::InfeasibleStrategy(
            name.as_str().to_string(),
            format!("block {} of size {} would get {} treated", k + 1, sizes[k], counts[k]),
        ));
    }
    Ok(counts)
}

/// Labels that cut units sorted by `key` (ties by unit id) into consecutive
/// groups with the original block sizes, in block order.
fn sorted_chunks(table: &PotentialOutcomeTable, key: &[f64]) -> Vec<usize> {
    let units = table.units();
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then_with(|| units[a].unit_id.cmp(&units[b].unit_id)));
    let mut labels = vec![0; units.len()];
    let mut pos = 0;
    for (k, &s) in table.block_sizes().iter().enumerate() {
        for &i in &order[pos..pos + s] {
            labels[i] = k;
        }
        pos += s;
    }
    labels
}

fn se_blocked(table: &PotentialOutcomeTable, labels: &[usize], counts: &[usize]) -> Result<f64> {
    let t = table.with_block_labels(labels)?;
    Ok(neyman_var_blocked(&t, &Design::blocked(counts.to_vec()))?.sqrt())
}

pub fn run_strategy(data: &ReplayData, strategy: &Strategy, seed: u64) -> Result<ReplayReport> {
    let table = &data.table;
    let name = strategy.name;
    let balanced = strategy.params.balanced.unwrap_or(name.balanced_by_default());
    let sizes = table.block_sizes().to_vec();
    let counts = counts_for(data, &sizes, balanced, name)?;
    let se_cr = neyman_var_cr(table, data.n_treated())?.sqrt();
    let report = |rel: f64, p99: Option<f64>, allocations: Option<usize>| ReplayReport {
        strategy: name.as_str(),
        balanced,
        n_blocks: sizes.len(),
        relative_se_pct: rel,
        p99_relative_se_pct: p99,
        allocations,
    };
    match name {
        StrategyName::KeepBlocks | StrategyName::BalanceProportions => {
            Ok(report(100.0 * se_blocked(table, &table.labels(), &counts)? / se_cr, None, None))
        }
        StrategyName::BaselineSortedBlocks => {
            let labels = sorted_chunks(table, &data.baseline);
            Ok(report(100.0 * se_blocked(table, &labels, &counts)? / se_cr, None, None))
        }
        StrategyName::OutcomeSortedBlocks => {
            let y: Vec<f64> = table.units().iter().map(|u| u.y_c).collect();
            let labels = sorted_chunks(table, &y);
            Ok(report(100.0 * se_blocked(table, &labels, &counts)? / se_cr, None, None))
        }
        StrategyName::RandomBlocks => {
            let allocations = strategy.params.allocations.unwrap_or(DEFAULT_ALLOCATIONS);
            if allocations == 0 {
                return Err(Error::Input("allocations must be positive".into()));
            }
            let ses = replicate(allocations, seed, |_, rng| {
                let labels = make_blocks_random(table.n(), &sizes, rng)?;
                se_blocked(table, &labels, &counts)
            });
            let ses = ses.into_iter().collect::<Result<Vec<f64>>>()?;
            let rel: Vec<f64> = ses.iter().map(|s| 100.0 * s / se_cr).collect();
            let mean = 100.0 * mean_estimate(&ses).mean / se_cr;
            Ok(report(mean, Some(quantile(&rel, 0.99)), Some(allocations)))
        }
    }
}

/// Run each strategy; randomized strategies get independent streams.
pub fn replay(data: &ReplayData, strategies: &[Strategy], seed: u64) -> Result<Vec<ReplayReport>> {
    strategies.iter().enumerate().map(|(i, s)| run_strategy(data, s, mix(seed, i as u64))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(blocks: &[&str], treated: &[u8], baseline: &[f64], y: &[f64]) -> ReplayData {
        let rows = (0..y.len())
            .map(|i| ReplayRow {
                unit_id: format!("u{i:03}"),
                block: blocks[i].to_string(),
                treated: treated[i].to_string(),
                baseline: baseline[i],
                y: y[i],
            })
            .collect();
        ReplayData::from_rows(rows).unwrap()
    }

    #[test]
    fn apportionment() {
        assert_eq!(apportion(&[10, 10, 10], 7), vec![3, 2, 2]);
        assert_eq!(apportion(&[4, 6], 5), vec![2, 3]);
        assert_eq!(apportion(&[5, 5], 5), vec![3, 2]);
        assert_eq!(apportion(&[3, 7], 0), vec![0, 0]);
    }

    #[test]
    fn keep_blocks_single_block_is_100() {
        let d = data(&["a"; 6], &[1, 0, 1, 0, 0, 1], &[0.0; 6], &[1.0, 4.0, 2.0, 8.0, 5.0, 7.0]);
        let r = run_strategy(&d, &Strategy { name: StrategyName::KeepBlocks, params: Default::default() }, 0).unwrap();
        assert!((r.relative_se_pct - 100.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_strategy() {
        let d = data(&["a", "a", "b", "b"], &[1, 1, 0, 0], &[0.0; 4], &[1.0, 2.0, 3.0, 4.0]);
        let s = Strategy { name: StrategyName::KeepBlocks, params: Default::default() };
        assert!(matches!(run_strategy(&d, &s, 0), Err(Error::InfeasibleStrategy(..))));
        let s = Strategy { name: StrategyName::BalanceProportions, params: Default::default() };
        assert!(run_strategy(&d, &s, 0).is_ok());
    }

    #[test]
    fn all_strategies_run_deterministically() {
        let y: Vec<f64> = (0..12).map(|i| ((i * 7) % 12) as f64).collect();
        let base: Vec<f64> = y.iter().map(|v| v + 0.5).collect();
        let blocks = ["a", "b", "c", "a", "b", "c", "a", "b", "c", "a", "b", "c"];
        let d = data(&blocks, &[1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0], &base, &y);
        let r = replay(&d, &Strategy::defaults(), 4).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r, replay(&d, &Strategy::defaults(), 4).unwrap());
        let outcome = r.iter().find(|x| x.strategy == "outcome-sorted-blocks").unwrap();
        assert!(outcome.relative_se_pct <= 100.0);
        let random = r.iter().find(|x| x.strategy == "random-blocks").unwrap();
        assert_eq!(random.allocations, Some(DEFAULT_ALLOCATIONS));
        assert!(random.p99_relative_se_pct.unwrap() >= random.relative_se_pct * 0.5);
    }

    #[test]
    fn strategy_file_parses() {
        let s: Vec<Strategy> =
            serde_json::from_str(r#"[{"name":"random-blocks","params":{"allocations":50}},{"name":"keep-blocks"}]"#)
                .unwrap();
        assert_eq!(s[0].params.allocations, Some(50));
        assert_eq!(s[1].params, StrategyParams::default());
        assert!(serde_json::from_str::<Vec<Strategy>>(r#"[{"name":"nope"}]"#).is_err());
    }
}

//! Finite populations of potential outcomes, their block summaries, and
//! superpopulation stratum moments.
//!
//! Blocks are indexed `0..K` internally. Tables read from CSV get their
//! labels canonicalized in first-appearance order; the original names are
//! kept for reporting.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

/// Relative tolerance for identity checks on derived quantities.
pub const IDENTITY_RTOL: f64 = 1e-9;

/// `true` when `a` and `b` agree to `rtol` relative to the larger magnitude.
pub fn approx_eq(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs())
}

/// One input row before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub unit_id: String,
    pub block: String,
    pub y_t: f64,
    pub y_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub unit_id: String,
    /// Dense block index in `0..K`.
    pub block: usize,
    pub y_t: f64,
    pub y_c: f64,
}

impl Unit {
    pub fn effect(&self) -> f64 {
        self.y_t - self.y_c
    }
}

/// The full schedule of potential outcomes for a finite sample, with block
/// membership.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomeTable {
    units: Vec<Unit>,
    block_sizes: Vec<usize>,
    block_names: Vec<String>,
}

/// Validate parsed rows into a canonical table.
pub fn validate_table(records: Vec<RawRecord>) -> Result<PotentialOutcomeTable> {
    PotentialOutcomeTable::from_records(records)
}

impl PotentialOutcomeTable {
    /// Blocks are relabeled `0..K` in first-appearance order; unit order is kept.
    pub fn from_records(records: Vec<RawRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut seen = HashSet::with_capacity(records.len());
        let mut label_of: HashMap<String, usize> = HashMap::new();
        let mut block_names = Vec::new();
        let mut block_sizes = Vec::new();
        let mut units = Vec::with_capacity(records.len());
        for r in records {
            if !r.y_t.is_finite() || !r.y_c.is_finite() {
                return Err(Error::NonFiniteOutcome { unit_id: r.unit_id });
            }
            if !seen.insert(r.unit_id.clone()) {
                return Err(Error::DuplicateUnitId(r.unit_id));
            }
            let next = block_names.len();
            let block = *label_of.entry(r.block.clone()).or_insert_with(|| {
                block_names.push(r.block.clone());
                block_sizes.push(0);
                next
            });
            block_sizes[block] += 1;
            units.push(Unit { unit_id: r.unit_id, block, y_t: r.y_t, y_c: r.y_c });
        }
        Ok(Self { units, block_sizes, block_names })
    }

    /// Build from dense labels and outcome columns. Unit ids are generated.
    pub fn from_parts(labels: &[usize], y_t: &[f64], y_c: &[f64]) -> Result<Self> {
        if labels.len() != y_t.len() {
            return Err(Error::LengthMismatch { left: labels.len(), right: y_t.len() });
        }
        if labels.len() != y_c.len() {
            return Err(Error::LengthMismatch { left: labels.len(), right: y_c.len() });
        }
        if labels.is_empty() {
            return Err(Error::EmptyTable);
        }
        let block_sizes = dense_sizes(labels)?;
        let mut units = Vec::with_capacity(labels.len());
        for (i, ((&b, &t), &c)) in labels.iter().zip(y_t).zip(y_c).enumerate() {
            let unit_id = format!("u{:05}", i + 1);
            if !t.is_finite() || !c.is_finite() {
                return Err(Error::NonFiniteOutcome { unit_id });
            }
            units.push(Unit { unit_id, block: b, y_t: t, y_c: c });
        }
        let block_names = (1..=block_sizes.len()).map(|k| k.to_string()).collect();
        Ok(Self { units, block_sizes, block_names })
    }

    /// Convenience constructor: one `(y_t, y_c)` pair of columns per block.
    pub fn from_blocks(blocks: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let mut labels = Vec::new();
        let mut yt = Vec::new();
        let mut yc = Vec::new();
        for (k, (t, c)) in blocks.iter().enumerate() {
            if t.len() != c.len() {
                return Err(Error::LengthMismatch { left: t.len(), right: c.len() });
            }
            labels.extend(std::iter::repeat_n(k, t.len()));
            yt.extend_from_slice(t);
            yc.extend_from_slice(c);
        }
        Self::from_parts(&labels, &yt, &yc)
    }

    /// Same units, new block structure. Labels must be dense `0..K` and are
    /// kept as given (no reordering).
    pub fn with_block_labels(&self, labels: &[usize]) -> Result<Self> {
        if labels.len() != self.units.len() {
            return Err(Error::LengthMismatch { left: labels.len(), right: self.units.len() });
        }
        let block_sizes = dense_sizes(labels)?;
        let units = self.units.iter().zip(labels).map(|(u, &b)| Unit { block: b, ..u.clone() }).collect();
        let block_names = (1..=block_sizes.len()).map(|k| k.to_string()).collect();
        Ok(Self { units, block_sizes, block_names })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn block_names(&self) -> &[String] {
        &self.block_names
    }

    /// Indices of the units in block `k`, in table order.
    pub fn block_members(&self, k: usize) -> Vec<usize> {
        self.units.iter().enumerate().filter(|(_, u)| u.block == k).map(|(i, _)| i).collect()
    }

    /// Members of every block, indexed by block.
    pub fn members_by_block(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.block_sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, u) in self.units.iter().enumerate() {
            out[u.block].push(i);
        }
        out
    }

    pub fn labels(&self) -> Vec<usize> {
        self.units.iter().map(|u| u.block).collect()
    }

    /// Sample average treatment effect.
    pub fn sate(&self) -> f64 {
        self.units.iter().map(Unit::effect).sum::<f64>() / self.n() as f64
    }

    /// Split into single-block tables, in block order.
    pub fn split_blocks(&self) -> Vec<PotentialOutcomeTable> {
        self.members_by_block()
            .into_iter()
            .map(|m| {
                let yt: Vec<f64> = m.iter().map(|&i| self.units[i].y_t).collect();
                let yc: Vec<f64> = m.iter().map(|&i| self.units[i].y_c).collect();
                Self::from_parts(&vec![0; m.len()], &yt, &yc).expect("non-empty block")
            })
            .collect()
    }
}

fn dense_sizes(labels: &[usize]) -> Result<Vec<usize>> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &b in labels {
        sizes[b] += 1;
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::BadBlockLabels);
    }
    Ok(sizes)
}

/// Which potential-outcome series a spread statistic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Treatment,
    Control,
    /// Unit-level treatment effects `y_t - y_c`.
    Effect,
}

/// Means and sample variances (divisor `count - 1`) of one group of units.
/// The `s2_*` fields are `None` for a singleton group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSummary {
    pub n: usize,
    pub mean_t: f64,
    pub mean_c: f64,
    pub tau: f64,
    pub s2_t: Option<f64>,
    pub s2_c: Option<f64>,
    pub s2_tc: Option<f64>,
}

impl BlockSummary {
    fn of<'a>(units: impl Iterator<Item = &'a Unit> + Clone) -> Self {
        let mut n = 0usize;
        let (mut st, mut sc) = (0.0, 0.0);
        for u in units.clone() {
            n += 1;
            st += u.y_t;
            sc += u.y_c;
        }
        let mean_t = st / n as f64;
        let mean_c = sc / n as f64;
        let tau = mean_t - mean_c;
        let (s2_t, s2_c, s2_tc) = if n >= 2 {
            let (mut at, mut ac, mut atc) = (0.0, 0.0, 0.0);
            for u in units {
                let dt = u.y_t - mean_t;
                let dc = u.y_c - mean_c;
                at += dt * dt;
                ac += dc * dc;
                atc += (dt - dc) * (dt - dc);
            }
            let d = (n - 1) as f64;
            (Some(at / d), Some(ac / d), Some(atc / d))
        } else {
            (None, None, None)
        };
        Self { n, mean_t, mean_c, tau, s2_t, s2_c, s2_tc }
    }

    pub fn mean(&self, c: Component) -> f64 {
        match c {
            Component::Treatment => self.mean_t,
            Component::Control => self.mean_c,
            Component::Effect => self.tau,
        }
    }

    pub fn s2(&self, c: Component) -> Option<f64> {
        match c {
            Component::Treatment => self.s2_t,
            Component::Control => self.s2_c,
            Component::Effect => self.s2_tc,
        }
    }
}

/// Per-block summaries plus the whole table treated as one block.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSummary {
    pub blocks: Vec<BlockSummary>,
    pub pooled: BlockSummary,
}

impl TableSummary {
    /// Block S² values for `c`, failing on the first singleton block.
    pub fn block_s2(&self, c: Component) -> Result<Vec<f64>> {
        self.blocks.iter().enumerate().map(|(k, b)| b.s2(c).ok_or(Error::SingletonBlock { block: k + 1 })).collect()
    }

    pub fn pooled_s2(&self, c: Component) -> Result<f64> {
        self.pooled.s2(c).ok_or(Error::TooFewUnits { needed: 2, got: self.pooled.n })
    }
}

pub fn summarize(table: &PotentialOutcomeTable) -> TableSummary {
    let blocks =
        table.members_by_block().iter().map(|m| BlockSummary::of(m.iter().map(|&i| &table.units[i]))).collect();
    let pooled = BlockSummary::of(table.units.iter());
    TableSummary { blocks, pooled }
}

/// Within- and between-block parts of a pooled S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadDecomposition {
    pub within: f64,
    pub between: f64,
}

impl SpreadDecomposition {
    pub fn total(&self) -> f64 {
        self.within + self.between
    }
}

/// `S² = Σ (n_k-1)/(n-1) S²_k + Σ n_k/(n-1) (mean_k - mean)²`.
pub fn pooled_decomposition(table: &PotentialOutcomeTable, component: Component) -> Result<SpreadDecomposition> {
    let s = summarize(table);
    let s2 = s.block_s2(component)?;
    let n = table.n() as f64;
    let grand = s.pooled.mean(component);
    let mut within = 0.0;
    let mut between = 0.0;
    for (b, s2k) in s.blocks.iter().zip(s2) {
        let nk = b.n as f64;
        within += (nk - 1.0) / (n - 1.0) * s2k;
        let d = b.mean(component) - grand;
        between += nk / (n - 1.0) * d * d;
    }
    Ok(SpreadDecomposition { within, between })
}

/// Superpopulation moments for one stratum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Stratum {
    pub weight: f64,
    pub mu_t: f64,
    pub mu_c: f64,
    pub sigma2_t: f64,
    pub sigma2_c: f64,
    pub sigma2_tc: f64,
}

impl Stratum {
    pub fn tau(&self) -> f64 {
        self.mu_t - self.mu_c
    }
}

/// Whole-superpopulation moments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PooledMoments {
    pub mu_t: f64,
    pub mu_c: f64,
    pub sigma2_t: f64,
    pub sigma2_c: f64,
    pub sigma2_tc: f64,
}

/// Per-stratum moments and weights, optionally with pooled moments.
#[derive(Debug, Clone, PartialEq)]
pub struct StrataMoments {
    strata: Vec<Stratum>,
    pooled: Option<PooledMoments>,
}

impl StrataMoments {
    pub fn new(strata: Vec<Stratum>) -> Result<Self> {
        if strata.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        let sum: f64 = strata.iter().map(|s| s.weight).sum();
        if strata.iter().any(|s| !(s.weight > 0.0) || !s.weight.is_finite()) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadWeights { sum });
        }
        for (k, s) in strata.iter().enumerate() {
            let vals = [s.mu_t, s.mu_c, s.sigma2_t, s.sigma2_c, s.sigma2_tc];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("non-finite moment in stratum {}", k + 1)));
            }
            if s.sigma2_t < 0.0 || s.sigma2_c < 0.0 || s.sigma2_tc < 0.0 {
                return Err(Error::NegativeVariance { stratum: k + 1 });
            }
        }
        Ok(Self { strata, pooled: None })
    }

    /// Strata with pooled moments derived from the mixture identities.
    pub fn with_derived_pooled(strata: Vec<Stratum>) -> Result<Self> {
        let mut m = Self::new(strata)?;
        m.pooled = Some(mixture(&m.strata));
        Ok(m)
    }

    /// Attach caller-supplied pooled moments, checked against the mixture.
    pub fn with_pooled(mut self, pooled: PooledMoments) -> Result<Self> {
        let mix = mixture(&self.strata);
        let checks = [
            (pooled.mu_t, mix.mu_t, "mu_t"),
            (pooled.mu_c, mix.mu_c, "mu_c"),
            (pooled.sigma2_t, mix.sigma2_t, "sigma2_t"),
            (pooled.sigma2_c, mix.sigma2_c, "sigma2_c"),
            (pooled.sigma2_tc, mix.sigma2_tc, "sigma2_tc"),
        ];
        for (given, derived, name) in checks {
            if !approx_eq(given, derived, IDENTITY_RTOL) {
                return Err(Error::MixtureMismatch(name));
            }
        }
        self.pooled = Some(pooled);
        Ok(self)
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn pooled(&self) -> Option<&PooledMoments> {
        self.pooled.as_ref()
    }

    pub fn require_pooled(&self) -> Result<&PooledMoments> {
        self.pooled.as_ref().ok_or(Error::MissingPooledMoments)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.weight).collect()
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }
}

/// Pooled mean `Σ w_k μ_k` and variance `Σ w_k σ²_k + Σ w_k (μ_k − μ)²`.
pub fn mixture(strata: &[Stratum]) -> PooledMoments {
    let mu_t: f64 = strata.iter().map(|s| s.weight * s.mu_t).sum();
    let mu_c: f64 = strata.iter().map(|s| s.weight * s.mu_c).sum();
    let tau = mu_t - mu_c;
    let mut out = PooledMoments { mu_t, mu_c, sigma2_t: 0.0, sigma2_c: 0.0, sigma2_tc: 0.0 };
    for s in strata {
        out.sigma2_t += s.weight * (s.sigma2_t + (s.mu_t - mu_t).powi(2));
        out.sigma2_c += s.weight * (s.sigma2_c + (s.mu_c - mu_c).powi(2));
        out.sigma2_tc += s.weight * (s.sigma2_tc + (s.tau() - tau).powi(2));
    }
    out
}

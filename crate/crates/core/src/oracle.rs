//! Exhaustive enumeration of treatment assignments.
//!
//! Every assignment a design can produce is visited exactly once, in a fixed
//! order: lexicographic combinations within each block, nested by block index
//! (block 1 outermost, the last block varying fastest). Complete
//! randomization is the single-block case over all units. Exact means and
//! variances of any statistic follow from the uniform law over that set.

use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimation::{observe, var_est_blocked, var_est_cr};
use crate::mc::CompensatedSum;
use crate::population::PotentialOutcomeTable;
use crate::randomizer::{tau_hat_blocked, tau_hat_cr, Assignment};

/// Default ceiling on the number of assignments enumerated.
pub const DEFAULT_CAP: u64 = 10_000_000;

const COUNT_LIMIT: u128 = 1 << 63;

/// `C(n, k)`, or `None` on u128 overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiply.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Exact number of assignments: `C(n, n_t)` or `Π C(n_k, n_tk)`.
/// Counts at or above 2^63 are reported as [`Error::AboveCap`].
pub fn count_assignments(table: &PotentialOutcomeTable, design: &Design) -> Result<u64> {
    design.validate(table)?;
    let too_big = || Error::AboveCap(COUNT_LIMIT, (COUNT_LIMIT - 1) as u64);
    let total = match design {
        Design::Complete { n_treated } => binomial(table.n(), *n_treated).ok_or_else(too_big)?,
        Design::Blocked { n_treated } => {
            let mut acc: u128 = 1;
            for (&nk, &ntk) in table.block_sizes().iter().zip(n_treated) {
                let c = binomial(nk, ntk).ok_or_else(too_big)?;
                acc = acc.checked_mul(c).filter(|&a| a < COUNT_LIMIT).ok_or_else(too_big)?;
            }
            acc
        }
    };
    if total >= COUNT_LIMIT {
        return Err(too_big());
    }
    Ok(total as u64)
}

/// A design together with its exact assignment count and the cap it was
/// checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationPlan {
    pub design: Design,
    pub total_assignments: u64,
    pub cap: u64,
}

impl EnumerationPlan {
    pub fn new(table: &PotentialOutcomeTable, design: &Design, cap: u64) -> Result<Self> {
        let total = count_assignments(table, design)?;
        if total > cap {
            return Err(Error::AboveCap(total as u128, cap));
        }
        Ok(Self { design: design.clone(), total_assignments: total, cap })
    }
}

/// Lexicographic `k`-subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    started: bool,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self { n, idx: (0..k).collect(), started: false, done: k > n }
    }

    /// Step to the next subset; `false` once exhausted.
    fn advance(&mut self) -> bool {
        let k = self.idx.len();
        let Some(i) = (0..k).rev().find(|&i| self.idx[i] < self.n - k + i) else {
            return false;
        };
        self.idx[i] += 1;
        for j in i + 1..k {
            self.idx[j] = self.idx[j - 1] + 1;
        }
        true
    }

    fn reset(&mut self) {
        for (j, v) in self.idx.iter_mut().enumerate() {
            *v = j;
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if self.started && !self.advance() {
            self.done = true;
            return None;
        }
        self.started = true;
        Some(self.idx.clone())
    }
}

/// Call `visit` on every assignment of `design`, returning the number visited.
pub fn for_each_assignment<F>(table: &PotentialOutcomeTable, design: &Design, cap: u64, mut visit: F) -> Result<u64>
where
    F: FnMut(&Assignment) -> Result<()>,
{
    EnumerationPlan::new(table, design, cap)?;
    let (groups, counts): (Vec<Vec<usize>>, Vec<usize>) = match design {
        Design::Complete { n_treated } => (vec![(0..table.n()).collect()], vec![*n_treated]),
        Design::Blocked { n_treated } => (table.members_by_block(), n_treated.clone()),
    };
    let mut combos: Vec<Combinations> =
        groups.iter().zip(&counts).map(|(g, &c)| Combinations::new(g.len(), c)).collect();
    let mut treated = vec![false; table.n()];
    for (g, c) in groups.iter().zip(&combos) {
        for &j in &c.idx {
            treated[g[j]] = true;
        }
    }
    let mut visited = 0u64;
    loop {
        let a = Assignment::new(treated.clone());
        visit(&a)?;
        visited += 1;
        // Odometer: advance the last block, carrying into earlier blocks.
        let mut b = combos.len();
        loop {
            if b == 0 {
                return Ok(visited);
            }
            b -= 1;
            for &j in &combos[b].idx {
                treated[groups[b][j]] = false;
            }
            let moved = combos[b].advance();
            if !moved {
                combos[b].reset();
            }
            for &j in &combos[b].idx {
                treated[groups[b][j]] = true;
            }
            if moved {
                break;
            }
        }
    }
}

/// Statistic evaluated on each enumerated assignment.
pub enum Statistic<'a> {
    /// The estimator matching the design (difference in means or blocked).
    TauHat,
    /// `s²_c/n_c + s²_t/n_t`, ignoring blocks.
    VarEstCr,
    /// `Σ (n_k/n)² (s²_ck/n_ck + s²_tk/n_tk)`.
    VarEstBlocked,
    Custom(&'a dyn Fn(&PotentialOutcomeTable, &Assignment) -> Result<f64>),
}

/// Exact mean and population variance over the uniform assignment law.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExactMoments {
    pub mean: f64,
    pub variance: f64,
    pub count: u64,
}

pub fn exact_moments(
    table: &PotentialOutcomeTable,
    design: &Design,
    statistic: &Statistic<'_>,
) -> Result<ExactMoments> {
    exact_moments_capped(table, design, statistic, DEFAULT_CAP)
}

pub fn exact_moments_capped(
    table: &PotentialOutcomeTable,
    design: &Design,
    statistic: &Statistic<'_>,
    cap: u64,
) -> Result<ExactMoments> {
    let eval = |a: &Assignment| -> Result<f64> {
        match statistic {
            Statistic::TauHat => match design {
                Design::Complete { .. } => tau_hat_cr(table, a),
                Design::Blocked { .. } => tau_hat_blocked(table, a),
            },
            Statistic::VarEstCr => var_est_cr(&observe(table, a)?),
            Statistic::VarEstBlocked => var_est_blocked(&observe(table, a)?),
            Statistic::Custom(f) => f(table, a),
        }
    };
    // Sums of deviations from the first value keep the variance well
    // conditioned when the mean is large relative to the spread.
    let mut shift = None;
    let mut s1 = CompensatedSum::default();
    let mut s2 = CompensatedSum::default();
    let count = for_each_assignment(table, design, cap, |a| {
        let x = eval(a)?;
        let x0 = *shift.get_or_insert(x);
        let d = x - x0;
        s1.add(d);
        s2.add(d * d);
        Ok(())
    })?;
    let nf = count as f64;
    let m1 = s1.value() / nf;
    let variance = (s2.value() / nf - m1 * m1).max(0.0);
    Ok(ExactMoments { mean: shift.unwrap_or(0.0) + m1, variance, count })
}

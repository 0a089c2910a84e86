//! Treatment assignment and the difference-in-means estimators.
//!
//! Sampling without replacement uses a partial Fisher-Yates shuffle over the
//! candidate indices: for `i in 0..k`, draw `j` uniformly from `i..len` and
//! swap positions `i` and `j`; the first `k` positions are treated. For a
//! blocked design the blocks are processed in index order, each block's
//! candidates in table order, all from the same generator. This order is part
//! of the reproducibility contract: a given seed always yields the same
//! assignment.

use rand::Rng;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::population::PotentialOutcomeTable;

/// A realized treatment vector, one entry per unit in table order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    treated: Vec<bool>,
}

impl Assignment {
    pub fn new(treated: Vec<bool>) -> Self {
        Self { treated }
    }

    pub fn is_treated(&self, i: usize) -> bool {
        self.treated[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.treated
    }

    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&z| z).count()
    }

    /// Treated indices in ascending order.
    pub fn treated_indices(&self) -> Vec<usize> {
        self.treated.iter().enumerate().filter(|(_, &z)| z).map(|(i, _)| i).collect()
    }

    /// Check the assignment has exactly the design's treated counts.
    pub fn check(&self, table: &PotentialOutcomeTable, design: &Design) -> Result<()> {
        if self.len() != table.n() {
            return Err(Error::AssignmentMismatch(format!("{} entries for {} units", self.len(), table.n())));
        }
        match design {
            Design::Complete { n_treated } => {
                if self.n_treated() != *n_treated {
                    return Err(Error::AssignmentMismatch(format!(
                        "{} treated, design has {}",
                        self.n_treated(),
                        n_treated
                    )));
                }
            }
            Design::Blocked { n_treated } => {
                let got = self.treated_per_block(table);
                if got.len() != n_treated.len() {
                    return Err(Error::DesignShape { expected: got.len(), got: n_treated.len() });
                }
                if let Some(k) = got.iter().zip(n_treated).position(|(a, b)| a != b) {
                    return Err(Error::AssignmentMismatch(format!(
                        "block {} has {} treated, design has {}",
                        k + 1,
                        got[k],
                        n_treated[k]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn treated_per_block(&self, table: &PotentialOutcomeTable) -> Vec<usize> {
        let mut out = vec![0; table.n_blocks()];
        for (u, &z) in table.units().iter().zip(&self.treated) {
            if z {
                out[u.block] += 1;
            }
        }
        out
    }
}

/// Move a uniformly chosen `k`-subset of `items` to the front.
fn partial_shuffle<R: Rng + ?Sized>(items: &mut [usize], k: usize, rng: &mut R) {
    let len = items.len();
    for i in 0..k {
        let j = rng.random_range(i..len);
        items.swap(i, j);
    }
}

/// Complete randomization: `n_t` of `n` units treated, uniform over subsets.
pub fn assign_cr<R: Rng + ?Sized>(n: usize, n_t: usize, rng: &mut R) -> Result<Assignment> {
    if n_t == 0 || n_t >= n {
        return Err(Error::TreatedOutOfRange { n_t, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    partial_shuffle(&mut idx, n_t, rng);
    let mut treated = vec![false; n];
    for &i in &idx[..n_t] {
        treated[i] = true;
    }
    Ok(Assignment { treated })
}

/// Independent complete randomizations within each block.
pub fn assign_blocked<R: Rng + ?Sized>(
    table: &PotentialOutcomeTable,
    n_treated: &[usize],
    rng: &mut R,
) -> Result<Assignment> {
    Design::blocked(n_treated.to_vec()).validate(table)?;
    let mut treated = vec![false; table.n()];
    for (mut members, &ntk) in table.members_by_block().into_iter().zip(n_treated) {
        partial_shuffle(&mut members, ntk, rng);
        for &i in &members[..ntk] {
            treated[i] = true;
        }
    }
    Ok(Assignment { treated })
}

/// Draw an assignment from either design.
pub fn assign<R: Rng + ?Sized>(table: &PotentialOutcomeTable, design: &Design, rng: &mut R) -> Result<Assignment> {
    match design {
        Design::Complete { n_treated } => assign_cr(table.n(), *n_treated, rng),
        Design::Blocked { n_treated } => assign_blocked(table, n_treated, rng),
    }
}

/// Difference in observed arm means over all units (ignores blocks).
pub fn tau_hat_cr(table: &PotentialOutcomeTable, assignment: &Assignment) -> Result<f64> {
    let (mut st, mut nt, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
    for (u, &z) in table.units().iter().zip(assignment.as_slice()) {
        if z {
            st += u.y_t;
            nt += 1;
        } else {
            sc += u.y_c;
            nc += 1;
        }
    }
    if nt == 0 {
        return Err(Error::ArmTooSmall { arm: "treatment", got: 0, needed: 1 });
    }
    if nc == 0 {
        return Err(Error::ArmTooSmall { arm: "control", got: 0, needed: 1 });
    }
    Ok(st / nt as f64 - sc / nc as f64)
}

/// `Σ_k (n_k/n) τ̂_k` with block-wise differences in means.
pub fn tau_hat_blocked(table: &PotentialOutcomeTable, assignment: &Assignment) -> Result<f64> {
    let k = table.n_blocks();
    let mut st = vec![0.0; k];
    let mut sc = vec![0.0; k];
    let mut nt = vec![0usize; k];
    let mut nc = vec![0usize; k];
    for (u, &z) in table.units().iter().zip(assignment.as_slice()) {
        if z {
            st[u.block] += u.y_t;
            nt[u.block] += 1;
        } else {
            sc[u.block] += u.y_c;
            nc[u.block] += 1;
        }
    }
    let n = table.n() as f64;
    let mut est = 0.0;
    for b in 0..k {
        if nt[b] == 0 {
            return Err(Error::EmptyArmInBlock { block: b + 1, arm: "treatment" });
        }
        if nc[b] == 0 {
            return Err(Error::EmptyArmInBlock { block: b + 1, arm: "control" });
        }
        let nk = (nt[b] + nc[b]) as f64;
        est += nk / n * (st[b] / nt[b] as f64 - sc[b] / nc[b] as f64);
    }
    Ok(est)
}

/// The estimator matching `design`, after checking the assignment against it.
pub fn tau_hat(table: &PotentialOutcomeTable, assignment: &Assignment, design: &Design) -> Result<f64> {
    assignment.check(table, design)?;
    match design {
        Design::Complete { .. } => tau_hat_cr(table, assignment),
        Design::Blocked { .. } => tau_hat_blocked(table, assignment),
    }
}

/// The blocked estimator written as a reweighted difference of arm totals:
/// `Σ_k [(1/n_t)(p/p_k) Σ_treated y_t − (1/n_c)((1−p)/(1−p_k)) Σ_control y_c]`
/// with `p = n_t/n` and `p_k` the realized block proportions.
pub fn tau_hat_reweighted(table: &PotentialOutcomeTable, assignment: &Assignment) -> Result<f64> {
    let k = table.n_blocks();
    let mut st = vec![0.0; k];
    let mut sc = vec![0.0; k];
    let mut ntk = vec![0usize; k];
    for (u, &z) in table.units().iter().zip(assignment.as_slice()) {
        if z {
            st[u.block] += u.y_t;
            ntk[u.block] += 1;
        } else {
            sc[u.block] += u.y_c;
        }
    }
    let n = table.n() as f64;
    let n_t: usize = ntk.iter().sum();
    let n_t = n_t as f64;
    let n_c = n - n_t;
    let p = n_t / n;
    let mut est = 0.0;
    for (b, &nk) in table.block_sizes().iter().enumerate() {
        let pk = ntk[b] as f64 / nk as f64;
        if ntk[b] == 0 {
            return Err(Error::EmptyArmInBlock { block: b + 1, arm: "treatment" });
        }
        if ntk[b] == nk {
            return Err(Error::EmptyArmInBlock { block: b + 1, arm: "control" });
        }
        est += (p / pk) * st[b] / n_t - ((1.0 - p) / (1.0 - pk)) * sc[b] / n_c;
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_pairs() -> PotentialOutcomeTable {
        PotentialOutcomeTable::from_blocks(&[(vec![0.0, 2.0], vec![0.0, 2.0]), (vec![0.0, 2.0], vec![0.0, 2.0])])
            .unwrap()
    }

    #[test]
    fn cr_marginals_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reps = 100_000;
        let mut first = 0usize;
        for _ in 0..reps {
            if assign_cr(2, 1, &mut rng).unwrap().is_treated(0) {
                first += 1;
            }
        }
        let f = first as f64 / reps as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn cr_rejects_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(assign_cr(3, 3, &mut rng), Err(Error::TreatedOutOfRange { n_t: 3, n: 3 }));
        assert_eq!(assign_cr(3, 0, &mut rng), Err(Error::TreatedOutOfRange { n_t: 0, n: 3 }));
    }

    #[test]
    fn seeded_assignments_repeat() {
        let t = two_pairs();
        let a = assign_cr(10, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = assign_cr(10, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let a = assign_blocked(&t, &[1, 1], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = assign_blocked(&t, &[1, 1], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blocked_product_law() {
        let t = two_pairs();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps = 100_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..reps {
            let a = assign_blocked(&t, &[1, 1], &mut rng).unwrap();
            *counts.entry(a.treated_indices()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            let f = *c as f64 / reps as f64;
            assert!((f - 0.25).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn blocked_rejects_full_block() {
        let t = two_pairs();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            assign_blocked(&t, &[2, 1], &mut rng),
            Err(Error::BlockTreatedOutOfRange { block: 1, n_t: 2, n: 2 })
        );
    }

    #[test]
    fn hand_evaluated_estimates() {
        let t = PotentialOutcomeTable::from_blocks(&[(vec![1.0, 3.0], vec![0.0, 0.0])]).unwrap();
        let a = Assignment::new(vec![true, false]);
        assert_eq!(tau_hat(&t, &a, &Design::complete(1)).unwrap(), 1.0);

        let t = two_pairs();
        let a = Assignment::new(vec![true, false, true, false]);
        assert_eq!(tau_hat(&t, &a, &Design::blocked(vec![1, 1])).unwrap(), -2.0);
        assert_eq!(tau_hat_reweighted(&t, &a).unwrap(), -2.0);

        let c =
            PotentialOutcomeTable::from_blocks(&[(vec![4.0; 3], vec![4.0; 3]), (vec![4.0; 2], vec![4.0; 2])]).unwrap();
        let a = Assignment::new(vec![true, false, false, false, true]);
        assert_eq!(tau_hat(&c, &a, &Design::blocked(vec![1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn estimator_errors() {
        let t = two_pairs();
        let a = Assignment::new(vec![true, true, false, false]);
        assert_eq!(tau_hat_blocked(&t, &a), Err(Error::EmptyArmInBlock { block: 1, arm: "control" }));
        assert!(matches!(tau_hat(&t, &a, &Design::blocked(vec![1, 1])), Err(Error::AssignmentMismatch(_))));
    }
}

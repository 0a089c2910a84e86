use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::PotentialOutcomeTable;

/// A randomization design: complete randomization of `n_treated` units, or
/// independent complete randomizations with `n_treated[k]` treated in block k.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    Complete { n_treated: usize },
    Blocked { n_treated: Vec<usize> },
}

impl Design {
    pub fn complete(n_treated: usize) -> Self {
        Design::Complete { n_treated }
    }

    pub fn blocked(n_treated: Vec<usize>) -> Self {
        Design::Blocked { n_treated }
    }

    /// Check `0 < n_t < n` (complete) or `0 < n_tk < n_k` for every block.
    pub fn validate(&self, table: &PotentialOutcomeTable) -> Result<()> {
        match self {
            Design::Complete { n_treated } => {
                let n = table.n();
                if *n_treated == 0 || *n_treated >= n {
                    return Err(Error::TreatedOutOfRange { n_t: *n_treated, n });
                }
            }
            Design::Blocked { n_treated } => {
                let sizes = table.block_sizes();
                if n_treated.len() != sizes.len() {
                    return Err(Error::DesignShape { expected: sizes.len(), got: n_treated.len() });
                }
                for (k, (&nt, &nk)) in n_treated.iter().zip(sizes).enumerate() {
                    if nt == 0 || nt >= nk {
                        return Err(Error::BlockTreatedOutOfRange { block: k + 1, n_t: nt, n: nk });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_treated(&self) -> usize {
        match self {
            Design::Complete { n_treated } => *n_treated,
            Design::Blocked { n_treated } => n_treated.iter().sum(),
        }
    }

    pub fn is_blocked(&self) -> bool {
        matches!(self, Design::Blocked { .. })
    }

    /// Blocked design with `n_tk / n_k` identical across blocks (always true
    /// for complete randomization).
    pub fn has_equal_proportions(&self, table: &PotentialOutcomeTable) -> bool {
        match self {
            Design::Complete { .. } => true,
            Design::Blocked { n_treated } => {
                let n = table.n();
                let nt: usize = n_treated.iter().sum();
                n_treated.iter().zip(table.block_sizes()).all(|(&ntk, &nk)| ntk * n == nt * nk)
            }
        }
    }
}

/// Treated count `p * n` when it is an integer (to 1e-9), else an error.
pub fn treated_count(p: f64, n: usize) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::BadProportion(p));
    }
    let x = p * n as f64;
    let r = x.round();
    if (x - r).abs() > 1e-9 {
        return Err(Error::NonIntegerCount { p, n: n as f64 });
    }
    Ok(r as usize)
}

/// Per-block treated counts `p * n_k`, rejecting any non-integer count.
pub fn equal_proportion_counts(sizes: &[usize], p: f64) -> Result<Vec<usize>> {
    sizes.iter().map(|&nk| treated_count(p, nk)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(sizes: &[usize]) -> PotentialOutcomeTable {
        let blocks: Vec<_> = sizes.iter().map(|&s| (vec![0.0; s], vec![0.0; s])).collect();
        PotentialOutcomeTable::from_blocks(&blocks).unwrap()
    }

    #[test]
    fn validation() {
        let t = table(&[2, 3]);
        assert!(Design::complete(2).validate(&t).is_ok());
        assert_eq!(Design::complete(5).validate(&t), Err(Error::TreatedOutOfRange { n_t: 5, n: 5 }));
        assert_eq!(Design::complete(0).validate(&t), Err(Error::TreatedOutOfRange { n_t: 0, n: 5 }));
        assert!(Design::blocked(vec![1, 2]).validate(&t).is_ok());
        assert_eq!(
            Design::blocked(vec![2, 1]).validate(&t),
            Err(Error::BlockTreatedOutOfRange { block: 1, n_t: 2, n: 2 })
        );
        assert_eq!(Design::blocked(vec![1]).validate(&t), Err(Error::DesignShape { expected: 2, got: 1 }));
    }

    #[test]
    fn equal_proportions() {
        let t = table(&[2, 4]);
        assert!(Design::blocked(vec![1, 2]).has_equal_proportions(&t));
        assert!(!Design::blocked(vec![1, 1]).has_equal_proportions(&t));
        assert_eq!(equal_proportion_counts(&[2, 4], 0.5).unwrap(), vec![1, 2]);
        assert!(matches!(equal_proportion_counts(&[3, 4], 0.5), Err(Error::NonIntegerCount { .. })));
        assert_eq!(treated_count(1.0, 4), Err(Error::BadProportion(1.0)));
    }
}

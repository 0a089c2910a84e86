use thiserror::Error;

/// Errors produced by the library. Block indices in messages are 1-based.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty table")]
    EmptyTable,
    #[error("non-finite outcome for unit {unit_id}")]
    NonFiniteOutcome { unit_id: String },
    #[error("duplicate unit_id {0}")]
    DuplicateUnitId(String),
    #[error("non-finite covariate for unit {unit_id}")]
    NonFiniteCovariate { unit_id: String },
    #[error("block labels must be dense 0..K-1 with every block non-empty")]
    BadBlockLabels,
    #[error("block {block} has a single unit; S² is undefined")]
    SingletonBlock { block: usize },
    #[error("need at least {needed} units, got {got}")]
    TooFewUnits { needed: usize, got: usize },
    #[error("treated count {n_t} out of range for {n} units")]
    TreatedOutOfRange { n_t: usize, n: usize },
    #[error("block {block}: treated count {n_t} out of range for {n} units")]
    BlockTreatedOutOfRange { block: usize, n_t: usize, n: usize },
    #[error("design has {got} block counts but table has {expected} blocks")]
    DesignShape { expected: usize, got: usize },
    #[error("assignment is inconsistent with the design: {0}")]
    AssignmentMismatch(String),
    #[error("block {block} has no {arm} units")]
    EmptyArmInBlock { block: usize, arm: &'static str },
    #[error("{arm} arm has {got} units, need at least {needed}")]
    ArmTooSmall { arm: &'static str, got: usize, needed: usize },
    #[error(
        "block {block} has fewer than two {arm} units; the blocked variance estimator needs two per arm per block"
    )]
    SingletonArm { block: usize, arm: &'static str },
    #[error("treated proportions differ across blocks; equal proportions are required")]
    UnequalProportions,
    #[error("proportion {p} does not give an integer treated count for {n} units")]
    NonIntegerCount { p: f64, n: f64 },
    #[error("invalid proportion {0}")]
    BadProportion(f64),
    #[error("weights must be positive and sum to 1 (sum = {sum})")]
    BadWeights { sum: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("negative variance in stratum {stratum}")]
    NegativeVariance { stratum: usize },
    #[error("pooled moments violate the mixture identity: {0}")]
    MixtureMismatch(&'static str),
    #[error("pooled moments are required")]
    MissingPooledMoments,
    #[error("population is empty")]
    EmptyPopulation,
    #[error("assignment count {0} is above the enumeration cap {1}")]
    AboveCap(u128, u64),
    #[error("invalid block size {0}")]
    BadBlockSize(usize),
    #[error("invalid block count {0}")]
    BadBlockCount(usize),
    #[error("covariate must be integer valued for parity blocking")]
    NonIntegerCovariate,
    #[error("parity counts differ: {odd} odd vs {even} even")]
    ParityMismatch { odd: usize, even: usize },
    #[error("sizes sum to {sum} but n = {n}")]
    SizeMismatch { sum: usize, n: usize },
    #[error("zero total sum of squares")]
    ZeroTotalVariation,
    #[error("invalid scenario: {0}")]
    BadScenario(String),
    #[error("n = {0} is not a multiple of 16")]
    NotMultipleOf16(usize),
    #[error("strategy {0} is infeasible: {1}")]
    InfeasibleStrategy(String, String),
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

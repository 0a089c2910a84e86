//! Exact and simulated variances of blocked and completely randomized
//! experiments.

pub mod blocking;
pub mod cli;
pub mod design;
pub mod error;
pub mod estimation;
pub mod io;
pub mod mc;
pub mod oracle;
pub mod population;
pub mod randomizer;
pub mod replay;
pub mod scenario;
pub mod studies;
pub mod variance;

pub use design::Design;
pub use error::{Error, Result};
pub use population::{PotentialOutcomeTable, StrataMoments, Stratum};
pub use randomizer::Assignment;
pub use variance::VarianceReport;

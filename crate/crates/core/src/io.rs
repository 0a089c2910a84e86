//! CSV readers and writers for tables, strata, covariates and reports.
//!
//! Lines starting with `#` are comments on input. Reports can carry a
//! `# blockcalc <version> seed=<seed>` header line.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blocking::{CovariateSample, CovariateUnit};
use crate::error::{Error, Result};
use crate::population::{validate_table, PotentialOutcomeTable, RawRecord, StrataMoments, Stratum};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn input_err(e: impl std::fmt::Display) -> Error {
    Error::Input(e.to_string())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn rows<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    reader(r).deserialize().map(|row| row.map_err(input_err)).collect()
}

#[derive(Debug, Deserialize, Serialize)]
struct TableRow {
    unit_id: String,
    block: String,
    y_t: f64,
    y_c: f64,
}

/// Read a `unit_id,block,y_t,y_c` table.
pub fn read_table<R: Read>(r: R) -> Result<PotentialOutcomeTable> {
    let records = rows::<TableRow, _>(r)?
        .into_iter()
        .map(|t| RawRecord { unit_id: t.unit_id, block: t.block, y_t: t.y_t, y_c: t.y_c })
        .collect();
    validate_table(records)
}

pub fn read_table_file(path: &Path) -> Result<PotentialOutcomeTable> {
    read_table(open(path)?)
}

pub fn write_table<W: Write>(table: &PotentialOutcomeTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for u in table.units() {
        out.serialize(TableRow {
            unit_id: u.unit_id.clone(),
            block: table.block_names()[u.block].clone(),
            y_t: u.y_t,
            y_c: u.y_c,
        })
        .map_err(input_err)?;
    }
    out.flush().map_err(input_err)
}

#[derive(Debug, Deserialize)]
struct StratumRow {
    #[allow(dead_code)]
    stratum: String,
    weight: f64,
    mu_t: f64,
    mu_c: f64,
    sigma2_t: f64,
    sigma2_c: f64,
    sigma2_tc: f64,
}

/// Read a `stratum,weight,mu_t,mu_c,sigma2_t,sigma2_c,sigma2_tc` file. Pooled
/// moments are derived from the strata.
pub fn read_strata<R: Read>(r: R) -> Result<StrataMoments> {
    let strata = rows::<StratumRow, _>(r)?
        .into_iter()
        .map(|s| Stratum {
            weight: s.weight,
            mu_t: s.mu_t,
            mu_c: s.mu_c,
            sigma2_t: s.sigma2_t,
            sigma2_c: s.sigma2_c,
            sigma2_tc: s.sigma2_tc,
        })
        .collect();
    StrataMoments::with_derived_pooled(strata)
}

pub fn read_strata_file(path: &Path) -> Result<StrataMoments> {
    read_strata(open(path)?)
}

#[derive(Debug, Deserialize)]
struct CovariateRow {
    unit_id: String,
    x: f64,
}

/// Read a `unit_id,x` file.
pub fn read_covariates<R: Read>(r: R) -> Result<CovariateSample> {
    let units = rows::<CovariateRow, _>(r)?.into_iter().map(|c| CovariateUnit { unit_id: c.unit_id, x: c.x }).collect();
    CovariateSample::new(units)
}

#[derive(Debug, Deserialize)]
struct CountRow {
    block: String,
    n_treated: usize,
}

/// Per-block treated counts from a `block,n_treated` file, ordered to match
/// the table's blocks.
pub fn read_block_counts<R: Read>(r: R, table: &PotentialOutcomeTable) -> Result<Vec<usize>> {
    let names = table.block_names();
    let mut counts: Vec<Option<usize>> = vec![None; names.len()];
    for row in rows::<CountRow, _>(r)? {
        let k = names
            .iter()
            .position(|b| *b == row.block)
            .ok_or_else(|| Error::Input(format!("block {:?} is not in the table", row.block)))?;
        if counts[k].replace(row.n_treated).is_some() {
            return Err(Error::Input(format!("block {:?} listed twice", row.block)));
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| c.ok_or_else(|| Error::Input(format!("no treated count for block {:?}", names[k]))))
        .collect()
}

/// One row of a replay input: realized assignment, a baseline covariate and
/// the observed outcome.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReplayRow {
    pub unit_id: String,
    pub block: String,
    pub treated: String,
    pub baseline: f64,
    pub y: f64,
}

pub fn read_replay_rows<R: Read>(r: R) -> Result<Vec<ReplayRow>> {
    rows(r)
}

/// The report header comment line.
pub fn header_comment(seed: u64) -> String {
    format!("# blockcalc {VERSION} seed={seed}")
}

/// Serialize `rows` as CSV, preceded by `comment` when given.
pub fn write_rows<T: Serialize, W: Write>(mut w: W, rows: &[T], comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(w, "{c}").map_err(input_err)?;
    }
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(input_err)?;
    }
    out.flush().map_err(input_err)
}

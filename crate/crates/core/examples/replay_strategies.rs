//! Replay alternative blocking strategies on a realized experiment and report
//! each one's standard error relative to complete randomization.
//!
//! Run with `cargo run --release --example replay_strategies [DATA.csv]`;
//! defaults to `examples/data/replay.csv`.

use std::fs::File;

use blockcalc::io::read_replay_rows;
use blockcalc::replay::{replay, ReplayData, Strategy};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/replay.csv").to_string());
    let data = ReplayData::from_rows(read_replay_rows(File::open(&path)?)?)?;
    println!("{} units in {} blocks, {} treated", data.table.n(), data.table.n_blocks(), data.n_treated());
    for r in replay(&data, &Strategy::defaults(), 2024)? {
        let p99 = r.p99_relative_se_pct.map_or(String::new(), |p| format!("  (p99 {p:.1})"));
        println!("{:<24} {:>6.1}%{p99}", r.strategy, r.relative_se_pct);
    }
    Ok(())
}

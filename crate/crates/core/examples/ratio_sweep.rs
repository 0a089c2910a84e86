//! Blocked-to-CR variance ratio as blocks become more predictive of outcomes,
//! for equal and unequal treated proportions.
//!
//! Run with `cargo run --release --example ratio_sweep`.

use blockcalc::studies::{ratio_sweep, RatioSweepConfig};

fn main() -> anyhow::Result<()> {
    let rows = ratio_sweep(&RatioSweepConfig::default())?;
    println!("{:>5} {:>4} {:>7} {:>9} {:>11}", "scale", "rho", "r2", "equal_p", "unequal_p");
    for r in &rows {
        println!("{:>5.2} {:>4.1} {:>7.4} {:>9.4} {:>11.4}", r.scale, r.rho, r.r2, r.ratio_equal_p, r.ratio_unequal_p);
    }
    let worst = rows.iter().map(|r| r.ratio_unequal_p).fold(f64::MIN, f64::max);
    let best = rows.iter().map(|r| r.ratio_equal_p).fold(f64::MAX, f64::min);
    println!("\nworst unequal-p ratio {worst:.3}, best equal-p ratio {best:.3}");
    Ok(())
}

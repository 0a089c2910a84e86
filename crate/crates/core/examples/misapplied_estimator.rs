//! What goes wrong when a blocked experiment is analyzed as if it were
//! completely randomized, and how variable each variance estimator is.
//!
//! Run with `cargo run --release --example misapplied_estimator`.

use blockcalc::estimation::cr_varest_bias_under_blocking;
use blockcalc::studies::{misconceptions, MisconceptionsConfig};
use blockcalc::PotentialOutcomeTable;

fn main() -> anyhow::Result<()> {
    // Two identical blocks, each with outcomes {0, 2}, and no treatment effect.
    let table =
        PotentialOutcomeTable::from_blocks(&[(vec![0.0, 2.0], vec![0.0, 2.0]), (vec![0.0, 2.0], vec![0.0, 2.0])])?;
    let b = cr_varest_bias_under_blocking(&table, 0.5)?;
    println!(
        "E[CR estimator] = {}, true blocked variance = {}, bias = {}\n",
        b.expected_varest_cr, b.true_var_bk, b.bias
    );

    let rows = misconceptions(&MisconceptionsConfig::default())?;
    println!("{:>5} {:>4} {:>7} {:>9} {:>9} {:>12}", "scale", "rho", "r2", "E[cr]/bk", "E[bk]/bk", "var cr/bk");
    for r in &rows {
        println!(
            "{:>5.2} {:>4.1} {:>7.4} {:>9.4} {:>9.4} {:>12.4}",
            r.scale, r.rho, r.r2, r.cr_estimator_ratio, r.bk_estimator_ratio, r.variability_ratio
        );
    }
    Ok(())
}

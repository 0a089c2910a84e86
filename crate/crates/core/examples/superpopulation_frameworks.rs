//! Blocking versus complete randomization when units are sampled from a
//! superpopulation: stratified sampling with common or unequal treated
//! proportions, mixed comparisons, and draws of strata or whole sites.
//!
//! Run with `cargo run --release --example superpopulation_frameworks`.

use blockcalc::population::{StrataMoments, Stratum};
use blockcalc::variance::{
    var_diff_mixed, var_diff_site_sampling, var_diff_strat, var_diff_strat_unequal, var_diff_two_stage, MixedMode,
    SizeRule,
};
use blockcalc::PotentialOutcomeTable;

fn stratum(weight: f64, mu_c: f64, tau: f64) -> Stratum {
    Stratum { weight, mu_t: mu_c + tau, mu_c, sigma2_t: 1.0, sigma2_c: 1.0, sigma2_tc: 0.5 }
}

fn main() -> anyhow::Result<()> {
    let strata = StrataMoments::with_derived_pooled(vec![stratum(0.5, 0.0, 1.0), stratum(0.5, 2.0, 2.0)])?;

    let r = var_diff_strat(&strata, 8, 0.5)?;
    println!("stratified, p = 1/2:       var_cr {:.4}  var_bk {:.4}  diff {:.4}", r.var_cr, r.var_bk, r.diff);

    // Treating 1 of 4 in one stratum and 3 of 4 in the other gives up the gain.
    let r = var_diff_strat_unequal(&strata, 8, &[0.25, 0.75], 0.5)?;
    println!("stratified, p_k = 1/4,3/4: var_cr {:.4}  var_bk {:.4}  diff {:.4}", r.var_cr, r.var_bk, r.diff);

    for (name, mode) in
        [("CR/SRS vs blocked/strat", MixedMode::CrSrsVsBkStrat), ("CR/SRS vs CR/strat", MixedMode::CrSrsVsCrStrat)]
    {
        let r = var_diff_mixed(&strata, 4, 4, mode)?;
        println!("{name:<26} diff {:.4}", r.diff);
    }

    let r = var_diff_two_stage(&strata, 4, &SizeRule::Constant(4), 0.5, 20_000, 11)?;
    println!("\ntwo-stage, 4 strata of 4:  diff {:.4} +/- {:.4}", r.diff, r.std_error.unwrap_or(0.0));

    // Sites are whole finite blocks; each experiment draws three of them.
    let sites = PotentialOutcomeTable::from_blocks(&[
        (vec![1.0, 2.0, 3.0, 2.0], vec![0.0, 1.0, 1.0, 2.0]),
        (vec![5.0, 6.0, 5.0, 7.0], vec![3.0, 4.0, 4.0, 5.0]),
        (vec![2.0, 9.0, 4.0, 5.0], vec![1.0, 8.0, 2.0, 5.0]),
    ])?
    .split_blocks();
    let r = var_diff_site_sampling(&sites, 3, 0.5, 20_000, 12)?;
    println!("site sampling, 3 of 3:     diff {:.4} +/- {:.4}", r.diff, r.std_error.unwrap_or(0.0));
    Ok(())
}

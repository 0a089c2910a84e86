//! Walk every assignment of a small design and compare exact moments with
//! closed forms: the variance of the effect estimate and the expectation of
//! the CR variance estimator when the experiment was actually blocked.
//!
//! Run with `cargo run --example enumerate_assignments`.

use blockcalc::estimation::{cr_varest_bias_under_blocking, observe, var_est_cr};
use blockcalc::oracle::{count_assignments, exact_moments, for_each_assignment, Statistic, DEFAULT_CAP};
use blockcalc::variance::neyman_var_blocked;
use blockcalc::{Design, PotentialOutcomeTable};

fn main() -> anyhow::Result<()> {
    // Block 1 has a large effect, block 2 none.
    let table = PotentialOutcomeTable::from_blocks(&[
        (vec![4.0, 6.0, 5.0], vec![0.0, 1.0, 2.0]),
        (vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]),
    ])?;
    let design = Design::blocked(vec![1, 1]);
    println!("{} assignments", count_assignments(&table, &design)?);

    let mut shown = 0;
    for_each_assignment(&table, &design, DEFAULT_CAP, |a| {
        if shown < 3 {
            println!("  treated {:?}: v_cr = {:.4}", a.treated_indices(), var_est_cr(&observe(&table, a)?)?);
            shown += 1;
        }
        Ok(())
    })?;

    let tau = exact_moments(&table, &design, &Statistic::TauHat)?;
    println!("\nVar(tau_hat): enumerated {:.6}, closed form {:.6}", tau.variance, neyman_var_blocked(&table, &design)?);

    let v = exact_moments(&table, &design, &Statistic::VarEstCr)?;
    let bias = cr_varest_bias_under_blocking(&table, 1.0 / 3.0)?;
    println!("E[v_cr]:      enumerated {:.6}, closed form {:.6}", v.mean, bias.expected_varest_cr);
    println!("bias of v_cr under blocking: {:.6}", bias.bias);
    Ok(())
}

//! Remainder order of the non-commutative Taylor formula for
//! e^{tB} = sum_m (-t)^m/m! e^{tA} C_m(A, B), on random symmetric matrices.

use heatinv::oracles::{discretized_pair, nc_taylor_matrix_check, vm_identity_deviation};
use heatinv::potential::PotentialExpr;

fn main() -> heatinv::Result<()> {
    for order in 0..=3 {
        for seed in 1..=3 {
            let r = nc_taylor_matrix_check(6, order, seed)?;
            println!("N = {order} seed {seed}: slope {:.3}", r.slope.unwrap_or(f64::NAN));
        }
    }
    let v = PotentialExpr::parse("exp(-x1^2)", 1)?;
    let (h0, h) = discretized_pair(&v, 6, 2.0)?;
    println!("max relative |C_m(-H0,-H) - V_m|, m <= 6: {:.2e}", vm_identity_deviation(&h0, &h, 6));
    Ok(())
}

//! Monte Carlo heat kernel diagonal from Brownian bridges, against the
//! small-t expansion with 1 to 4 invariants.

use heatinv::invariants::heat_invariant_thm31;
use heatinv::numeric::evaluate_density;
use heatinv::oracles::{fk_diagonal, BridgeSampler};
use heatinv::potential::PotentialExpr;

fn main() -> heatinv::Result<()> {
    let v = PotentialExpr::parse("exp(-x1^2)", 1)?;
    let x = [0.0];
    let a: Vec<f64> = (1..=4)
        .map(|j| evaluate_density(&heat_invariant_thm31(j, 1)?.density, &v, &x))
        .collect::<heatinv::Result<_>>()?;
    println!("a_j(0) = {a:?}");

    let sampler = BridgeSampler::new(1, 1);
    for t in [0.02, 0.05, 0.1] {
        let mc = fk_diagonal(&v, &x, t, &sampler)?;
        let scale = (4.0 * std::f64::consts::PI * t).powf(-0.5);
        print!("t = {t:<5} mc = {:.8} +- {:.1e}", mc.estimate, mc.std_error);
        let mut series = 1.0;
        for (j, aj) in a.iter().enumerate() {
            series += aj * t.powi(j as i32 + 1);
            let z = (mc.estimate - scale * series) / mc.std_error;
            print!("  z{} = {z:+.2}", j + 1);
        }
        println!();
    }
    Ok(())
}

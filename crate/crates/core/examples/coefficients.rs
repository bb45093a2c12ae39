//! Integrated invariants and scattering coefficients for concrete
//! potentials, plus the regularized trace for a long-range one.

use heatinv::invariants::Epsilon;
use heatinv::numeric::{decay_warnings, heat_coefficients, regularized_coefficients, QuadratureConfig};
use heatinv::potential::PotentialExpr;

fn main() -> heatinv::Result<()> {
    let gauss = PotentialExpr::parse("exp(-x1^2)", 1)?;
    let cfg = QuadratureConfig {
        infinite: true,
        ..QuadratureConfig::default()
    };
    print!("{}", heat_coefficients(&gauss, 3, &cfg)?.to_text());
    println!("exact a_1 = {:.15e}\n", -std::f64::consts::PI.sqrt());

    // b_j is absent in even dimension once j >= n/2
    let gauss2 = PotentialExpr::parse("exp(-x1^2 - x2^2)", 2)?;
    let cfg2 = QuadratureConfig {
        half_width: 8.0,
        ..QuadratureConfig::default()
    };
    println!("{}", heat_coefficients(&gauss2, 2, &cfg2)?.to_text());

    let eps: Epsilon = "1/3".parse()?;
    let long = PotentialExpr::parse("powr(1 + x1^2, -1, 6)", 1)?;
    for w in decay_warnings(&long, &eps, 2) {
        println!("warning: {w}");
    }
    print!("{}", regularized_coefficients(&long, &eps, 4, &cfg)?.to_text());
    Ok(())
}

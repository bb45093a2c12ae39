//! Relative heat trace of a 1-D finite-difference Schrodinger operator,
//! fitted to recover the integrated invariants.

use heatinv::invariants::heat_invariant_thm31;
use heatinv::numeric::{integrate_density, QuadratureConfig};
use heatinv::oracles::{fd_spectra, fit_expansion, trace_from_spectra, TraceGrid};
use heatinv::potential::PotentialExpr;

fn main() -> heatinv::Result<()> {
    let v = PotentialExpr::parse("exp(-x1^2)", 1)?;
    let grid = TraceGrid::default();
    let (lambda, mu) = fd_spectra(&v, &grid)?;
    let samples: Vec<(f64, f64)> = (0..20)
        .map(|i| {
            let t = 0.02 * 10f64.powf(i as f64 / 19.0);
            (t, trace_from_spectra(&lambda, &mu, t))
        })
        .collect();
    for order in 2..=4 {
        let fit = fit_expansion(&samples, 1, order)?;
        println!("J = {order}: c = {:?}, condition {:.1}", fit.coefficients, fit.condition);
    }
    for j in 1..=2 {
        let d = heat_invariant_thm31(j, 1)?.density;
        let exact = integrate_density(&d, &v, &QuadratureConfig::default())?;
        println!("integral of a_{j} = {:.8}", exact.value);
    }
    Ok(())
}

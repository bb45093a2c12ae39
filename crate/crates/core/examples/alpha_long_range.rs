//! Regularized densities alpha_j for a long-range potential V ~ |x|^(-eps).
//! The first few vanish, the middle ones are corrected and the rest equal a_j.

use heatinv::invariants::{alpha_density, decay_weight, Epsilon, Regime};

fn main() -> heatinv::Result<()> {
    let n = 1;
    for e in ["1", "1/2", "1/3"] {
        let eps: Epsilon = e.parse()?;
        let depth = eps.depth(n);
        println!("eps = {eps}, N = {depth}");
        for j in 1..=depth.min(5) {
            let r = alpha_density(j, n, &eps)?;
            println!("  alpha_{j} [{}] = {}", Regime::of(j, depth), r.density);
            if Regime::of(j, depth) == Regime::Middle {
                // every surviving monomial decays fast enough to integrate
                let slowest = r.density.terms().map(|(m, _)| decay_weight(m, &eps)).min();
                if let Some(w) = slowest {
                    println!("      slowest decay |x|^-({w})");
                }
            }
        }
    }
    Ok(())
}

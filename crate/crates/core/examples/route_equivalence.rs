//! Symbolic routes agree exactly at low order; at high order the same
//! comparison runs on residues modulo 2^61 - 1 at random points.

use std::time::Instant;

use heatinv::invariants::{symbolic_engine, Engine, Epsilon, Route};
use heatinv::ring::Specialized;

fn main() -> heatinv::Result<()> {
    let engine = symbolic_engine(2);
    for j in 1..=4 {
        let a = engine.heat_invariant(j, Route::Theorem31)?;
        let b = engine.heat_invariant(j, Route::Eq23Xm)?;
        println!("n = 2, a_{j}: {} terms, routes agree: {}", a.len(), a == b);
    }

    let eps: Epsilon = "1/3".parse()?;
    let n = 3;
    let depth = eps.depth(n);
    for seed in [1, 2] {
        let engine = Engine::new(Specialized::new(n as usize, seed));
        for j in 7..=8 {
            let start = Instant::now();
            let x = engine.alpha(j, depth, Route::AlphaDef)?;
            let y = engine.alpha(j, depth, Route::AlphaAltSum)?;
            println!(
                "n = 3, N = {depth}, alpha_{j} mod p (seed {seed}): {x} vs {y} in {:.1?}",
                start.elapsed()
            );
        }
    }
    Ok(())
}

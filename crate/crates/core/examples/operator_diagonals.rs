//! Diagonals of X_m e^{-tH0} and e^{-tH0} V_m as Laurent polynomials in t,
//! and the jet operators behind them.

use heatinv::invariants::{vm_diagonal, xm_diagonal};
use heatinv::jet::{Jet, OperatorRoute};
use heatinv::DiffPoly;

fn main() -> heatinv::Result<()> {
    for m in 1..=3 {
        let x = xm_diagonal(m, 1)?;
        let v = vm_diagonal(m, 1)?;
        println!("X_{m}: {x}");
        println!("V_{m}: {v}");
    }
    let one = Jet::constant(heatinv::ring::Symbolic::new(1), DiffPoly::one(1), 4);
    for route in [OperatorRoute::ClosedForm, OperatorRoute::Recurrence] {
        let x2 = one.apply_xm(2, route)?;
        println!("{route:?}: X_2(1) at y = x is {}", x2.diagonal_value());
    }
    Ok(())
}

//! Local heat invariants a_1..a_4 in dimensions 1 to 3, computed by both
//! symbolic routes.

use heatinv::invariants::{heat_invariant_eq23, heat_invariant_thm31};

fn main() -> heatinv::Result<()> {
    for n in 1..=3 {
        println!("dimension {n}");
        for j in 1..=4 {
            let a = heat_invariant_thm31(j, n)?;
            let b = heat_invariant_eq23(j, n)?;
            assert_eq!(a.density, b.density);
            println!("  a_{j} = {}", a.density);
        }
    }
    Ok(())
}

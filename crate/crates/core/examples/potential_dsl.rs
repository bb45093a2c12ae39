//! Parsing potentials, symbolic derivatives, and Taylor jets at a point.

use heatinv::potential::PotentialExpr;
use heatinv::taylor::{expand, Layout};
use heatinv::MultiIndex;

fn main() -> heatinv::Result<()> {
    let v = PotentialExpr::parse("tanh(x1) * exp(-x2^2) + powr(1 + x1^2 + x2^2, -1, 3)", 2)?;
    println!("V = {v}");
    let nu = MultiIndex::new(&[1, 1]);
    let d = v.differentiate(&nu)?;
    println!("D[1,1]V has {} nodes", d.expr().size());

    let x = [0.3, -0.2];
    let layout = Layout::new(2, 4);
    let jet = expand(&v, &layout, &x)?;
    for nu in MultiIndex::all_up_to(2, 2) {
        let symbolic = v.differentiate(&nu)?.evaluate(&x)?;
        let taylor = jet.derivative(&nu).expect("within order");
        println!("D{nu}V = {symbolic:+.12} (jet {taylor:+.12})");
    }

    match PotentialExpr::parse("exp(-x1^2", 1) {
        Err(e) => println!("error: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

pub mod cli;
pub mod diffpoly;
pub mod error;
pub mod exact;
pub mod invariants;
pub mod jet;
pub mod numeric;
pub mod oracles;
pub mod potential;
pub mod quadrature;
pub mod ring;
pub mod taylor;

pub use diffpoly::{DiffPoly, MultiIndex};
pub use error::{Error, Result};

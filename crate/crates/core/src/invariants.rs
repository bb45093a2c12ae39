//! Local heat invariants `a_j(x)` and regularized densities `alpha_j(x)`.
//!
//! Each density is available through two independent routes:
//!
//! * the binomial route, a weighted sum of `H^(k+j)(|z|^(2k))` at `y = x`
//!   with half-integer binomial weights;
//! * the `X_m` route, a sum over `m` of `X_m` applied to Gaussian moment
//!   polynomials.
//!
//! The regularized densities add a regime split on `N = floor(n / eps)`:
//! zero for `j < (N+2)/2`, the plain invariant for `j >= N+1`, and in
//! between either the invariant minus a binomial correction or the tail of
//! the `X_m` sum starting at `m = N+1`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::diffpoly::{DiffPoly, Monomial, MultiIndex};
use crate::error::{Error, Result};
use crate::exact::{factorial, rat_int, shifted_half_binomial};
use crate::jet::{vm_transposed_words, Jet};
use crate::ring::{CoeffRing, Symbolic};

/// How a density was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Route {
    /// Half-integer binomial sum over `H^(k+j)(|z|^(2k))`.
    Theorem31,
    /// Sum of `X_m` contributions, `m = j ..= 2j-1`.
    Eq23Xm,
    /// Regularized density from the binomial route with correction.
    AlphaDef,
    /// Regularized density from the tail of the `X_m` sum.
    AlphaAltSum,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Route::Theorem31 => "theorem31",
            Route::Eq23Xm => "eq23-xm",
            Route::AlphaDef => "alpha-def",
            Route::AlphaAltSum => "alpha-altsum",
        };
        f.write_str(s)
    }
}

/// Decay exponent `eps` of a long-range potential, an exact rational in `(0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Epsilon(BigRational);

impl Epsilon {
    pub fn new(value: BigRational) -> Result<Self> {
        if !value.is_positive() || value > BigRational::one() {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {value}")));
        }
        Ok(Epsilon(value))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        crate::exact::ratio_to_f64(&self.0)
    }

    /// `N = floor(n / eps)`.
    pub fn depth(&self, n: u32) -> u32 {
        let q = rat_int(n as i64) / &self.0;
        q.floor().to_integer().to_u32().expect("depth fits in u32")
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    /// Accepts `p/q` or an integer; floats are rejected so that `N` is exact.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Usage(format!("epsilon must be an exact rational like 1/3, got `{s}`"));
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s, "1"),
        };
        let num: BigInt = num.parse().map_err(|_| bad())?;
        let den: BigInt = den.parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        Epsilon::new(BigRational::new(num, den))
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which formula governs `alpha_j` for a given `(j, N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `j < (N+2)/2`: the density vanishes.
    Zero,
    /// `(N+2)/2 <= j <= N`: invariant minus a correction.
    Middle,
    /// `j >= N+1`: the plain heat invariant.
    Tail,
}

impl Regime {
    pub fn of(j: u32, depth: u32) -> Regime {
        if 2 * j < depth + 2 {
            Regime::Zero
        } else if j <= depth {
            Regime::Middle
        } else {
            Regime::Tail
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Zero => "zero",
            Regime::Middle => "middle",
            Regime::Tail => "tail",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantResult {
    pub j: u32,
    pub density: DiffPoly,
    pub route: Route,
    pub dim: u32,
    pub epsilon: Option<Epsilon>,
    pub depth: Option<u32>,
}

impl InvariantResult {
    pub fn regime(&self) -> Option<Regime> {
        self.depth.map(|d| Regime::of(self.j, d))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "j": self.j,
            "route": self.route.to_string(),
            "density": self.density.to_string(),
            "n": self.dim,
            "epsilon": self.epsilon.as_ref().map(|e| e.to_string()),
            "N": self.depth,
        })
    }
}

/// `(4 pi t)^(-n/2) * sum_e c_e t^e` with exact polynomial coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentDiagonal {
    dim: usize,
    terms: BTreeMap<i32, DiffPoly>,
}

impl LaurentDiagonal {
    pub fn zero(dim: usize) -> Self {
        LaurentDiagonal {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn add_term(&mut self, exponent: i32, c: &DiffPoly) {
        let slot = self
            .terms
            .entry(exponent)
            .or_insert_with(|| DiffPoly::zero(c.dim()));
        slot.add_scaled(c, &BigRational::one());
        if slot.is_zero() {
            self.terms.remove(&exponent);
        }
    }

    pub fn coefficient(&self, exponent: i32) -> DiffPoly {
        self.terms
            .get(&exponent)
            .cloned()
            .unwrap_or_else(|| DiffPoly::zero(self.dim))
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &DiffPoly)> {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    pub fn scaled(&self, s: &BigRational) -> Self {
        let mut out = LaurentDiagonal::zero(self.dim);
        for (e, c) in &self.terms {
            out.add_term(*e, &c.scaled(s));
        }
        out
    }

    pub fn min_exponent(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }
}

impl fmt::Display for LaurentDiagonal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})*t^{e}")?;
        }
        Ok(())
    }
}

/// `d^(2 mu) e^{-t H0}(x, y)` at `y = x`, divided by `(4 pi t)^(-n/2)`:
/// returns `((-1)^|mu| (2 mu)! / (4^|mu| mu!), -|mu|)`.
pub fn gaussian_diag_derivative(mu: &MultiIndex) -> (BigRational, i32) {
    let q = mu.order();
    let num = mu.doubled().factorial();
    let den = (BigInt::one() << (2 * q as usize)) * mu.factorial();
    let mut c = BigRational::new(num, den);
    if q % 2 == 1 {
        c = -c;
    }
    (c, -(q as i32))
}

/// Memoizing evaluator of the density formulas over a coefficient ring.
pub struct Engine<R: CoeffRing> {
    ring: R,
    memo: Mutex<FxHashMap<(u32, u32), R::Elem>>,
}

impl<R: CoeffRing> Engine<R> {
    pub fn new(ring: R) -> Self {
        Engine {
            ring,
            memo: Mutex::new(FxHashMap::default()),
        }
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    fn dim(&self) -> u32 {
        self.ring.dim() as u32
    }

    /// `H^m(|z|^(2k))` at `y = x`, memoized.
    pub fn power_diagonal(&self, k: u32, m: u32) -> Result<R::Elem> {
        if let Some(v) = self.memo.lock().expect("memo lock").get(&(k, m)) {
            return Ok(v.clone());
        }
        let order = (2 * k).max(2 * m);
        let f = Jet::distance_power(self.ring.clone(), k, order)?;
        let v = f.diagonal_of_h_power(m)?;
        self.memo
            .lock()
            .expect("memo lock")
            .insert((k, m), v.clone());
        Ok(v)
    }

    /// `(-1)^j sum_{k=0}^{upper} C(upper + n/2, k + n/2)
    ///   H^(k+j)(|z|^(2k))|_{y=x} / (4^k k! (k+j)!)`.
    ///
    /// `upper = j - 1` gives `a_j`; `upper = N - j` gives the correction
    /// subtracted in the middle regime.
    pub fn binomial_sum(&self, j: u32, upper: u32) -> Result<R::Elem> {
        let n = self.dim();
        let parts: Vec<Result<R::Elem>> = (0..=upper)
            .into_par_iter()
            .map(|k| {
                let weight = shifted_half_binomial(upper, k, n)?
                    / BigRational::from_integer(
                        (BigInt::one() << (2 * k as usize)) * factorial(k) * factorial(k + j),
                    );
                let v = self.power_diagonal(k, k + j)?;
                Ok(self.ring.scaled(&v, &self.ring.scalar(&weight)))
            })
            .collect();
        let mut acc = self.ring.zero();
        let sign = self.ring.scalar_int(if j.is_multiple_of(2) { 1 } else { -1 });
        for p in parts {
            self.ring.add_scaled(&mut acc, &p?, &sign);
        }
        Ok(acc)
    }

    /// Contribution of `t^m/m! X_m e^{-tH0}` to the coefficient of `t^j`:
    /// `(1/m!) sum_{|mu| = m-j} X_m(z^(2mu)/(2mu)!)|_{y=x} (-1)^|mu| (2mu)!/(4^|mu| mu!)`.
    ///
    /// The moment sum collapses to `X_m` applied to `(-1)^q |z|^(2q) / (4^q q!)`
    /// with `q = m - j`.
    pub fn xm_contribution(&self, j: u32, m: u32) -> Result<R::Elem> {
        if m < j {
            return Ok(self.ring.zero());
        }
        let q = m - j;
        let order = (2 * q).max(2 * m);
        let f = Jet::distance_power(self.ring.clone(), q, order)?;
        let mut c = BigRational::new(
            BigInt::one(),
            (BigInt::one() << (2 * q as usize)) * factorial(q) * factorial(m),
        );
        if q % 2 == 1 {
            c = -c;
        }
        let v = f.diagonal_of_xm(m)?;
        Ok(self.ring.scaled(&v, &self.ring.scalar(&c)))
    }

    /// `sum_{m=lo}^{hi} xm_contribution(j, m)`.
    pub fn xm_sum(&self, j: u32, lo: u32, hi: u32) -> Result<R::Elem> {
        let parts: Vec<Result<R::Elem>> = (lo..=hi)
            .into_par_iter()
            .map(|m| self.xm_contribution(j, m))
            .collect();
        let mut acc = self.ring.zero();
        let one = self.ring.scalar_int(1);
        for p in parts {
            self.ring.add_scaled(&mut acc, &p?, &one);
        }
        Ok(acc)
    }

    pub fn heat_invariant(&self, j: u32, route: Route) -> Result<R::Elem> {
        check_order(j)?;
        match route {
            Route::Theorem31 => self.binomial_sum(j, j - 1),
            Route::Eq23Xm => self.xm_sum(j, j, 2 * j - 1),
            _ => Err(Error::Usage(format!("route {route} does not produce a_j"))),
        }
    }

    pub fn alpha(&self, j: u32, depth: u32, route: Route) -> Result<R::Elem> {
        check_order(j)?;
        match (Regime::of(j, depth), route) {
            (Regime::Zero, Route::AlphaDef) => Ok(self.ring.zero()),
            (Regime::Tail, Route::AlphaDef) => self.binomial_sum(j, j - 1),
            (Regime::Middle, Route::AlphaDef) => {
                let mut a = self.binomial_sum(j, j - 1)?;
                let corr = self.binomial_sum(j, depth - j)?;
                self.ring
                    .add_scaled(&mut a, &corr, &self.ring.scalar_int(-1));
                Ok(a)
            }
            (Regime::Middle, Route::AlphaAltSum) => self.xm_sum(j, depth + 1, 2 * j - 1),
            (regime, Route::AlphaAltSum) => Err(Error::Domain(format!(
                "the X_m tail sum applies to the middle regime only; j = {j} is in the {regime} regime for N = {depth}"
            ))),
            (_, route) => Err(Error::Usage(format!("route {route} does not produce alpha_j"))),
        }
    }
}

fn check_order(j: u32) -> Result<()> {
    if j == 0 {
        return Err(Error::Domain("order j must be at least 1".into()));
    }
    Ok(())
}

fn check_dim(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    Ok(())
}

pub fn symbolic_engine(n: u32) -> Engine<Symbolic> {
    Engine::new(Symbolic::new(n as usize))
}

fn result(j: u32, density: DiffPoly, route: Route, n: u32) -> InvariantResult {
    InvariantResult {
        j,
        density,
        route,
        dim: n,
        epsilon: None,
        depth: None,
    }
}

/// `a_j(x)` by the half-integer binomial sum.
pub fn heat_invariant_thm31(j: u32, n: u32) -> Result<InvariantResult> {
    check_dim(n)?;
    let d = symbolic_engine(n).heat_invariant(j, Route::Theorem31)?;
    Ok(result(j, d, Route::Theorem31, n))
}

/// `a_j(x)` by the `X_m` sum.
pub fn heat_invariant_eq23(j: u32, n: u32) -> Result<InvariantResult> {
    check_dim(n)?;
    let d = symbolic_engine(n).heat_invariant(j, Route::Eq23Xm)?;
    Ok(result(j, d, Route::Eq23Xm, n))
}

fn alpha_result(j: u32, n: u32, eps: &Epsilon, route: Route) -> Result<InvariantResult> {
    check_dim(n)?;
    let depth = eps.depth(n);
    let d = symbolic_engine(n).alpha(j, depth, route)?;
    Ok(InvariantResult {
        j,
        density: d,
        route,
        dim: n,
        epsilon: Some(eps.clone()),
        depth: Some(depth),
    })
}

/// `alpha_j(x)` from the regime formulas.
pub fn alpha_density(j: u32, n: u32, eps: &Epsilon) -> Result<InvariantResult> {
    alpha_result(j, n, eps, Route::AlphaDef)
}

/// `alpha_j(x)` in the middle regime from `X_m`, `m = N+1 ..= 2j-1`.
pub fn alpha_density_altsum(j: u32, n: u32, eps: &Epsilon) -> Result<InvariantResult> {
    alpha_result(j, n, eps, Route::AlphaAltSum)
}

/// `X_m e^{-tH0}` on the diagonal. Every even moment up to the full order
/// `2m` of the words is included, so vanishing of the high ones is a
/// property of the result rather than an assumption.
pub fn xm_diagonal(m: u32, n: u32) -> Result<LaurentDiagonal> {
    check_dim(n)?;
    let ring = Symbolic::new(n as usize);
    moment_diagonal(n, m, |f| f.diagonal_of_xm(m), &ring)
}

/// `e^{-tH0} V_m` on the diagonal, via the transposed words
/// `sum_k (-1)^k C(m,k) H^(m-k) H0^k` acting on the Gaussian in `y`.
pub fn vm_diagonal(m: u32, n: u32) -> Result<LaurentDiagonal> {
    check_dim(n)?;
    let ring = Symbolic::new(n as usize);
    let words = vm_transposed_words(m);
    moment_diagonal(
        n,
        m,
        |f| {
            let mut acc = DiffPoly::zero(n as usize);
            for w in &words {
                acc.add_scaled(&f.diagonal_of_word(w)?, &BigRational::one());
            }
            Ok(acc)
        },
        &ring,
    )
}

fn moment_diagonal<F>(n: u32, m: u32, apply: F, ring: &Symbolic) -> Result<LaurentDiagonal>
where
    F: Fn(&Jet) -> Result<DiffPoly> + Sync,
{
    let mus: Vec<MultiIndex> = MultiIndex::all_up_to(n as usize, m);
    let parts: Vec<Result<(i32, DiffPoly)>> = mus
        .par_iter()
        .map(|mu| {
            let alpha = mu.doubled();
            let order = alpha.order().max(2 * m);
            let c = BigRational::new(BigInt::one(), alpha.factorial());
            let f = Jet::monomial(*ring, alpha, DiffPoly::constant(n as usize, c), order)?;
            let p = apply(&f)?;
            let (g, e) = gaussian_diag_derivative(mu);
            Ok((e, p.scaled(&g)))
        })
        .collect();
    let mut out = LaurentDiagonal::zero(n as usize);
    for p in parts {
        let (e, c) = p?;
        out.add_term(e, &c);
    }
    Ok(out)
}

/// Coefficient of `t^j` in `sum_{m=0}^{N} t^m/m! (X_m e^{-tH0})(x,x)`
/// (with the common `(4 pi t)^(-n/2)` removed).
pub fn truncated_expansion_coefficient(j: u32, depth: u32, n: u32) -> Result<DiffPoly> {
    check_dim(n)?;
    let mut acc = DiffPoly::zero(n as usize);
    for m in 0..=depth {
        let diag = xm_diagonal(m, n)?;
        let c = diag.coefficient(j as i32 - m as i32);
        acc.add_scaled(&c, &BigRational::new(BigInt::one(), factorial(m)));
    }
    Ok(acc)
}

/// Decay exponent of a monomial for a potential in `S^{-eps}`:
/// `eps` per factor plus one per derivative.
pub fn decay_weight(m: &Monomial, eps: &Epsilon) -> BigRational {
    eps.value() * rat_int(m.degree() as i64) + rat_int(m.derivative_order() as i64)
}

/// Whether `floor(n/eps)` is odd; then the vanishing regime is `j <= (N+1)/2`.
pub fn odd_depth_bound(depth: u32) -> Option<u32> {
    (depth % 2 == 1).then(|| depth / 2 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn poly(s: &str, n: usize) -> DiffPoly {
        DiffPoly::parse(s, n).unwrap()
    }

    fn eps(s: &str) -> Epsilon {
        s.parse().unwrap()
    }

    #[test]
    fn gaussian_moments() {
        // Hand differentiation of (4 pi t)^{-1/2} exp(-z^2 / 4t) at z = 0.
        assert_eq!(gaussian_diag_derivative(&MultiIndex::new(&[0])), (rat_int(1), 0));
        assert_eq!(gaussian_diag_derivative(&MultiIndex::new(&[1])), (rat(-1, 2), -1));
        assert_eq!(gaussian_diag_derivative(&MultiIndex::new(&[2])), (rat(3, 4), -2));
        assert_eq!(gaussian_diag_derivative(&MultiIndex::new(&[1, 1])), (rat(1, 4), -2));
    }

    #[test]
    fn first_invariants() {
        for n in 1..=3 {
            assert_eq!(heat_invariant_thm31(1, n).unwrap().density, poly("-V", n as usize));
        }
        assert_eq!(
            heat_invariant_thm31(2, 1).unwrap().density.to_string(),
            "1/2*V^2 - 1/6*D[2]V"
        );
        assert_eq!(
            heat_invariant_eq23(2, 1).unwrap().density.to_string(),
            "1/2*V^2 - 1/6*D[2]V"
        );
        assert_eq!(
            heat_invariant_thm31(3, 1).unwrap().density.to_string(),
            "-1/6*V^3 + 1/12*D[1]V^2 + 1/6*D[2]V*V - 1/60*D[4]V"
        );
    }

    #[test]
    fn order_zero_rejected() {
        assert!(heat_invariant_thm31(0, 1).is_err());
        assert!(heat_invariant_eq23(1, 0).is_err());
    }

    #[test]
    fn alpha_example_regimes() {
        let e = eps("1/3");
        assert!(alpha_density(1, 1, &e).unwrap().density.is_zero());
        assert!(alpha_density(2, 1, &e).unwrap().density.is_zero());
        let a3 = alpha_density(3, 1, &e).unwrap();
        assert_eq!(a3.depth, Some(3));
        assert_eq!(a3.regime(), Some(Regime::Middle));
        assert_eq!(
            a3.density.to_string(),
            "-1/4*D[1]V^2 - 1/3*D[2]V*V + 3/20*D[4]V"
        );
        assert_eq!(alpha_density_altsum(3, 1, &e).unwrap().density, a3.density);
        let a4 = alpha_density(4, 1, &e).unwrap();
        assert_eq!(a4.density, heat_invariant_thm31(4, 1).unwrap().density);
        assert!(alpha_density_altsum(4, 1, &e).is_err());
        assert!(alpha_density_altsum(1, 1, &e).is_err());
    }

    #[test]
    fn epsilon_parsing() {
        assert_eq!(eps("1/3").depth(1), 3);
        assert_eq!(eps("1").depth(3), 3);
        assert_eq!(eps("2/5").depth(2), 5);
        assert!("2".parse::<Epsilon>().is_err());
        assert!("0".parse::<Epsilon>().is_err());
        assert!("0.5".parse::<Epsilon>().is_err());
        assert!("1/0".parse::<Epsilon>().is_err());
    }

    #[test]
    fn regime_boundaries() {
        assert_eq!(Regime::of(1, 1), Regime::Zero);
        assert_eq!(Regime::of(2, 1), Regime::Tail);
        assert_eq!(Regime::of(2, 3), Regime::Zero);
        assert_eq!(Regime::of(3, 3), Regime::Middle);
        assert_eq!(Regime::of(2, 2), Regime::Middle);
        // odd N: the vanishing regime is exactly j <= (N+1)/2
        for depth in (1..20).step_by(2) {
            let bound = odd_depth_bound(depth).unwrap();
            for j in 1..20 {
                assert_eq!(Regime::of(j, depth) == Regime::Zero, j <= bound);
            }
        }
    }

    #[test]
    fn xm_diagonal_low_orders() {
        let d0 = xm_diagonal(0, 2).unwrap();
        assert_eq!(d0.coefficient(0), DiffPoly::one(2));
        assert_eq!(d0.terms().count(), 1);
        let d1 = xm_diagonal(1, 1).unwrap();
        assert_eq!(d1.coefficient(0), poly("-V", 1));
        assert_eq!(d1.terms().count(), 1);
        // X_2 = H0^2 - 2 H H0 + H^2; the z^2/2 moment vanishes by hand.
        let d2 = xm_diagonal(2, 1).unwrap();
        assert_eq!(d2.coefficient(0), poly("V^2 - D[2]V", 1));
        assert_eq!(d2.terms().count(), 1);
        let v1 = vm_diagonal(1, 1).unwrap();
        assert_eq!(v1.coefficient(0), poly("V", 1));
    }

    #[test]
    fn weights_of_middle_regime_alpha_exceed_dimension() {
        let e = eps("1/3");
        let a3 = alpha_density(3, 1, &e).unwrap();
        for (m, _) in a3.density.terms() {
            assert!(decay_weight(m, &e) > rat_int(1));
        }
    }
}

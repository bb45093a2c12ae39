//! Truncated power series in `z = y - x` whose coefficients live in a
//! [`CoeffRing`], together with the actions of `H0 = -Laplacian`,
//! `H = H0 + V(y)`, and the alternating operator families built from them.
//!
//! A jet stores every term of z-degree `<= order`. When `complete` is false
//! some terms above `order` were discarded, so a Laplacian leaves only
//! degrees `<= order - 2` trustworthy; the jet shrinks its order accordingly
//! and refuses to go negative.

use num_rational::BigRational;
use rustc_hash::FxHashMap;

use crate::diffpoly::{DiffPoly, MultiIndex};
use crate::error::{Error, Result};
use crate::exact::{binomial, rat_int};
use crate::ring::{CoeffRing, Symbolic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    /// `H = -Laplacian + V(y)`
    H,
    /// `H0 = -Laplacian`
    H0,
}

/// Product of `H`/`H0` factors times a rational coefficient. Tokens apply
/// right to left: `[H, H0]` means `H(H0(f))`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorWord {
    pub tokens: Vec<Token>,
    pub coeff: BigRational,
}

impl OperatorWord {
    pub fn new(tokens: Vec<Token>, coeff: BigRational) -> Self {
        OperatorWord { tokens, coeff }
    }

    pub fn identity() -> Self {
        OperatorWord::new(Vec::new(), rat_int(1))
    }

    /// `coeff * H^a H0^b`
    pub fn h_then_h0(a: usize, b: usize, coeff: BigRational) -> Self {
        let mut tokens = vec![Token::H; a];
        tokens.extend(std::iter::repeat_n(Token::H0, b));
        OperatorWord::new(tokens, coeff)
    }

    /// `coeff * H0^a H^b`
    pub fn h0_then_h(a: usize, b: usize, coeff: BigRational) -> Self {
        let mut tokens = vec![Token::H0; a];
        tokens.extend(std::iter::repeat_n(Token::H, b));
        OperatorWord::new(tokens, coeff)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Which formula builds `X_m` / `V_m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum OperatorRoute {
    /// Alternating binomial sum of operator words.
    ClosedForm,
    /// Commutator recurrence.
    Recurrence,
}

/// `X_m = sum_k (-1)^k C(m,k) H^k H0^(m-k)`
pub fn xm_words(m: u32) -> Vec<OperatorWord> {
    (0..=m)
        .map(|k| {
            OperatorWord::h_then_h0(k as usize, (m - k) as usize, signed_binomial(m, k))
        })
        .collect()
}

/// `V_m = sum_k (-1)^k C(m,k) H0^k H^(m-k)`
pub fn vm_words(m: u32) -> Vec<OperatorWord> {
    (0..=m)
        .map(|k| {
            OperatorWord::h0_then_h(k as usize, (m - k) as usize, signed_binomial(m, k))
        })
        .collect()
}

/// Transpose of the `V_m` words: `sum_k (-1)^k C(m,k) H^(m-k) H0^k`.
pub fn vm_transposed_words(m: u32) -> Vec<OperatorWord> {
    (0..=m)
        .map(|k| {
            OperatorWord::h_then_h0((m - k) as usize, k as usize, signed_binomial(m, k))
        })
        .collect()
}

pub(crate) fn signed_binomial(m: u32, k: u32) -> BigRational {
    let b = BigRational::from_integer(binomial(m, k));
    if k % 2 == 1 {
        -b
    } else {
        b
    }
}

#[derive(Clone, Debug)]
pub struct Jet<R: CoeffRing = Symbolic> {
    ring: R,
    order: u32,
    complete: bool,
    terms: FxHashMap<MultiIndex, R::Elem>,
}

impl<R: CoeffRing> PartialEq for Jet<R> {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.terms == other.terms
    }
}

impl<R: CoeffRing> Jet<R> {
    pub fn zero(ring: R, order: u32) -> Self {
        Jet {
            ring,
            order,
            complete: true,
            terms: FxHashMap::default(),
        }
    }

    /// `c * z^alpha`
    pub fn monomial(ring: R, alpha: MultiIndex, c: R::Elem, order: u32) -> Result<Self> {
        if alpha.dim() != ring.dim() {
            return Err(Error::DimensionMismatch(ring.dim(), alpha.dim()));
        }
        if alpha.order() > order {
            return Err(Error::InsufficientTruncation(format!(
                "monomial of degree {} does not fit truncation order {order}",
                alpha.order()
            )));
        }
        let mut jet = Self::zero(ring, order);
        jet.insert(alpha, c);
        Ok(jet)
    }

    pub fn constant(ring: R, c: R::Elem, order: u32) -> Self {
        let dim = ring.dim();
        Self::monomial(ring, MultiIndex::zeros(dim), c, order).expect("constant fits any order")
    }

    /// `|z|^(2k) = (z_1^2 + ... + z_n^2)^k`
    pub fn distance_power(ring: R, k: u32, order: u32) -> Result<Self> {
        if order < 2 * k {
            return Err(Error::InsufficientTruncation(format!(
                "|z|^{} needs truncation order >= {}, got {order}",
                2 * k,
                2 * k
            )));
        }
        let dim = ring.dim();
        let mut jet = Self::zero(ring, order);
        // Multinomial: sum over |beta| = k of k!/beta! z^(2 beta).
        let k_fact = crate::exact::factorial(k);
        for beta in MultiIndex::all_of_order(dim, k) {
            let c = BigRational::new(k_fact.clone(), beta.factorial());
            let c = jet.ring.constant(&jet.ring.scalar(&c));
            jet.insert(beta.doubled(), c);
        }
        Ok(jet)
    }

    /// Formal Taylor series of `V(x + z)`: `sum_{|nu| <= order} D[nu]V z^nu / nu!`.
    pub fn potential_taylor(ring: R, order: u32) -> Self {
        let dim = ring.dim();
        let mut jet = Self::zero(ring, order);
        jet.complete = false;
        for nu in MultiIndex::all_up_to(dim, order) {
            let s = jet
                .ring
                .scalar(&BigRational::new(1.into(), nu.factorial()));
            let mut c = jet.ring.zero();
            jet.ring
                .add_scaled_times_var(&mut c, &jet.ring.one(), &nu, &s);
            jet.insert(nu, c);
        }
        jet
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    pub fn dim(&self) -> usize {
        self.ring.dim()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// True when no term above `order` was ever discarded.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> R::Elem {
        self.terms
            .get(alpha)
            .cloned()
            .unwrap_or_else(|| self.ring.zero())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &R::Elem)> {
        self.terms.iter()
    }

    /// Highest z-degree present.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::order).max().unwrap_or(0)
    }

    /// Total size of all coefficients, as reported by the ring.
    pub fn weight(&self) -> usize {
        self.terms.values().map(|c| self.ring.weight(c)).sum()
    }

    fn insert(&mut self, alpha: MultiIndex, c: R::Elem) {
        if !self.ring.is_zero(&c) {
            self.terms.insert(alpha, c);
        }
    }

    fn accumulate(
        terms: &mut FxHashMap<MultiIndex, R::Elem>,
        ring: &R,
        alpha: MultiIndex,
        c: &R::Elem,
        s: &R::Scalar,
    ) {
        let slot = terms.entry(alpha).or_insert_with(|| ring.zero());
        ring.add_scaled(slot, c, s);
    }

    fn prune_zeros(&mut self) {
        let ring = &self.ring;
        self.terms.retain(|_, c| !ring.is_zero(c));
    }

    /// Discards all terms of degree `> order`.
    pub fn restricted(&self, order: u32) -> Self {
        if order >= self.order {
            return self.clone();
        }
        let mut out = Self::zero(self.ring.clone(), order);
        out.complete = self.complete;
        for (a, c) in &self.terms {
            if a.order() <= order {
                out.terms.insert(a.clone(), c.clone());
            } else {
                out.complete = false;
            }
        }
        out
    }

    /// `self + s * other`, truncated to the smaller order.
    pub fn add_scaled(&self, other: &Jet<R>, s: &R::Scalar) -> Self {
        let order = self.order.min(other.order);
        let mut out = self.restricted(order);
        let other = other.restricted(order);
        out.complete &= other.complete;
        for (a, c) in other.terms {
            Self::accumulate(&mut out.terms, &self.ring, a, &c, s);
        }
        out.prune_zeros();
        out
    }

    pub fn scaled(&self, s: &R::Scalar) -> Self {
        let mut out = Self::zero(self.ring.clone(), self.order);
        out.complete = self.complete;
        for (a, c) in &self.terms {
            out.insert(a.clone(), self.ring.scaled(c, s));
        }
        out
    }

    /// `-Laplacian_z`.
    pub fn apply_h0(&self) -> Result<Self> {
        let order = if self.complete {
            self.order
        } else if self.order >= 2 {
            self.order - 2
        } else {
            return Err(Error::InsufficientTruncation(format!(
                "Laplacian of a jet known only through degree {}",
                self.order
            )));
        };
        let mut out = Self::zero(self.ring.clone(), order);
        out.complete = self.complete;
        for (alpha, c) in &self.terms {
            for axis in 0..self.dim() {
                let a = alpha.get(axis) as i64;
                if let Some(lower) = alpha.lowered_twice(axis) {
                    if lower.order() <= order {
                        let s = self.ring.scalar_int(-a * (a - 1));
                        Self::accumulate(&mut out.terms, &self.ring, lower, c, &s);
                    }
                }
            }
        }
        out.prune_zeros();
        Ok(out)
    }

    /// Multiplication by the Taylor series of `V(x + z)`, truncated at the
    /// jet's order.
    pub fn multiply_potential(&self) -> Self {
        let taylor = potential_scalars(&self.ring, self.order);
        let mut out = Self::zero(self.ring.clone(), self.order);
        out.complete = self.complete;
        for (alpha, c) in &self.terms {
            let room = self.order - alpha.order();
            for (nu, s) in &taylor {
                if nu.order() > room {
                    // Taylor terms are graded, everything after is too big.
                    break;
                }
                let slot = out
                    .terms
                    .entry(alpha.plus(nu))
                    .or_insert_with(|| self.ring.zero());
                self.ring.add_scaled_times_var(slot, c, nu, s);
            }
        }
        if !self.terms.is_empty() {
            // The Taylor series never terminates.
            out.complete = false;
        }
        out.prune_zeros();
        out
    }

    /// `H f = -Laplacian f + V(x + z) f`.
    pub fn apply_h(&self) -> Result<Self> {
        let lap = self.apply_h0()?;
        let pot = self.multiply_potential();
        Ok(lap.add_scaled(&pot, &self.ring.scalar_int(1)))
    }

    pub fn apply_token(&self, t: Token) -> Result<Self> {
        match t {
            Token::H => self.apply_h(),
            Token::H0 => self.apply_h0(),
        }
    }

    /// Applies the word right to left and scales by its coefficient.
    pub fn apply_word(&self, w: &OperatorWord) -> Result<Self> {
        let mut cur = self.clone();
        for &t in w.tokens.iter().rev() {
            cur = cur.apply_token(t)?;
        }
        Ok(cur.scaled(&self.ring.scalar(&w.coeff)))
    }

    /// Sum of word applications.
    pub fn apply_words(&self, words: &[OperatorWord]) -> Result<Self> {
        let mut acc: Option<Jet<R>> = None;
        for w in words {
            let term = self.apply_word(w)?;
            acc = Some(match acc {
                None => term,
                Some(a) => a.add_scaled(&term, &self.ring.scalar_int(1)),
            });
        }
        Ok(acc.unwrap_or_else(|| Self::zero(self.ring.clone(), self.order)))
    }

    /// The z-constant coefficient, i.e. the value at `y = x`.
    pub fn diagonal_value(&self) -> R::Elem {
        self.coefficient(&MultiIndex::zeros(self.dim()))
    }

    /// `X_m f`.
    pub fn apply_xm(&self, m: u32, route: OperatorRoute) -> Result<Self> {
        match route {
            OperatorRoute::ClosedForm => self.apply_words(&xm_words(m)),
            OperatorRoute::Recurrence => self.xm_recurrence(m),
        }
    }

    /// `V_m f`.
    pub fn apply_vm(&self, m: u32, route: OperatorRoute) -> Result<Self> {
        match route {
            OperatorRoute::ClosedForm => self.apply_words(&vm_words(m)),
            OperatorRoute::Recurrence => self.vm_recurrence(m),
        }
    }

    // X_m = (H0 - H) X_{m-1} + [X_{m-1}, H0]
    //     = -V X_{m-1} + X_{m-1} H0 - H0 X_{m-1}
    fn xm_recurrence(&self, m: u32) -> Result<Self> {
        if m == 0 {
            return Ok(self.clone());
        }
        let prev = self.xm_recurrence(m - 1)?;
        let shifted = self.apply_h0()?.xm_recurrence(m - 1)?;
        let one = self.ring.scalar_int(1);
        let minus = self.ring.scalar_int(-1);
        Ok(prev
            .multiply_potential()
            .scaled(&minus)
            .add_scaled(&shifted, &one)
            .add_scaled(&prev.apply_h0()?, &minus))
    }

    // V_m = V_{m-1} V + V_{m-1} H0 - H0 V_{m-1}
    //     = V_{m-1} H - H0 V_{m-1}
    fn vm_recurrence(&self, m: u32) -> Result<Self> {
        if m == 0 {
            return Ok(self.clone());
        }
        let minus = self.ring.scalar_int(-1);
        let through_h = self.apply_h()?.vm_recurrence(m - 1)?;
        let prev = self.vm_recurrence(m - 1)?;
        Ok(through_h.add_scaled(&prev.apply_h0()?, &minus))
    }

    /// Value at `y = x` of `w(self)`, dropping before each step every term
    /// that cannot reach degree zero in the remaining steps.
    pub fn diagonal_of_word(&self, w: &OperatorWord) -> Result<R::Elem> {
        let mut cur = self.clone();
        let steps = w.tokens.len() as u32;
        for (i, &t) in w.tokens.iter().rev().enumerate() {
            let remaining = steps - i as u32;
            cur = cur.restricted(2 * remaining).apply_token(t)?;
        }
        Ok(self
            .ring
            .scaled(&cur.diagonal_value(), &self.ring.scalar(&w.coeff)))
    }

    /// Value at `y = x` of `H^m (self)` with degree pruning.
    pub fn diagonal_of_h_power(&self, m: u32) -> Result<R::Elem> {
        self.diagonal_of_word(&OperatorWord::h_then_h0(m as usize, 0, rat_int(1)))
    }

    /// Value at `y = x` of `X_m (self)`, evaluated as a Horner scheme in `H`
    /// with degree pruning: `X_m f = sum_k c_k H^k (H0^(m-k) f)`.
    pub fn diagonal_of_xm(&self, m: u32) -> Result<R::Elem> {
        // g[i] = H0^i f
        let mut g = vec![self.clone()];
        for _ in 0..m {
            let next = g.last().expect("nonempty").apply_h0()?;
            g.push(next);
        }
        let coeff = |k: u32| self.ring.scalar(&signed_binomial(m, k));
        let mut acc = g[0].scaled(&coeff(m));
        for k in (0..m).rev() {
            acc = acc.restricted(2 * (k + 1)).apply_h()?;
            acc = acc.add_scaled(&g[(m - k) as usize], &coeff(k));
        }
        Ok(acc.diagonal_value())
    }
}

impl Jet<Symbolic> {
    /// Polynomial jet with `DiffPoly` coefficients.
    pub fn from_terms<I>(dim: usize, order: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, DiffPoly)>,
    {
        let mut jet = Self::zero(Symbolic::new(dim), order);
        for (alpha, c) in terms {
            if alpha.dim() != dim || c.dim() != dim {
                return Err(Error::DimensionMismatch(dim, alpha.dim().max(c.dim())));
            }
            if alpha.order() > order {
                return Err(Error::InsufficientTruncation(format!(
                    "term of degree {} exceeds truncation order {order}",
                    alpha.order()
                )));
            }
            let slot = jet.terms.entry(alpha).or_insert_with(|| DiffPoly::zero(dim));
            *slot = &*slot + &c;
        }
        jet.prune_zeros();
        Ok(jet)
    }

    pub fn distance_power_symbolic(k: u32, dim: usize, order: u32) -> Result<Self> {
        Self::distance_power(Symbolic::new(dim), k, order)
    }

    pub fn potential_taylor_symbolic(dim: usize, order: u32) -> Self {
        Self::potential_taylor(Symbolic::new(dim), order)
    }
}

fn potential_scalars<R: CoeffRing>(ring: &R, order: u32) -> Vec<(MultiIndex, R::Scalar)> {
    MultiIndex::all_up_to(ring.dim(), order)
        .into_iter()
        .map(|nu| {
            let s = ring.scalar(&BigRational::new(1.into(), nu.factorial()));
            (nu, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e)
    }

    fn poly(text: &str, dim: usize) -> DiffPoly {
        DiffPoly::parse(text, dim).unwrap()
    }

    fn z_power(alpha: &[u32], order: u32) -> Jet {
        let dim = alpha.len();
        Jet::monomial(Symbolic::new(dim), mi(alpha), DiffPoly::one(dim), order).unwrap()
    }

    #[test]
    fn distance_power_examples() {
        let one = Jet::distance_power_symbolic(0, 3, 0).unwrap();
        assert_eq!(one.diagonal_value(), DiffPoly::one(3));
        assert_eq!(one.len(), 1);

        let r2 = Jet::distance_power_symbolic(1, 2, 2).unwrap();
        assert_eq!(r2.len(), 2);
        assert_eq!(r2.coefficient(&mi(&[2, 0])), DiffPoly::one(2));
        assert_eq!(r2.coefficient(&mi(&[0, 2])), DiffPoly::one(2));

        let r4 = Jet::distance_power_symbolic(2, 1, 4).unwrap();
        assert_eq!(r4.len(), 1);
        assert_eq!(r4.coefficient(&mi(&[4])), DiffPoly::one(1));

        // (z1^2 + z2^2)^2 has a cross term 2 z1^2 z2^2.
        let r4_2d = Jet::distance_power_symbolic(2, 2, 4).unwrap();
        assert_eq!(r4_2d.coefficient(&mi(&[2, 2])), DiffPoly::constant(2, rat_int(2)));

        assert!(matches!(
            Jet::distance_power_symbolic(2, 1, 3),
            Err(Error::InsufficientTruncation(_))
        ));
    }

    #[test]
    fn taylor_jet_examples() {
        let t0 = Jet::potential_taylor_symbolic(1, 0);
        assert_eq!(t0.len(), 1);
        assert_eq!(t0.diagonal_value(), poly("V", 1));
        let t1 = Jet::potential_taylor_symbolic(1, 1);
        assert_eq!(t1.coefficient(&mi(&[1])), poly("D[1]V", 1));
        let t2 = Jet::potential_taylor_symbolic(1, 2);
        assert_eq!(t2.coefficient(&mi(&[2])), poly("1/2*D[2]V", 1));
    }

    #[test]
    fn apply_h_examples() {
        let one = Jet::constant(Symbolic::new(1), DiffPoly::one(1), 2);
        let h1 = one.apply_h().unwrap();
        assert_eq!(h1, Jet::potential_taylor_symbolic(1, 2));

        for n in 1..=3 {
            let r2 = Jet::distance_power_symbolic(1, n, 2).unwrap();
            let h = r2.apply_h().unwrap();
            assert_eq!(h.diagonal_value(), DiffPoly::constant(n, rat_int(-2 * n as i64)));
        }

        let z1 = z_power(&[1], 2);
        let h = z1.apply_h().unwrap();
        let expect = Jet::from_terms(1, 2, [(mi(&[1]), poly("V", 1)), (mi(&[2]), poly("D[1]V", 1))]).unwrap();
        assert_eq!(h, expect);
    }

    #[test]
    fn apply_word_examples() {
        let z2 = z_power(&[2], 2);
        let w = OperatorWord::new(vec![Token::H0], rat_int(1));
        let r = z2.apply_word(&w).unwrap();
        assert_eq!(r.diagonal_value(), DiffPoly::constant(1, rat_int(-2)));
        assert_eq!(r.len(), 1);

        let w = OperatorWord::new(vec![Token::H, Token::H0], rat_int(1));
        let r = z2.apply_word(&w).unwrap();
        assert_eq!(r.diagonal_value(), poly("-2*V", 1));

        assert_eq!(z2.apply_word(&OperatorWord::identity()).unwrap(), z2);
    }

    #[test]
    fn insufficient_truncation_is_detected() {
        // V(x+z) * 1 is truncated at order 1, so a second H cannot be trusted.
        let one = Jet::constant(Symbolic::new(1), DiffPoly::one(1), 1);
        let w = OperatorWord::h_then_h0(2, 0, rat_int(1));
        assert!(matches!(one.apply_word(&w), Err(Error::InsufficientTruncation(_))));
        let one = Jet::constant(Symbolic::new(1), DiffPoly::one(1), 2);
        assert!(one.apply_word(&w).is_ok());
    }

    #[test]
    fn diagonal_examples() {
        let one = Jet::constant(Symbolic::new(2), DiffPoly::one(2), 3);
        assert_eq!(one.diagonal_value(), DiffPoly::one(2));
        let t = Jet::potential_taylor_symbolic(1, 1);
        assert_eq!(t.diagonal_value(), poly("V", 1));
    }

    #[test]
    fn xm_vm_small_orders() {
        let one = Jet::constant(Symbolic::new(1), DiffPoly::one(1), 2);
        for route in [OperatorRoute::ClosedForm, OperatorRoute::Recurrence] {
            assert_eq!(one.apply_xm(0, route).unwrap(), one);
            assert_eq!(one.apply_vm(0, route).unwrap(), one);
            assert_eq!(one.apply_xm(1, route).unwrap().diagonal_value(), poly("-V", 1));
            assert_eq!(one.apply_vm(1, route).unwrap().diagonal_value(), poly("V", 1));
        }
        // X_2 = H0^2 - 2 H H0 + H^2, hand computed on 1 and z^2/2.
        let one4 = Jet::constant(Symbolic::new(1), DiffPoly::one(1), 4);
        let x2 = one4.apply_xm(2, OperatorRoute::ClosedForm).unwrap();
        assert_eq!(x2.diagonal_value(), poly("V^2 - D[2]V", 1));
        let half_z2 = z_power(&[2], 4).scaled(&rat(1, 2));
        let x2 = half_z2.apply_xm(2, OperatorRoute::ClosedForm).unwrap();
        assert!(x2.diagonal_value().is_zero());
    }

    #[test]
    fn pruned_diagonals_match_full_evaluation() {
        for n in 1..=2 {
            for k in 0..=2u32 {
                let m = k + 2;
                let f = Jet::distance_power_symbolic(k, n, 2 * m).unwrap();
                let full = f
                    .apply_word(&OperatorWord::h_then_h0(m as usize, 0, rat_int(1)))
                    .unwrap()
                    .diagonal_value();
                assert_eq!(f.diagonal_of_h_power(m).unwrap(), full);
                for mx in 0..=4 {
                    let g = Jet::distance_power_symbolic(k, n, (2 * k).max(2 * mx)).unwrap();
                    let full = g.apply_xm(mx, OperatorRoute::ClosedForm).unwrap().diagonal_value();
                    assert_eq!(g.diagonal_of_xm(mx).unwrap(), full, "n={n} k={k} m={mx}");
                }
            }
        }
    }


    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_jet(dim: usize, order: u32) -> impl Strategy<Value = Jet> {
            let index = proptest::collection::vec(0u32..2, dim).prop_map(|e| MultiIndex::new(&e));
            let term = (index.clone(), -5i64..=5, 1i64..=3, proptest::option::of(index));
            proptest::collection::vec(term, 1..4).prop_map(move |terms| {
                let terms = terms.into_iter().map(|(alpha, a, b, var)| {
                    let mut c = DiffPoly::constant(dim, rat(a, b));
                    if let Some(nu) = var {
                        c = &c * &DiffPoly::var(nu);
                    }
                    (alpha, c)
                });
                Jet::from_terms(dim, order, terms).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn closed_form_matches_recurrence(f in arb_jet(2, 8), m in 0u32..=3) {
                prop_assert_eq!(
                    f.apply_xm(m, OperatorRoute::ClosedForm).unwrap(),
                    f.apply_xm(m, OperatorRoute::Recurrence).unwrap()
                );
                prop_assert_eq!(
                    f.apply_vm(m, OperatorRoute::ClosedForm).unwrap(),
                    f.apply_vm(m, OperatorRoute::Recurrence).unwrap()
                );
            }

            #[test]
            fn truncation_coherence(f in arb_jet(2, 6), steps in 0usize..=2, extra in 1u32..=3) {
                // Working at a higher truncation and discarding afterwards
                // gives the same low-order terms.
                let high = Jet::from_terms(2, 6 + extra, f.terms().map(|(a, c)| (a.clone(), c.clone()))).unwrap();
                let w = OperatorWord::h_then_h0(steps, 1, rat_int(1));
                let low = f.apply_word(&w).unwrap();
                let high = high.apply_word(&w).unwrap().restricted(low.order());
                prop_assert_eq!(low, high);
            }

            #[test]
            fn pruned_diagonal_matches_full(f in arb_jet(2, 6), m in 0u32..=3) {
                let full = f.apply_xm(m, OperatorRoute::ClosedForm).unwrap().diagonal_value();
                prop_assert_eq!(f.diagonal_of_xm(m).unwrap(), full);
            }
        }
    }
}

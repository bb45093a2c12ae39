//! Differential polynomials: polynomials with rational coefficients in the
//! jet variables `D[nu]V`, the derivatives of the potential at the base point.
//!
//! Canonical text form, used for golden comparisons and CLI output:
//!
//! ```text
//! -1/6*V^3 + 1/12*D[1]V^2 + 1/6*D[2]V*V - 1/60*D[4]V
//! ```
//!
//! Terms are ordered by total derivative order, then by the factor list
//! (largest factor first, compared lexicographically). Inside a term the
//! factors are printed largest first and repeated factors become powers.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exact::factorial;

/// A multi-index `(nu_1, ..., nu_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(SmallVec<[u8; 4]>);

impl MultiIndex {
    pub fn new(entries: &[u32]) -> Self {
        MultiIndex(entries.iter().map(|&e| narrow(e)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, dim))
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.0[axis] = 1;
        m
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn get(&self, axis: usize) -> u32 {
        self.0[axis] as u32
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().map(|&e| e as u32)
    }

    pub fn entries(&self) -> Vec<u32> {
        self.0.iter().map(|&e| e as u32).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn incremented(&self, axis: usize) -> Self {
        let mut m = self.clone();
        m.0[axis] = narrow(m.0[axis] as u32 + 1);
        m
    }

    /// `self - 2 e_axis`, if nonnegative.
    pub fn lowered_twice(&self, axis: usize) -> Option<Self> {
        if self.0[axis] < 2 {
            return None;
        }
        let mut m = self.clone();
        m.0[axis] -= 2;
        Some(m)
    }

    pub fn doubled(&self) -> Self {
        MultiIndex(self.0.iter().map(|&e| narrow(2 * e as u32)).collect())
    }

    pub fn plus(&self, other: &MultiIndex) -> Self {
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| narrow(a as u32 + b as u32))
                .collect(),
        )
    }

    /// `nu! = prod nu_i!`
    pub fn factorial(&self) -> BigInt {
        self.0
            .iter()
            .fold(BigInt::one(), |acc, &e| acc * factorial(e as u32))
    }

    /// All multi-indices of dimension `dim` with `|nu| == order`, in
    /// lexicographic order.
    pub fn all_of_order(dim: usize, order: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; dim];
        fill_of_order(&mut cur, 0, order, &mut out);
        out.sort();
        out
    }

    /// All multi-indices with `|nu| <= max_order`, graded then lexicographic.
    pub fn all_up_to(dim: usize, max_order: u32) -> Vec<MultiIndex> {
        (0..=max_order)
            .flat_map(|o| Self::all_of_order(dim, o))
            .collect()
    }
}

fn narrow(e: u32) -> u8 {
    u8::try_from(e).expect("multi-index entry exceeds 255")
}

fn fill_of_order(cur: &mut Vec<u32>, axis: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(MultiIndex::new(&[]));
        }
        return;
    }
    if axis == cur.len() - 1 {
        cur[axis] = remaining;
        out.push(MultiIndex::new(cur));
        return;
    }
    for e in 0..=remaining {
        cur[axis] = e;
        fill_of_order(cur, axis + 1, remaining - e, out);
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "]")
    }
}

/// Product of jet variables, factors kept sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(SmallVec<[MultiIndex; 4]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn from_factors(mut factors: Vec<MultiIndex>) -> Self {
        factors.sort();
        Monomial(factors.into_iter().collect())
    }

    pub fn factors(&self) -> &[MultiIndex] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn derivative_order(&self) -> u32 {
        self.0.iter().map(MultiIndex::order).sum()
    }

    fn with_factor(&self, nu: &MultiIndex) -> Self {
        let mut out = self.0.clone();
        let pos = out.partition_point(|f| f <= nu);
        out.insert(pos, nu.clone());
        Monomial(out)
    }

    fn times(&self, other: &Monomial) -> Self {
        let mut out: SmallVec<[MultiIndex; 4]> = SmallVec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            if self.0[i] <= other.0[j] {
                out.push(self.0[i].clone());
                i += 1;
            } else {
                out.push(other.0[j].clone());
                j += 1;
            }
        }
        out.extend(self.0[i..].iter().cloned());
        out.extend(other.0[j..].iter().cloned());
        Monomial(out)
    }

    /// Factors largest first.
    fn descending(&self) -> impl Iterator<Item = &MultiIndex> {
        self.0.iter().rev()
    }

    /// Ordering used by the canonical printer.
    pub fn display_cmp(&self, other: &Monomial) -> Ordering {
        self.derivative_order()
            .cmp(&other.derivative_order())
            .then_with(|| self.descending().cmp(other.descending()))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let factors: Vec<&MultiIndex> = self.descending().collect();
        let mut i = 0;
        let mut first = true;
        while i < factors.len() {
            let mut run = 1;
            while i + run < factors.len() && factors[i + run] == factors[i] {
                run += 1;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if factors[i].is_zero() {
                write!(f, "V")?;
            } else {
                write!(f, "D{}V", factors[i])?;
            }
            if run > 1 {
                write!(f, "^{run}")?;
            }
            i += run;
        }
        Ok(())
    }
}

/// Exact polynomial in the jet variables of `V` over dimension `dim`.
#[derive(Clone, Debug)]
pub struct DiffPoly {
    dim: usize,
    terms: FxHashMap<Monomial, BigRational>,
}

impl PartialEq for DiffPoly {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.terms == other.terms
    }
}

impl Eq for DiffPoly {}

impl DiffPoly {
    pub fn zero(dim: usize) -> Self {
        DiffPoly {
            dim,
            terms: FxHashMap::default(),
        }
    }

    pub fn constant(dim: usize, c: BigRational) -> Self {
        let mut p = Self::zero(dim);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, BigRational::one())
    }

    /// The jet variable `D[nu]V`.
    pub fn var(nu: MultiIndex) -> Self {
        let dim = nu.dim();
        let mut p = Self::zero(dim);
        p.terms
            .insert(Monomial::from_factors(vec![nu]), BigRational::one());
        p
    }

    /// The potential itself, `V`.
    pub fn potential(dim: usize) -> Self {
        Self::var(MultiIndex::zeros(dim))
    }

    /// Builds a polynomial from raw terms, normalizing factor order and
    /// merging duplicates.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<MultiIndex>, BigRational)>,
    {
        let mut p = Self::zero(dim);
        for (factors, c) in terms {
            if let Some(bad) = factors.iter().find(|f| f.dim() != dim) {
                return Err(Error::DimensionMismatch(dim, bad.dim()));
            }
            p.add_term(Monomial::from_factors(factors), c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Terms in canonical display order.
    pub fn sorted_terms(&self) -> Vec<(&Monomial, &BigRational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| a.0.display_cmp(b.0));
        v
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    fn check_dim(&self, other: &DiffPoly) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &DiffPoly) -> Result<DiffPoly> {
        self.check_dim(other)?;
        let mut out = self.clone();
        out.add_scaled(other, &BigRational::one());
        Ok(out)
    }

    pub fn checked_mul(&self, other: &DiffPoly) -> Result<DiffPoly> {
        self.check_dim(other)?;
        let mut out = DiffPoly::zero(self.dim);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.times(mb), ca * cb);
            }
        }
        Ok(out)
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &DiffPoly, scale: &BigRational) {
        debug_assert_eq!(self.dim, other.dim);
        if scale.is_zero() {
            return;
        }
        let unit = scale.is_one();
        for (m, c) in &other.terms {
            let c = if unit { c.clone() } else { c * scale };
            self.add_term(m.clone(), c);
        }
    }

    /// `self += scale * D[nu]V * other`.
    pub fn add_scaled_times_var(&mut self, other: &DiffPoly, nu: &MultiIndex, scale: &BigRational) {
        debug_assert_eq!(self.dim, other.dim);
        for (m, c) in &other.terms {
            self.add_term(m.with_factor(nu), c * scale);
        }
    }

    pub fn scaled(&self, scale: &BigRational) -> DiffPoly {
        let mut out = DiffPoly::zero(self.dim);
        out.add_scaled(self, scale);
        out
    }

    /// Total derivative `d/dx_axis`, acting on jet variables by
    /// `D[nu]V -> D[nu + e_axis]V` and extended by Leibniz' rule.
    pub fn derive(&self, axis: usize) -> DiffPoly {
        assert!(axis < self.dim, "axis {axis} out of range for dimension {}", self.dim);
        let mut out = DiffPoly::zero(self.dim);
        for (m, c) in &self.terms {
            let factors = m.factors();
            for i in 0..factors.len() {
                // Skip repeated factors: they are handled by the multiplicity.
                if i > 0 && factors[i] == factors[i - 1] {
                    continue;
                }
                let mult = factors.iter().filter(|f| **f == factors[i]).count();
                let mut rest: Vec<MultiIndex> = factors.to_vec();
                rest.remove(i);
                rest.push(factors[i].incremented(axis));
                out.add_term(
                    Monomial::from_factors(rest),
                    c * BigRational::from_integer(BigInt::from(mult)),
                );
            }
        }
        out
    }

    /// Re-canonicalizes by rebuilding from the stored terms.
    pub fn normalized(&self) -> DiffPoly {
        let raw = self
            .terms
            .iter()
            .map(|(m, c)| (m.factors().to_vec(), c.clone()));
        DiffPoly::from_terms(self.dim, raw).expect("dimension is consistent")
    }

    /// Numeric value with `lookup(nu)` supplying `D[nu]V`.
    pub fn evaluate_with<F>(&self, mut lookup: F) -> f64
    where
        F: FnMut(&MultiIndex) -> f64,
    {
        let mut sum = 0.0;
        for (m, c) in self.sorted_terms() {
            let mut term = crate::exact::ratio_to_f64(c);
            for f in m.factors() {
                term *= lookup(f);
            }
            sum += term;
        }
        sum
    }

    /// Largest derivative order over all factors.
    pub fn max_factor_order(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter().map(MultiIndex::order))
            .max()
            .unwrap_or(0)
    }

    /// Parses the canonical text form. Accepts any term order and whitespace.
    pub fn parse(text: &str, dim: usize) -> Result<DiffPoly> {
        TextParser::new(text, dim).parse()
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.sorted_terms().into_iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if m.degree() == 0 {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

impl Add for &DiffPoly {
    type Output = DiffPoly;
    fn add(self, rhs: &DiffPoly) -> DiffPoly {
        self.checked_add(rhs).expect("DiffPoly dimension mismatch")
    }
}

impl Sub for &DiffPoly {
    type Output = DiffPoly;
    fn sub(self, rhs: &DiffPoly) -> DiffPoly {
        assert_eq!(self.dim, rhs.dim, "DiffPoly dimension mismatch");
        let mut out = self.clone();
        out.add_scaled(rhs, &-BigRational::one());
        out
    }
}

impl Mul for &DiffPoly {
    type Output = DiffPoly;
    fn mul(self, rhs: &DiffPoly) -> DiffPoly {
        self.checked_mul(rhs).expect("DiffPoly dimension mismatch")
    }
}

impl Neg for &DiffPoly {
    type Output = DiffPoly;
    fn neg(self) -> DiffPoly {
        self.scaled(&-BigRational::one())
    }
}

struct TextParser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> TextParser<'a> {
    fn new(text: &'a str, dim: usize) -> Self {
        TextParser {
            src: text.as_bytes(),
            pos: 0,
            dim,
        }
    }

    fn err<T>(&self, message: &str) -> Result<T> {
        Err(Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer");
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(s.parse().expect("digits parse"))
    }

    fn parse(mut self) -> Result<DiffPoly> {
        let mut out = DiffPoly::zero(self.dim);
        let mut first = true;
        loop {
            let sign = if self.eat(b'-') {
                -1
            } else if self.eat(b'+') || first {
                1
            } else {
                return self.err("expected `+` or `-` between terms");
            };
            first = false;
            let (m, c) = self.term()?;
            out.add_term(m, c * BigRational::from_integer(BigInt::from(sign)));
            if self.peek().is_none() {
                break;
            }
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(Monomial, BigRational)> {
        let mut coeff = BigRational::one();
        let mut factors = Vec::new();
        if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            let num = self.integer()?;
            let den = if self.eat(b'/') { self.integer()? } else { BigInt::one() };
            if den.is_zero() {
                return self.err("zero denominator");
            }
            coeff = BigRational::new(num, den);
            if !self.eat(b'*') {
                return Ok((Monomial::one(), coeff));
            }
        }
        loop {
            let nu = self.factor()?;
            let power = if self.eat(b'^') {
                let p = self.integer()?;
                usize::try_from(p).map_err(|_| Error::Syntax {
                    offset: self.pos,
                    message: "power too large".into(),
                })?
            } else {
                1
            };
            for _ in 0..power {
                factors.push(nu.clone());
            }
            if !self.eat(b'*') {
                break;
            }
        }
        Ok((Monomial::from_factors(factors), coeff))
    }

    fn factor(&mut self) -> Result<MultiIndex> {
        if self.eat(b'V') {
            return Ok(MultiIndex::zeros(self.dim));
        }
        if !self.eat(b'D') || !self.eat(b'[') {
            return self.err("expected `V` or `D[..]V`");
        }
        let mut entries = Vec::new();
        loop {
            let e = self.integer()?;
            entries.push(u32::try_from(e).map_err(|_| Error::Syntax {
                offset: self.pos,
                message: "index entry too large".into(),
            })?);
            if !self.eat(b',') {
                break;
            }
        }
        if !self.eat(b']') || !self.eat(b'V') {
            return self.err("expected `]V`");
        }
        if entries.len() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, entries.len()));
        }
        Ok(MultiIndex::new(&entries))
    }
}

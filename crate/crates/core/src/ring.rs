//! Coefficient rings for jets.
//!
//! [`Symbolic`] keeps coefficients as exact [`DiffPoly`] values. [`Specialized`]
//! is the ring homomorphism that substitutes pseudo-random residues modulo
//! the Mersenne prime `2^61 - 1` for every jet variable; two polynomials of
//! low degree that agree under several independent specializations are equal
//! with overwhelming probability, which lets route comparisons run at orders
//! where the symbolic expressions are too large to expand.

use std::fmt::Debug;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::diffpoly::{DiffPoly, MultiIndex};

pub trait CoeffRing: Clone + Send + Sync + Debug {
    type Elem: Clone + Send + Sync + PartialEq + Debug;
    type Scalar: Clone + Send + Sync + Debug;

    fn dim(&self) -> usize;
    fn zero(&self) -> Self::Elem;
    fn is_zero(&self, e: &Self::Elem) -> bool;
    fn scalar(&self, q: &BigRational) -> Self::Scalar;
    fn constant(&self, s: &Self::Scalar) -> Self::Elem;
    /// `acc += s * e`
    fn add_scaled(&self, acc: &mut Self::Elem, e: &Self::Elem, s: &Self::Scalar);
    /// `acc += s * D[nu]V * e`
    fn add_scaled_times_var(
        &self,
        acc: &mut Self::Elem,
        e: &Self::Elem,
        nu: &MultiIndex,
        s: &Self::Scalar,
    );

    fn scalar_int(&self, v: i64) -> Self::Scalar {
        self.scalar(&BigRational::from_integer(BigInt::from(v)))
    }

    fn one(&self) -> Self::Elem {
        self.constant(&self.scalar_int(1))
    }

    fn scaled(&self, e: &Self::Elem, s: &Self::Scalar) -> Self::Elem {
        let mut out = self.zero();
        self.add_scaled(&mut out, e, s);
        out
    }

    /// Size proxy used for diagnostics.
    fn weight(&self, e: &Self::Elem) -> usize;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Symbolic {
    dim: usize,
}

impl Symbolic {
    pub fn new(dim: usize) -> Self {
        Symbolic { dim }
    }
}

impl CoeffRing for Symbolic {
    type Elem = DiffPoly;
    type Scalar = BigRational;

    fn dim(&self) -> usize {
        self.dim
    }

    fn zero(&self) -> DiffPoly {
        DiffPoly::zero(self.dim)
    }

    fn is_zero(&self, e: &DiffPoly) -> bool {
        e.is_zero()
    }

    fn scalar(&self, q: &BigRational) -> BigRational {
        q.clone()
    }

    fn constant(&self, s: &BigRational) -> DiffPoly {
        DiffPoly::constant(self.dim, s.clone())
    }

    fn add_scaled(&self, acc: &mut DiffPoly, e: &DiffPoly, s: &BigRational) {
        acc.add_scaled(e, s);
    }

    fn add_scaled_times_var(&self, acc: &mut DiffPoly, e: &DiffPoly, nu: &MultiIndex, s: &BigRational) {
        acc.add_scaled_times_var(e, nu, s);
    }

    fn weight(&self, e: &DiffPoly) -> usize {
        e.len()
    }
}

pub const MERSENNE_61: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    let prod = a as u128 * b as u128;
    let lo = (prod as u64) & MERSENNE_61;
    let hi = (prod >> 61) as u64;
    let s = lo + hi;
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

fn add_mod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Jet variables replaced by residues modulo `2^61 - 1`, chosen by hashing
/// `(seed, nu)`.
#[derive(Clone, Debug)]
pub struct Specialized {
    dim: usize,
    seed: u64,
}

impl Specialized {
    pub fn new(dim: usize, seed: u64) -> Self {
        Specialized { dim, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Residue substituted for `D[nu]V`.
    pub fn value_of(&self, nu: &MultiIndex) -> u64 {
        let mut h = splitmix(self.seed ^ 0x5EED);
        for e in nu.iter() {
            h = splitmix(h ^ e as u64);
        }
        h % MERSENNE_61
    }

    pub fn reduce(&self, q: &BigRational) -> u64 {
        let p = BigInt::from(MERSENNE_61);
        let to_res = |x: &BigInt| -> u64 {
            let r = ((x % &p) + &p) % &p;
            r.to_u64().expect("residue fits in u64")
        };
        let num = to_res(q.numer());
        let den = to_res(q.denom());
        assert!(den != 0, "denominator divisible by the specialization prime");
        mul_mod(num, pow_mod(den, MERSENNE_61 - 2))
    }

    /// Image of a symbolic polynomial under this specialization.
    pub fn specialize(&self, p: &DiffPoly) -> u64 {
        let mut acc = 0u64;
        for (m, c) in p.terms() {
            let mut term = self.reduce(c);
            for f in m.factors() {
                term = mul_mod(term, self.value_of(f));
            }
            acc = add_mod(acc, term);
        }
        acc
    }
}

impl CoeffRing for Specialized {
    type Elem = u64;
    type Scalar = u64;

    fn dim(&self) -> usize {
        self.dim
    }

    fn zero(&self) -> u64 {
        0
    }

    fn is_zero(&self, e: &u64) -> bool {
        *e == 0
    }

    fn scalar(&self, q: &BigRational) -> u64 {
        if q.is_one() {
            return 1;
        }
        if q.denom().is_one() {
            if let Some(v) = q.numer().abs().to_u64() {
                let r = v % MERSENNE_61;
                return if q.is_negative() && r != 0 { MERSENNE_61 - r } else { r };
            }
        }
        self.reduce(q)
    }

    fn constant(&self, s: &u64) -> u64 {
        *s
    }

    fn add_scaled(&self, acc: &mut u64, e: &u64, s: &u64) {
        *acc = add_mod(*acc, mul_mod(*e, *s));
    }

    fn add_scaled_times_var(&self, acc: &mut u64, e: &u64, nu: &MultiIndex, s: &u64) {
        let v = mul_mod(self.value_of(nu), *s);
        *acc = add_mod(*acc, mul_mod(*e, v));
    }

    fn weight(&self, _e: &u64) -> usize {
        1
    }
}

//! Exact rational combinatorics: factorials, integer and half-integer
//! binomials, and Gamma at half-integers as `q * pi^(p/2)`.

use std::fmt;
use std::ops::{Div, Mul, Neg};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Ordinary binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `C(upper + n/2, k + n/2)` for integers `0 <= k <= upper`, i.e.
/// `prod_{i=k+1}^{upper} (i + n/2) / (upper - k)!`.
pub fn shifted_half_binomial(upper: u32, k: u32, n: u32) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::Domain(format!("dimension must be positive, got {n}")));
    }
    if k > upper {
        return Err(Error::Domain(format!(
            "binomial lower slot {k} exceeds upper slot {upper}"
        )));
    }
    let half_n = rat(n as i64, 2);
    let mut acc = BigRational::one();
    for i in (k + 1)..=upper {
        acc *= rat_int(i as i64) + &half_n;
    }
    Ok(acc / BigRational::from_integer(factorial(upper - k)))
}

/// The coefficient `C(j - 1 + n/2, k + n/2)` used by the heat invariant
/// formula, valid for `0 <= k <= j - 1`.
pub fn half_integer_binomial(j: u32, k: u32, n: u32) -> Result<BigRational> {
    if j == 0 {
        return Err(Error::Domain("order j must be positive".into()));
    }
    shifted_half_binomial(j - 1, k, n)
}

/// Exact number `coeff * pi^(sqrt_pi_power / 2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HalfIntScalar {
    coeff: BigRational,
    sqrt_pi_power: i32,
}

impl HalfIntScalar {
    pub fn new(coeff: BigRational, sqrt_pi_power: i32) -> Self {
        let sqrt_pi_power = if coeff.is_zero() { 0 } else { sqrt_pi_power };
        Self {
            coeff,
            sqrt_pi_power,
        }
    }

    pub fn rational(coeff: BigRational) -> Self {
        Self::new(coeff, 0)
    }

    pub fn coeff(&self) -> &BigRational {
        &self.coeff
    }

    pub fn sqrt_pi_power(&self) -> i32 {
        self.sqrt_pi_power
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    /// `(4 pi)^(-n/2) = 2^(-n) * pi^(-n/2)`.
    pub fn four_pi_power_neg_half(n: u32) -> Self {
        let two_n = BigInt::one() << n as usize;
        Self::new(BigRational::new(BigInt::one(), two_n), -(n as i32))
    }

    pub fn recip(&self) -> Result<Self> {
        if self.coeff.is_zero() {
            return Err(Error::Domain("reciprocal of zero".into()));
        }
        Ok(Self::new(self.coeff.recip(), -self.sqrt_pi_power))
    }

    pub fn to_f64(&self) -> f64 {
        let c = ratio_to_f64(&self.coeff);
        c * std::f64::consts::PI.powf(self.sqrt_pi_power as f64 / 2.0)
    }
}

impl Mul for &HalfIntScalar {
    type Output = HalfIntScalar;
    fn mul(self, rhs: &HalfIntScalar) -> HalfIntScalar {
        HalfIntScalar::new(
            &self.coeff * &rhs.coeff,
            self.sqrt_pi_power + rhs.sqrt_pi_power,
        )
    }
}

impl Mul for HalfIntScalar {
    type Output = HalfIntScalar;
    fn mul(self, rhs: HalfIntScalar) -> HalfIntScalar {
        &self * &rhs
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for &HalfIntScalar {
    type Output = Result<HalfIntScalar>;
    fn div(self, rhs: &HalfIntScalar) -> Result<HalfIntScalar> {
        Ok(self * &rhs.recip()?)
    }
}

impl Neg for HalfIntScalar {
    type Output = HalfIntScalar;
    fn neg(self) -> HalfIntScalar {
        HalfIntScalar::new(-self.coeff, self.sqrt_pi_power)
    }
}

impl fmt::Display for HalfIntScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sqrt_pi_power {
            0 => write!(f, "{}", self.coeff),
            p => write!(f, "{}*pi^({}/2)", self.coeff, p),
        }
    }
}

/// Result of Gamma at a half-integer or integer argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GammaValue {
    Finite(HalfIntScalar),
    /// Nonpositive integer argument.
    Pole,
}

impl GammaValue {
    pub fn finite(&self) -> Option<&HalfIntScalar> {
        match self {
            GammaValue::Finite(v) => Some(v),
            GammaValue::Pole => None,
        }
    }
}

/// Exact `Gamma(two_z / 2)`.
pub fn gamma_half_integer(two_z: i64) -> GammaValue {
    if two_z % 2 == 0 {
        if two_z <= 0 {
            return GammaValue::Pole;
        }
        let z = (two_z / 2) as u32;
        return GammaValue::Finite(HalfIntScalar::rational(BigRational::from_integer(
            factorial(z - 1),
        )));
    }
    // Start from Gamma(1/2) = sqrt(pi) and walk with Gamma(z+1) = z Gamma(z).
    let mut coeff = BigRational::one();
    let mut cur = 1i64; // doubled argument of the current value
    while cur < two_z {
        coeff *= rat(cur, 2);
        cur += 2;
    }
    while cur > two_z {
        // Gamma(z - 1) = Gamma(z) / (z - 1)
        coeff /= rat(cur - 2, 2);
        cur -= 2;
    }
    GammaValue::Finite(HalfIntScalar::new(coeff, 1))
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Huge numerator and denominator: shift both down before dividing.
    let bits_n = r.numer().bits() as i64;
    let bits_d = r.denom().bits() as i64;
    let shift_n = (bits_n - 900).max(0) as usize;
    let shift_d = (bits_d - 900).max(0) as usize;
    let n = (r.numer().abs() >> shift_n).to_f64().unwrap_or(f64::INFINITY);
    let d = (r.denom() >> shift_d).to_f64().unwrap_or(f64::INFINITY);
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    sign * n / d * 2f64.powi((shift_n as i64 - shift_d as i64) as i32)
}

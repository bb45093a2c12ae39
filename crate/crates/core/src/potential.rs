//! Concrete potentials: a small expression language with symbolic
//! differentiation and floating-point evaluation.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' int)?
//! int    := '-'? digits | '(' '-'? digits ')'
//! atom   := number | 'pi' | 'x1' .. 'xn' | func '(' args ')' | '(' expr ')'
//! func   := exp | sin | cos | tanh | sqrt | powr(base, p, q)
//! ```
//!
//! Only integer exponents are accepted by `^`; rational powers go through
//! `powr(base, p, q) = base^(p/q)`, which requires a positive base.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::diffpoly::MultiIndex;
use crate::error::{Error, Result};
use crate::exact::ratio_to_f64;

pub const DEFAULT_DERIVATIVE_CAP: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Tanh,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(BigRational),
    Pi,
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i64),
    Call(Func, Arc<Expr>),
    /// `base^(p/q)` with `q > 0` and the fraction in lowest terms.
    Powr(Arc<Expr>, BigRational),
}

fn int(v: i64) -> Expr {
    Expr::Const(BigRational::from_integer(BigInt::from(v)))
}

fn as_const(e: &Expr) -> Option<&BigRational> {
    match e {
        Expr::Const(c) => Some(c),
        _ => None,
    }
}

fn is_const(e: &Expr, v: i64) -> bool {
    as_const(e).is_some_and(|c| *c == BigRational::from_integer(BigInt::from(v)))
}

// Smart constructors with constant folding and identity elimination.

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => (*inner).clone(),
        other => Expr::Neg(Arc::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x.is_zero() => b,
        (_, Some(y)) if y.is_zero() => a,
        _ => match b {
            Expr::Neg(inner) => Expr::Sub(Arc::new(a), inner),
            b => Expr::Add(Arc::new(a), Arc::new(b)),
        },
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x.is_zero() => neg(b),
        (_, Some(y)) if y.is_zero() => a,
        _ => Expr::Sub(Arc::new(a), Arc::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) if x.is_zero() => int(0),
        (_, Some(y)) if y.is_zero() => int(0),
        (Some(x), _) if x.is_one() => b,
        (_, Some(y)) if y.is_one() => a,
        (Some(x), _) if *x == -BigRational::one() => neg(b),
        (_, Some(y)) if *y == -BigRational::one() => neg(a),
        // Keep constants on the left.
        (None, Some(_)) => Expr::Mul(Arc::new(b), Arc::new(a)),
        _ => Expr::Mul(Arc::new(a), Arc::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if !y.is_zero() => Expr::Const(x / y),
        (Some(x), _) if x.is_zero() => int(0),
        (_, Some(y)) if y.is_one() => a,
        _ => Expr::Div(Arc::new(a), Arc::new(b)),
    }
}

fn pow(a: Expr, k: i64) -> Expr {
    match (k, &a) {
        (0, _) => int(1),
        (1, _) => a,
        (_, Expr::Const(c)) if !(c.is_zero() && k < 0) => {
            Expr::Const(num_traits::pow::Pow::pow(c, k as i32))
        }
        _ => Expr::Pow(Arc::new(a), k),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    if let Some(c) = as_const(&a) {
        if c.is_zero() {
            match f {
                Func::Exp | Func::Cos => return int(1),
                Func::Sin | Func::Tanh | Func::Sqrt => return int(0),
            }
        }
    }
    Expr::Call(f, Arc::new(a))
}

fn powr(a: Expr, r: BigRational) -> Expr {
    if r.is_zero() {
        return int(1);
    }
    if r.is_integer() {
        if let Some(k) = r.to_integer().to_i64() {
            return pow(a, k);
        }
    }
    Expr::Powr(Arc::new(a), r)
}

impl Expr {
    /// Partial derivative in coordinate `axis`.
    pub fn derive(&self, axis: usize) -> Expr {
        match self {
            Expr::Const(_) | Expr::Pi => int(0),
            Expr::Var(i) => int(if *i == axis { 1 } else { 0 }),
            Expr::Neg(a) => neg(a.derive(axis)),
            Expr::Add(a, b) => add(a.derive(axis), b.derive(axis)),
            Expr::Sub(a, b) => sub(a.derive(axis), b.derive(axis)),
            Expr::Mul(a, b) => add(
                mul(a.derive(axis), (**b).clone()),
                mul((**a).clone(), b.derive(axis)),
            ),
            Expr::Div(a, b) => {
                let num = sub(
                    mul(a.derive(axis), (**b).clone()),
                    mul((**a).clone(), b.derive(axis)),
                );
                div(num, pow((**b).clone(), 2))
            }
            Expr::Pow(a, k) => mul(
                mul(int(*k), pow((**a).clone(), k - 1)),
                a.derive(axis),
            ),
            Expr::Call(f, a) => {
                let inner = a.derive(axis);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Tanh => sub(int(1), pow(self.clone(), 2)),
                    Func::Sqrt => div(int(1), mul(int(2), self.clone())),
                };
                mul(outer, inner)
            }
            Expr::Powr(a, r) => {
                let lowered = powr((**a).clone(), r - BigRational::one());
                mul(mul(Expr::Const(r.clone()), lowered), a.derive(axis))
            }
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => ratio_to_f64(c),
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.evaluate(x)?,
            Expr::Add(a, b) => a.evaluate(x)? + b.evaluate(x)?,
            Expr::Sub(a, b) => a.evaluate(x)? - b.evaluate(x)?,
            Expr::Mul(a, b) => a.evaluate(x)? * b.evaluate(x)?,
            Expr::Div(a, b) => {
                let d = b.evaluate(x)?;
                if d == 0.0 {
                    return Err(Error::Evaluation("division by zero".into()));
                }
                a.evaluate(x)? / d
            }
            Expr::Pow(a, k) => {
                let base = a.evaluate(x)?;
                if base == 0.0 && *k < 0 {
                    return Err(Error::Evaluation("division by zero".into()));
                }
                base.powi(*k as i32)
            }
            Expr::Call(f, a) => {
                let u = a.evaluate(x)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Tanh => u.tanh(),
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(Error::Evaluation(format!("sqrt of negative value {u}")));
                        }
                        u.sqrt()
                    }
                }
            }
            Expr::Powr(a, r) => {
                let base = a.evaluate(x)?;
                if base <= 0.0 {
                    return Err(Error::Evaluation(format!(
                        "powr needs a positive base, got {base}"
                    )));
                }
                base.powf(ratio_to_f64(r))
            }
        };
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("non-finite value {v}")));
        }
        Ok(v)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_negative() => 3,
            Expr::Const(c) if !c.is_integer() => 2,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    /// Number of nodes, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Pi | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) | Expr::Powr(a, _) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 4)
            }
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 4)
            }
            Expr::Pow(a, k) => {
                write_child(f, a, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Powr(a, r) => write!(f, "powr({a}, {}, {})", r.numer(), r.denom()),
        }
    }
}

/// A parsed potential `V(x1, ..., xn)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialExpr {
    dim: usize,
    root: Arc<Expr>,
}

impl PotentialExpr {
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let mut p = Parser {
            src: src.as_bytes(),
            text: src,
            pos: 0,
            dim,
        };
        p.skip_ws();
        if p.pos == p.src.len() {
            return Err(Error::Syntax {
                offset: 0,
                message: "empty expression".into(),
            });
        }
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(PotentialExpr {
            dim,
            root: Arc::new(root),
        })
    }

    pub fn from_expr(expr: Expr, dim: usize) -> Self {
        PotentialExpr {
            dim,
            root: Arc::new(expr),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expr {
        &self.root
    }

    pub fn differentiate(&self, nu: &MultiIndex) -> Result<PotentialExpr> {
        self.differentiate_capped(nu, DEFAULT_DERIVATIVE_CAP)
    }

    pub fn differentiate_capped(&self, nu: &MultiIndex, cap: u32) -> Result<PotentialExpr> {
        if nu.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, nu.dim()));
        }
        if nu.order() > cap {
            return Err(Error::DerivativeCap {
                order: nu.order() as usize,
                cap: cap as usize,
            });
        }
        let mut e = (*self.root).clone();
        for (axis, count) in nu.iter().enumerate() {
            for _ in 0..count {
                e = e.derive(axis);
            }
        }
        Ok(PotentialExpr::from_expr(e, self.dim))
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, point.len()));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation("non-finite evaluation point".into()));
        }
        self.root.evaluate(point)
    }

    /// Whether the expression is the constant zero after folding.
    pub fn is_zero(&self) -> bool {
        is_const(&self.root, 0)
    }
}

impl fmt::Display for PotentialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = add(lhs, self.term()?);
            } else if self.eat(b'-') {
                lhs = sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = mul(lhs, self.unary()?);
            } else if self.eat(b'/') {
                lhs = div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(neg(self.unary()?))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let start = self.pos;
        let k = self.exponent().map_err(|_| Error::Syntax {
            offset: start,
            message: "exponent must be an integer; use powr(base, p, q) for rational powers"
                .into(),
        })?;
        if self.peek() == Some(b'^') {
            return Err(self.error("chained exponents need parentheses"));
        }
        Ok(pow(base, k))
    }

    fn exponent(&mut self) -> Result<i64> {
        if self.eat(b'(') {
            let k = self.signed_integer()?;
            self.expect(b')')?;
            Ok(k)
        } else {
            self.signed_integer()
        }
    }

    fn signed_integer(&mut self) -> Result<i64> {
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer"));
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            return Err(self.error("expected an integer"));
        }
        let v: i64 = self.text[start..self.pos]
            .parse()
            .map_err(|_| self.error("integer out of range"))?;
        Ok(if negative { -v } else { v })
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = &self.text[start..self.pos];
        let mut frac_part = "";
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fs = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            frac_part = &self.text[fs..self.pos];
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        let digits = format!("{int_part}{frac_part}");
        let num: BigInt = digits.parse().expect("digits only");
        let den = num_traits::pow::pow(BigInt::from(10), frac_part.len());
        Ok(Expr::Const(BigRational::new(num, den)))
    }

    fn identifier(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn atom(&mut self) -> Result<Expr> {
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(self.error("unexpected end of input")),
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if !c.is_ascii_alphabetic() {
            return Err(self.error(&format!("unexpected character `{}`", c as char)));
        }
        let start = self.pos;
        let name = self.identifier().to_string();
        let func = match name.as_str() {
            "pi" => return Ok(Expr::Pi),
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "tanh" => Some(Func::Tanh),
            "sqrt" => Some(Func::Sqrt),
            "powr" => None,
            _ => {
                if let Some(index) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                    if index == 0 || index > self.dim {
                        return Err(Error::VariableOutOfRange {
                            index,
                            dim: self.dim,
                        });
                    }
                    return Ok(Expr::Var(index - 1));
                }
                let _ = start;
                return Err(Error::UnknownIdentifier(name));
            }
        };
        self.expect(b'(')?;
        let arg = self.expr()?;
        let out = match func {
            Some(f) => call(f, arg),
            None => {
                self.expect(b',')?;
                let p = self.signed_integer()?;
                self.expect(b',')?;
                let q = self.signed_integer()?;
                if q <= 0 {
                    return Err(self.error("powr denominator must be positive"));
                }
                powr(arg, BigRational::new(BigInt::from(p), BigInt::from(q)))
            }
        };
        self.expect(b')')?;
        Ok(out)
    }
}

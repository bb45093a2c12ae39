//! Truncated multivariate Taylor arithmetic in `f64`, used to obtain all
//! partial derivatives of a potential at a point in one pass.

use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::diffpoly::MultiIndex;
use crate::error::{Error, Result};
use crate::exact::ratio_to_f64;
use crate::potential::{Expr, Func, PotentialExpr};

/// Monomial enumeration and product table for a given `(dim, order)`.
#[derive(Debug)]
pub struct Layout {
    dim: usize,
    order: u32,
    indices: Vec<MultiIndex>,
    position: FxHashMap<MultiIndex, usize>,
    /// `(i, j, k)` with `e_i * e_j = e_k` and total degree within `order`.
    products: Vec<(u32, u32, u32)>,
    factorials: Vec<f64>,
}

impl Layout {
    pub fn new(dim: usize, order: u32) -> Arc<Layout> {
        let indices = MultiIndex::all_up_to(dim, order);
        let position: FxHashMap<MultiIndex, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if a.order() + b.order() <= order {
                    let k = position[&a.plus(b)];
                    products.push((i as u32, j as u32, k as u32));
                }
            }
        }
        let factorials = indices
            .iter()
            .map(|m| m.iter().map(|e| (1..=e).map(f64::from).product::<f64>()).product())
            .collect();
        Arc::new(Layout {
            dim,
            order,
            indices,
            position,
            products,
            factorials,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Taylor {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl Taylor {
    fn constant(layout: &Arc<Layout>, c: f64) -> Self {
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = c;
        Taylor {
            layout: layout.clone(),
            coeffs,
        }
    }

    fn variable(layout: &Arc<Layout>, axis: usize, at: f64) -> Self {
        let mut t = Self::constant(layout, at);
        if layout.order >= 1 {
            let k = layout.position[&MultiIndex::unit(layout.dim, axis)];
            t.coeffs[k] = 1.0;
        }
        t
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `d^nu f` at the expansion point.
    pub fn derivative(&self, nu: &MultiIndex) -> Option<f64> {
        let k = *self.layout.position.get(nu)?;
        Some(self.coeffs[k] * self.layout.factorials[k])
    }

    fn zip(&self, other: &Taylor, f: impl Fn(f64, f64) -> f64) -> Taylor {
        Taylor {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    fn scale(&self, s: f64) -> Taylor {
        Taylor {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }

    fn mul(&self, other: &Taylor) -> Taylor {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.layout.products {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Taylor {
            layout: self.layout.clone(),
            coeffs,
        }
    }

    /// `sum_k c_k h^k` where `h = self - value`.
    fn compose(&self, series: &[f64]) -> Taylor {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = Taylor::constant(&self.layout, *series.last().unwrap_or(&0.0));
        for c in series.iter().rev().skip(1) {
            acc = acc.mul(&h);
            acc.coeffs[0] += c;
        }
        acc
    }

    fn recip(&self) -> Result<Taylor> {
        let a = self.value();
        if a == 0.0 {
            return Err(Error::Evaluation("division by zero".into()));
        }
        let k = self.layout.order as usize;
        let series: Vec<f64> = (0..=k)
            .map(|i| (if i % 2 == 0 { 1.0 } else { -1.0 }) / a.powi(i as i32 + 1))
            .collect();
        Ok(self.compose(&series))
    }

    /// `(a + h)^r = a^r sum_k C(r, k) (h/a)^k` for `a > 0`.
    fn real_power(&self, r: f64) -> Taylor {
        let a = self.value();
        let k = self.layout.order as usize;
        let mut series = Vec::with_capacity(k + 1);
        let mut binom = 1.0;
        for i in 0..=k {
            series.push(binom * a.powf(r - i as f64));
            binom *= (r - i as f64) / (i as f64 + 1.0);
        }
        self.compose(&series)
    }

    fn int_power(&self, k: i64) -> Result<Taylor> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Taylor::constant(&self.layout, 1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(acc)
    }

    fn func(&self, f: Func) -> Result<Taylor> {
        let a = self.value();
        let k = self.layout.order as usize;
        let mut fact = 1.0;
        let mut series = Vec::with_capacity(k + 1);
        match f {
            Func::Exp => {
                for i in 0..=k {
                    if i > 0 {
                        fact *= i as f64;
                    }
                    series.push(a.exp() / fact);
                }
            }
            Func::Sin | Func::Cos => {
                let cycle = [a.sin(), a.cos(), -a.sin(), -a.cos()];
                let shift = if f == Func::Sin { 0 } else { 1 };
                for i in 0..=k {
                    if i > 0 {
                        fact *= i as f64;
                    }
                    series.push(cycle[(i + shift) % 4] / fact);
                }
            }
            Func::Tanh => {
                // tanh u = 1 - 2 / (exp(2u) + 1)
                let e = self.scale(2.0).func(Func::Exp)?;
                let mut denom = e;
                denom.coeffs[0] += 1.0;
                let r = denom.recip()?.scale(-2.0);
                let mut out = r;
                out.coeffs[0] += 1.0;
                return Ok(out);
            }
            Func::Sqrt => {
                if a < 0.0 {
                    return Err(Error::Evaluation(format!("sqrt of negative value {a}")));
                }
                if a == 0.0 && k > 0 {
                    return Err(Error::Evaluation("sqrt is not differentiable at 0".into()));
                }
                return Ok(self.real_power(0.5));
            }
        }
        Ok(self.compose(&series))
    }
}

fn eval(e: &Expr, layout: &Arc<Layout>, x: &[f64]) -> Result<Taylor> {
    let out = match e {
        Expr::Const(c) => Taylor::constant(layout, ratio_to_f64(c)),
        Expr::Pi => Taylor::constant(layout, std::f64::consts::PI),
        Expr::Var(i) => Taylor::variable(layout, *i, x[*i]),
        Expr::Neg(a) => eval(a, layout, x)?.scale(-1.0),
        Expr::Add(a, b) => eval(a, layout, x)?.zip(&eval(b, layout, x)?, |p, q| p + q),
        Expr::Sub(a, b) => eval(a, layout, x)?.zip(&eval(b, layout, x)?, |p, q| p - q),
        Expr::Mul(a, b) => eval(a, layout, x)?.mul(&eval(b, layout, x)?),
        Expr::Div(a, b) => eval(a, layout, x)?.mul(&eval(b, layout, x)?.recip()?),
        Expr::Pow(a, k) => eval(a, layout, x)?.int_power(*k)?,
        Expr::Call(f, a) => eval(a, layout, x)?.func(*f)?,
        Expr::Powr(a, r) => {
            let base = eval(a, layout, x)?;
            if base.value() <= 0.0 {
                return Err(Error::Evaluation(format!(
                    "powr needs a positive base, got {}",
                    base.value()
                )));
            }
            base.real_power(ratio_to_f64(r))
        }
    };
    if out.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Evaluation("non-finite Taylor coefficient".into()));
    }
    Ok(out)
}

/// All derivatives of `v` up to total order `layout.order` at `x`.
pub fn expand(v: &PotentialExpr, layout: &Arc<Layout>, x: &[f64]) -> Result<Taylor> {
    if x.len() != v.dim() || layout.dim != v.dim() {
        return Err(Error::DimensionMismatch(v.dim(), x.len()));
    }
    eval(v.expr(), layout, x)
}

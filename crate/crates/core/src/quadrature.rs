//! Adaptive Gauss–Kronrod (7/15) quadrature, nested over boxes in up to a
//! few dimensions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value together with an absolute error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 400,
        }
    }
}

fn nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for i in 0..7 {
        x[2 * i] = c - h * XGK[i];
        x[2 * i + 1] = c + h * XGK[i];
    }
    x[14] = c;
    x
}

/// Kronrod value, error estimate, and the integral of the integrand's own
/// error estimate.
fn rule(a: f64, b: f64, f: &[Estimate; 15]) -> (f64, f64, f64) {
    let h = 0.5 * (b - a);
    let mut k = WGK[7] * f[14].value;
    let mut g = WG[3] * f[14].value;
    let mut inner = WGK[7] * f[14].error;
    for i in 0..7 {
        let s = f[2 * i].value + f[2 * i + 1].value;
        k += WGK[i] * s;
        inner += WGK[i] * (f[2 * i].error + f[2 * i + 1].error);
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs(), inner * h.abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    inner: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration of an integrand that carries its own error
/// estimate (nonzero for nested integrals).
pub fn adaptive<F>(f: &F, a: f64, b: f64, tol: Tolerance, parallel: bool) -> Result<Estimate>
where
    F: Fn(f64) -> Result<Estimate> + Sync,
{
    let piece = |a: f64, b: f64| -> Result<Piece> {
        let x = nodes(a, b);
        let vals: Vec<Result<Estimate>> = if parallel {
            x.par_iter().map(|&t| f(t)).collect()
        } else {
            x.iter().map(|&t| f(t)).collect()
        };
        let mut fx = [Estimate { value: 0.0, error: 0.0 }; 15];
        for (slot, v) in fx.iter_mut().zip(vals) {
            *slot = v?;
        }
        let (value, error, inner) = rule(a, b, &fx);
        Ok(Piece {
            a,
            b,
            value,
            error,
            inner,
        })
    };
    let mut heap = BinaryHeap::new();
    heap.push(piece(a, b)?);
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error + p.inner).sum();
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature { value, error });
        }
        let worst = heap.pop().expect("nonempty");
        if worst.error <= f64::EPSILON * worst.value.abs() {
            // Only nested error left to reduce; splitting does not help.
            heap.push(worst);
            let inner: f64 = heap.iter().map(|p| p.inner).sum();
            if inner <= target {
                return Ok(Estimate { value, error });
            }
            return Err(Error::Quadrature { value, error });
        }
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(piece(worst.a, mid)?);
        heap.push(piece(mid, worst.b)?);
    }
}

/// `int f` over the box `prod [lo_i, hi_i]`, by nesting one-dimensional rules.
pub fn integrate_box<F>(f: &F, bounds: &[(f64, f64)], tol: Tolerance) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    nested(f, bounds, &[], tol)
}

fn nested<F>(f: &F, bounds: &[(f64, f64)], prefix: &[f64], tol: Tolerance) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let depth = prefix.len();
    let (lo, hi) = bounds[depth];
    if depth + 1 == bounds.len() {
        let g = |t: f64| -> Result<Estimate> {
            let mut p = prefix.to_vec();
            p.push(t);
            Ok(Estimate {
                value: f(&p)?,
                error: 0.0,
            })
        };
        return adaptive(&g, lo, hi, tol, false);
    }
    // Inner integrals are solved to a tighter absolute tolerance so that
    // their accumulated error stays within the outer target.
    let inner_tol = Tolerance {
        abs: tol.abs / (hi - lo).abs().max(1.0),
        rel: tol.rel / 10.0,
        ..tol
    };
    let g = |t: f64| -> Result<Estimate> {
        let mut p = prefix.to_vec();
        p.push(t);
        nested(f, bounds, &p, inner_tol)
    };
    adaptive(&g, lo, hi, tol, depth == 0)
}

/// `int_{-inf}^{inf} f` via `x = t / (1 - t^2)` on `(-1, 1)`.
pub fn integrate_line<F>(f: &F, tol: Tolerance) -> Result<Estimate>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let g = |t: f64| -> Result<Estimate> {
        let s = 1.0 - t * t;
        if s <= 0.0 {
            return Ok(Estimate { value: 0.0, error: 0.0 });
        }
        let x = t / s;
        let jac = (1.0 + t * t) / (s * s);
        Ok(Estimate {
            value: f(x)? * jac,
            error: 0.0,
        })
    };
    adaptive(&g, -1.0, 1.0, tol, false)
}

/// Decomposes `[-outer, outer]^n minus [-inner, inner]^n` into boxes.
pub fn shell_boxes(n: usize, inner: f64, outer: f64) -> Vec<Vec<(f64, f64)>> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let full = vec![(-outer, outer); n - 1];
    for side in [(-outer, -inner), (inner, outer)] {
        let mut b = vec![side];
        b.extend_from_slice(&full);
        out.push(b);
    }
    for rest in shell_boxes(n - 1, inner, outer) {
        let mut b = vec![(-inner, inner)];
        b.extend(rest);
        out.push(b);
    }
    out
}

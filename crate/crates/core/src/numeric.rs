//! Numbers from densities: pointwise evaluation for a concrete potential,
//! integration over `R^n`, and the scattering coefficients `b_j`, `beta_j`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::diffpoly::DiffPoly;
use crate::error::{Error, Result};
use crate::exact::{gamma_half_integer, GammaValue, HalfIntScalar};
use crate::invariants::{alpha_density, heat_invariant_thm31, Epsilon, Route};
use crate::potential::PotentialExpr;
use crate::quadrature::{integrate_box, integrate_line, shell_boxes, Estimate, Tolerance};
use crate::taylor::{expand, Layout};

/// A density bound to a potential, ready for repeated evaluation.
pub struct DensityEvaluator<'a> {
    density: &'a DiffPoly,
    potential: &'a PotentialExpr,
    layout: Arc<Layout>,
}

impl<'a> DensityEvaluator<'a> {
    pub fn new(density: &'a DiffPoly, potential: &'a PotentialExpr) -> Result<Self> {
        if density.dim() != potential.dim() {
            return Err(Error::DimensionMismatch(density.dim(), potential.dim()));
        }
        let order = density.max_factor_order();
        if order > crate::potential::DEFAULT_DERIVATIVE_CAP {
            return Err(Error::DerivativeCap {
                order: order as usize,
                cap: crate::potential::DEFAULT_DERIVATIVE_CAP as usize,
            });
        }
        Ok(DensityEvaluator {
            density,
            potential,
            layout: Layout::new(density.dim(), order),
        })
    }

    pub fn at(&self, point: &[f64]) -> Result<f64> {
        if self.density.is_zero() {
            return Ok(0.0);
        }
        let t = expand(self.potential, &self.layout, point)?;
        let v = self
            .density
            .evaluate_with(|nu| t.derivative(nu).expect("layout covers every factor"));
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("non-finite density value at {point:?}")));
        }
        Ok(v)
    }
}

pub fn evaluate_density(d: &DiffPoly, v: &PotentialExpr, point: &[f64]) -> Result<f64> {
    DensityEvaluator::new(d, v)?.at(point)
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    /// Half-width of the integration box.
    pub half_width: f64,
    /// In one dimension, integrate over the whole line by a change of
    /// variables instead of over a box.
    pub infinite: bool,
    pub tolerance: Tolerance,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            half_width: 12.0,
            infinite: false,
            tolerance: Tolerance::default(),
        }
    }
}

/// `int_{R^n} d(x) dx`. The error estimate adds the quadrature error to
/// the magnitude of the integral over the shell between the box and the
/// box of twice its size.
pub fn integrate_density(d: &DiffPoly, v: &PotentialExpr, cfg: &QuadratureConfig) -> Result<Estimate> {
    if d.is_zero() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let eval = DensityEvaluator::new(d, v)?;
    let n = d.dim();
    let f = |x: &[f64]| eval.at(x);
    if n == 1 && cfg.infinite {
        // algebraic tails become endpoint singularities after the map;
        // one-dimensional subdivision is cheap, so allow much more of it
        let tol = Tolerance {
            max_intervals: cfg.tolerance.max_intervals.max(4000),
            ..cfg.tolerance
        };
        return integrate_line(&|x: f64| eval.at(&[x]), tol);
    }
    let l = cfg.half_width;
    let core = integrate_box(&f, &vec![(-l, l); n], cfg.tolerance)?;
    let mut tail = 0.0;
    for b in shell_boxes(n, l, 2.0 * l) {
        let s = integrate_box(&f, &b, cfg.tolerance)?;
        tail += s.value.abs() + s.error;
    }
    Ok(Estimate {
        value: core.value,
        error: core.error + tail,
    })
}

/// Exact `(4 pi)^(-n/2) / Gamma(n/2 - j)`, or `None` at a pole of Gamma.
pub fn scattering_factor(j: u32, n: u32) -> Option<HalfIntScalar> {
    match gamma_half_integer(n as i64 - 2 * j as i64) {
        GammaValue::Pole => None,
        GammaValue::Finite(g) => {
            let four_pi = HalfIntScalar::four_pi_power_neg_half(n);
            Some((&four_pi / &g).expect("Gamma has no zeros"))
        }
    }
}

/// `b_j = (4 pi)^(-n/2) a_j / Gamma(n/2 - j)`; absent for even `n`, `j >= n/2`.
pub fn b_from_a(a_j: f64, j: u32, n: u32) -> Option<f64> {
    // adding 0.0 folds -0 into +0 so output is sign-stable
    scattering_factor(j, n).map(|s| s.to_f64() * a_j + 0.0)
}

/// `beta_j`, same relation with `alpha_j`; absent for every even `n`.
pub fn beta_from_alpha(alpha_j: f64, j: u32, n: u32) -> Option<f64> {
    if n.is_multiple_of(2) {
        return None;
    }
    b_from_a(alpha_j, j, n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub j: u32,
    pub density: String,
    pub value: Option<f64>,
    pub b_or_beta: Option<f64>,
    pub route: String,
    pub err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientTable {
    pub dim: u32,
    pub epsilon: Option<String>,
    pub rows: Vec<CoefficientRow>,
}

impl CoefficientTable {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let eps = self.epsilon.as_deref().unwrap_or("-");
        let _ = writeln!(s, "dim {}  epsilon {}", self.dim, eps);
        let _ = writeln!(
            s,
            "{:>3}  {:>22}  {:>22}  {:>10}  {:<12}  density",
            "j", "value", "b_or_beta", "err", "route"
        );
        for r in &self.rows {
            let num = |v: Option<f64>| v.map_or("absent".to_string(), |x| format!("{x:.15e}"));
            let value = match (&r.error, r.value) {
                (Some(_), _) => "error".to_string(),
                (None, v) => num(v),
            };
            let b = if r.error.is_some() { "-".to_string() } else { num(r.b_or_beta) };
            let err = r.err.map_or("-".to_string(), |e| format!("{e:.2e}"));
            let _ = writeln!(
                s,
                "{:>3}  {:>22}  {:>22}  {:>10}  {:<12}  {}",
                r.j, value, b, err, r.route, r.density
            );
            if let Some(e) = &r.error {
                let _ = writeln!(s, "     error: {e}");
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,density,value,b_or_beta,route,err\n");
        let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},\"{}\",{},{},{},{}",
                r.j,
                r.density,
                num(r.value),
                num(r.b_or_beta),
                r.route,
                num(r.err)
            );
        }
        s
    }
}

fn row(
    j: u32,
    density: &DiffPoly,
    route: Route,
    v: &PotentialExpr,
    cfg: &QuadratureConfig,
    coefficient: impl Fn(f64) -> Option<f64>,
) -> CoefficientRow {
    let mut r = CoefficientRow {
        j,
        density: density.to_string(),
        value: None,
        b_or_beta: None,
        route: route.to_string(),
        err: None,
        error: None,
    };
    match integrate_density(density, v, cfg) {
        Ok(est) => {
            r.value = Some(est.value);
            r.err = Some(est.error);
            r.b_or_beta = coefficient(est.value);
        }
        Err(e) => {
            if let Error::Quadrature { value, error } = e {
                r.value = Some(value);
                r.err = Some(error);
            }
            r.error = Some(e.to_string());
        }
    }
    r
}

/// Numeric `a_j` and `b_j` for `j = 1..=order`.
pub fn heat_coefficients(v: &PotentialExpr, order: u32, cfg: &QuadratureConfig) -> Result<CoefficientTable> {
    let n = v.dim() as u32;
    let mut rows = Vec::new();
    for j in 1..=order {
        let d = heat_invariant_thm31(j, n)?.density;
        rows.push(row(j, &d, Route::Theorem31, v, cfg, |a| b_from_a(a, j, n)));
    }
    Ok(CoefficientTable {
        dim: n,
        epsilon: None,
        rows,
    })
}

/// Numeric `alpha_j` and `beta_j` for `j = 1..=order`.
pub fn regularized_coefficients(
    v: &PotentialExpr,
    eps: &Epsilon,
    order: u32,
    cfg: &QuadratureConfig,
) -> Result<CoefficientTable> {
    let n = v.dim() as u32;
    let mut rows = Vec::new();
    for j in 1..=order {
        let d = alpha_density(j, n, eps)?.density;
        rows.push(row(j, &d, Route::AlphaDef, v, cfg, |a| beta_from_alpha(a, j, n)));
    }
    Ok(CoefficientTable {
        dim: n,
        epsilon: Some(eps.to_string()),
        rows,
    })
}

/// Samples `|d^nu V(x)| (1 + |x|)^(eps + |nu|)` along the coordinate axes
/// and reports growth that contradicts the assumed decay class.
pub fn decay_warnings(v: &PotentialExpr, eps: &Epsilon, max_order: u32) -> Vec<String> {
    let n = v.dim();
    let layout = Layout::new(n, max_order);
    let e = eps.to_f64();
    let radii = [10.0, 100.0, 1000.0];
    let mut warnings = Vec::new();
    for axis in 0..n {
        for sign in [-1.0, 1.0] {
            let mut profiles: Vec<Vec<f64>> = Vec::new();
            for &r in &radii {
                let mut x = vec![0.0; n];
                x[axis] = sign * r;
                match expand(v, &layout, &x) {
                    Ok(t) => profiles.push(
                        crate::diffpoly::MultiIndex::all_up_to(n, max_order)
                            .iter()
                            .map(|nu| {
                                t.derivative(nu).unwrap().abs() * (1.0 + r).powf(e + nu.order() as f64)
                            })
                            .collect(),
                    ),
                    Err(err) => {
                        warnings.push(format!("cannot evaluate V at {x:?}: {err}"));
                        profiles.clear();
                        break;
                    }
                }
            }
            if profiles.len() < radii.len() {
                continue;
            }
            let grows = profiles[0]
                .iter()
                .zip(profiles.last().unwrap())
                .any(|(near, far)| *far > 10.0 * near.max(1e-12));
            if grows {
                warnings.push(format!(
                    "weighted derivatives of V grow along {}x{}; V may not decay like |x|^(-{eps})",
                    if sign < 0.0 { "-" } else { "+" },
                    axis + 1
                ));
            }
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn gauss() -> PotentialExpr {
        PotentialExpr::parse("exp(-x1^2)", 1).unwrap()
    }

    #[test]
    fn pointwise_densities() {
        let v = gauss();
        let a1 = DiffPoly::parse("-V", 1).unwrap();
        assert_eq!(evaluate_density(&a1, &v, &[0.0]).unwrap(), -1.0);
        let a2 = DiffPoly::parse("1/2*V^2 - 1/6*D[2]V", 1).unwrap();
        assert!((evaluate_density(&a2, &v, &[0.0]).unwrap() - 5.0 / 6.0).abs() < 1e-14);
        assert_eq!(evaluate_density(&DiffPoly::one(1), &v, &[3.0]).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_integrals() {
        let v = gauss();
        let cfg = QuadratureConfig::default();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let a1 = integrate_density(&DiffPoly::parse("-V", 1).unwrap(), &v, &cfg).unwrap();
        assert!((a1.value + sqrt_pi).abs() < 1e-6);
        let a2 = integrate_density(&DiffPoly::parse("1/2*V^2 - 1/6*D[2]V", 1).unwrap(), &v, &cfg).unwrap();
        assert!((a2.value - 0.5 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-6);
        assert_eq!(integrate_density(&DiffPoly::zero(1), &v, &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn box_doubling_within_error_estimate() {
        let v = PotentialExpr::parse("exp(-x1^2 - x2^2/2)", 2).unwrap();
        let d = heat_invariant_thm31(2, 2).unwrap().density;
        let cfg = QuadratureConfig::default();
        let small = integrate_density(&d, &v, &cfg).unwrap();
        let big = integrate_density(&d, &v, &QuadratureConfig { half_width: 24.0, ..cfg }).unwrap();
        assert!((small.value - big.value).abs() <= small.error.max(1e-12));
    }

    #[test]
    fn scattering_coefficients() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        // Gamma(-1/2) = -2 sqrt(pi)
        let b1 = b_from_a(-sqrt_pi, 1, 1).unwrap();
        assert!((b1 - 1.0 / (4.0 * sqrt_pi)).abs() < 1e-15);
        assert_eq!(b_from_a(1.0, 1, 2), None);
        assert_eq!(b_from_a(0.0, 2, 3), Some(0.0));
        assert_eq!(beta_from_alpha(1.0, 1, 2), None);
        assert_eq!(beta_from_alpha(0.0, 1, 1), Some(0.0));
        assert!(b_from_a(1.0, 1, 4).is_some());
        assert!(b_from_a(1.0, 2, 4).is_none());
    }

    #[test]
    fn exact_factor_matches_float_composition() {
        for n in 1..=7u32 {
            for j in 1..=6u32 {
                if let Some(s) = scattering_factor(j, n) {
                    let z = n as f64 / 2.0 - j as f64;
                    let float = (4.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0) / gamma_f64(z);
                    assert!((s.to_f64() - float).abs() <= 1e-12 * float.abs(), "n={n} j={j}");
                }
            }
        }
    }

    /// Gamma by reflection and recursion onto a Lanczos-free closed form
    /// at half-integers and integers.
    fn gamma_f64(z: f64) -> f64 {
        if z > 0.0 {
            if z.fract() == 0.0 {
                (1..z as u32).map(f64::from).product()
            } else {
                let mut g = std::f64::consts::PI.sqrt();
                let mut x = 0.5;
                while x < z {
                    g *= x;
                    x += 1.0;
                }
                g
            }
        } else {
            gamma_f64(z + 1.0) / z
        }
    }

    #[test]
    fn tables() {
        let v = gauss();
        let t = heat_coefficients(&v, 2, &QuadratureConfig::default()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!((t.rows[0].value.unwrap() + std::f64::consts::PI.sqrt()).abs() < 1e-6);
        let json = t.to_json();
        assert_eq!(json["dim"], 1);
        assert!(json["epsilon"].is_null());
        assert_eq!(json["rows"][0]["density"], "-V");
        assert!(t.to_text().contains("-V"));
        let eps = Epsilon::new(rat(1, 3)).unwrap();
        let lr = PotentialExpr::parse("powr(1 + x1^2, -1, 6)", 1).unwrap();
        let cfg = QuadratureConfig {
            infinite: true,
            ..QuadratureConfig::default()
        };
        let r = regularized_coefficients(&lr, &eps, 3, &cfg).unwrap();
        assert_eq!(r.rows[0].value, Some(0.0));
        assert_eq!(r.rows[0].b_or_beta, Some(0.0));
        assert_eq!(r.rows[1].b_or_beta, Some(0.0));
        assert!(r.rows[2].value.unwrap().is_finite() && r.rows[2].error.is_none());
        let even = PotentialExpr::parse("exp(-x1^2-x2^2)", 2).unwrap();
        let t2 = heat_coefficients(&even, 1, &QuadratureConfig::default()).unwrap();
        assert_eq!(t2.rows[0].b_or_beta, None);
        assert!(t2.to_json()["rows"][0]["b_or_beta"].is_null());
    }

    #[test]
    fn decay_check() {
        let eps = Epsilon::new(rat(1, 3)).unwrap();
        let lr = PotentialExpr::parse("powr(1 + x1^2, -1, 6)", 1).unwrap();
        assert!(decay_warnings(&lr, &eps, 2).is_empty());
        let bad = PotentialExpr::parse("x1^2", 1).unwrap();
        assert!(!decay_warnings(&bad, &eps, 2).is_empty());
    }
}

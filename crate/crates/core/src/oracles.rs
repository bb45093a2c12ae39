//! Independent numerical checks: Feynman–Kac Monte Carlo for the diagonal
//! heat kernel, a finite-difference relative heat trace in one dimension
//! with asymptotic fitting, and the non-commutative Taylor formula for
//! matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::PotentialExpr;

/// Paths are generated in fixed-size chunks, each with its own stream, so
/// results do not depend on the number of worker threads.
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BridgeSampler {
    pub seed: u64,
    pub steps: usize,
    pub paths: usize,
    pub dim: usize,
}

impl BridgeSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        BridgeSampler {
            seed,
            steps: 256,
            paths: 100_000,
            dim,
        }
    }

    fn chunk_rng(&self, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk as u64);
        rng
    }

    /// Fills `path[k][i]` with a standard Brownian bridge on `s_k = k/steps`:
    /// a random walk with the terminal value pinned by `b(s) = W(s) - s W(1)`.
    fn fill(&self, rng: &mut ChaCha8Rng, path: &mut [Vec<f64>]) {
        let h = 1.0 / self.steps as f64;
        let sd = h.sqrt();
        for i in 0..self.dim {
            path[0][i] = 0.0;
            for k in 1..=self.steps {
                let z: f64 = rng.sample(StandardNormal);
                path[k][i] = path[k - 1][i] + sd * z;
            }
            let end = path[self.steps][i];
            for (k, p) in path.iter_mut().enumerate() {
                p[i] -= k as f64 * h * end;
            }
            path[self.steps][i] = 0.0;
        }
    }

    /// Draws `count` bridge paths; for tests and diagnostics.
    pub fn sample_paths(&self, count: usize) -> Vec<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(count);
        let mut chunk = 0;
        while out.len() < count {
            let mut rng = self.chunk_rng(chunk);
            for _ in 0..CHUNK.min(count - out.len()) {
                let mut p = vec![vec![0.0; self.dim]; self.steps + 1];
                self.fill(&mut rng, &mut p);
                out.push(p);
            }
            chunk += 1;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// `e^{-tH}(x,x) = (4 pi t)^(-n/2) E[exp(-t int_0^1 V(x + sqrt(2t) b(s)) ds)]`.
pub fn fk_diagonal(v: &PotentialExpr, x: &[f64], t: f64, sampler: &BridgeSampler) -> Result<McEstimate> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if x.len() != v.dim() || sampler.dim != v.dim() {
        return Err(Error::DimensionMismatch(v.dim(), x.len()));
    }
    if sampler.paths < 2 || sampler.steps == 0 {
        return Err(Error::Domain("need at least two paths and one step".into()));
    }
    let n = v.dim();
    let scale = (2.0 * t).sqrt();
    let h = 1.0 / sampler.steps as f64;
    let chunks = sampler.paths.div_ceil(CHUNK);
    // Per-chunk Welford accumulators, merged in chunk order.
    let partial: Vec<Result<(f64, f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = sampler.chunk_rng(c);
            let count = CHUNK.min(sampler.paths - c * CHUNK);
            let mut path = vec![vec![0.0; n]; sampler.steps + 1];
            let mut point = vec![0.0; n];
            let (mut k, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for _ in 0..count {
                sampler.fill(&mut rng, &mut path);
                let mut integral = 0.0;
                for (step, b) in path.iter().enumerate() {
                    for i in 0..n {
                        point[i] = x[i] + scale * b[i];
                    }
                    let w = if step == 0 || step == sampler.steps { 0.5 * h } else { h };
                    integral += w * v.evaluate(&point)?;
                }
                let y = (-t * integral).exp();
                k += 1.0;
                let d = y - mean;
                mean += d / k;
                m2 += d * (y - mean);
            }
            Ok((k, mean, m2))
        })
        .collect();
    let (mut k, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for p in partial {
        let (kb, mb, m2b) = p?;
        let total = k + kb;
        let d = mb - mean;
        mean += d * kb / total;
        m2 += m2b + d * d * k * kb / total;
        k = total;
    }
    let var = m2 / (k - 1.0);
    let prefactor = (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0);
    Ok(McEstimate {
        estimate: prefactor * mean,
        std_error: prefactor * (var / k).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceGrid {
    pub half_length: f64,
    pub points: usize,
}

impl Default for TraceGrid {
    fn default() -> Self {
        TraceGrid {
            half_length: 30.0,
            points: 4000,
        }
    }
}

/// Eigenvalues of the finite-difference Dirichlet operators `H` and `H0`
/// on `[-L, L]`, ascending.
pub fn fd_spectra(v: &PotentialExpr, grid: &TraceGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.dim() != 1 {
        return Err(Error::Domain("the trace oracle is one-dimensional".into()));
    }
    let m = grid.points;
    let h = 2.0 * grid.half_length / (m + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let mut diag = Vec::with_capacity(m);
    for i in 1..=m {
        let x = -grid.half_length + i as f64 * h;
        diag.push(2.0 * inv_h2 + v.evaluate(&[x])?);
    }
    let off = vec![-inv_h2; m.saturating_sub(1)];
    let mut lambda = tridiagonal_eigenvalues(diag, off)?;
    lambda.sort_by(f64::total_cmp);
    let mu: Vec<f64> = (1..=m)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin();
            4.0 * inv_h2 * s * s
        })
        .collect();
    Ok((lambda, mu))
}

/// `Tr(e^{-tH} - e^{-tH0})` for the discretized operators.
pub fn relative_heat_trace_1d(v: &PotentialExpr, t: f64, grid: &TraceGrid) -> Result<f64> {
    let (lambda, mu) = fd_spectra(v, grid)?;
    Ok(trace_from_spectra(&lambda, &mu, t))
}

pub fn trace_from_spectra(lambda: &[f64], mu: &[f64], t: f64) -> f64 {
    lambda
        .iter()
        .zip(mu)
        .map(|(l, m)| (-t * l).exp() - (-t * m).exp())
        .sum()
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson shifts.
pub fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    let mut e = off;
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numeric("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub t: Vec<f64>,
    /// `c_1 .. c_J`.
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub condition: f64,
    pub residual_norm: f64,
}

/// Least squares for `value(t) = (4 pi t)^(-n/2) sum_{j=1}^{J} c_j t^j`.
pub fn fit_expansion(samples: &[(f64, f64)], n: u32, order: usize) -> Result<FitReport> {
    if order == 0 {
        return Err(Error::Domain("fit order must be at least 1".into()));
    }
    if samples.len() < order + 2 {
        return Err(Error::Domain(format!(
            "need at least {} samples for {order} coefficients, got {}",
            order + 2,
            samples.len()
        )));
    }
    let mut ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ts.sort_by(f64::total_cmp);
    if ts.windows(2).any(|w| w[0] == w[1]) || ts[0] <= 0.0 {
        return Err(Error::Domain("sample times must be positive and distinct".into()));
    }
    let rows = samples.len();
    let a = DMatrix::from_fn(rows, order, |i, j| samples[i].0.powi(j as i32 + 1));
    let y = DVector::from_fn(rows, |i, _| {
        let (t, v) = samples[i];
        v * (4.0 * std::f64::consts::PI * t).powf(n as f64 / 2.0)
    });
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * f64::EPSILON * rows as f64 {
        return Err(Error::Numeric("rank-deficient fit design".into()));
    }
    let c = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let resid = &a * &c - &y;
    let dof = (rows - order).max(1) as f64;
    let sigma2 = resid.norm_squared() / dof;
    let ata_inv = (a.transpose() * &a)
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular normal matrix".into()))?;
    let cov = ata_inv * sigma2;
    Ok(FitReport {
        t: samples.iter().map(|s| s.0).collect(),
        coefficients: c.iter().copied().collect(),
        covariance: (0..order).map(|i| (0..order).map(|j| cov[(i, j)]).collect()).collect(),
        condition: smax / smin,
        residual_norm: resid.norm(),
    })
}

/// Random symmetric matrix with entries uniform on `[-1, 1]`.
pub fn random_symmetric(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = rng.random_range(-1.0..=1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `C_m(A, B) = sum_k C(m, k) A^k (-B)^(m-k)`.
pub fn c_m(a: &DMatrix<f64>, b: &DMatrix<f64>, m: u32) -> DMatrix<f64> {
    let dim = a.nrows();
    let mut a_pow = vec![DMatrix::identity(dim, dim)];
    let mut nb_pow = vec![DMatrix::identity(dim, dim)];
    for k in 1..=m as usize {
        a_pow.push(&a_pow[k - 1] * a);
        nb_pow.push(&nb_pow[k - 1] * (-b));
    }
    let mut out = DMatrix::zeros(dim, dim);
    let mut binom = 1.0;
    for k in 0..=m as usize {
        out += &a_pow[k] * &nb_pow[m as usize - k] * binom;
        binom = binom * (m as usize - k) as f64 / (k + 1) as f64;
    }
    out
}

/// `R_N(t) phi = e^{tB} phi - sum_{m<=N} (-1)^m t^m/m! e^{tA} C_m(A,B) phi`.
pub fn taylor_remainder(a: &DMatrix<f64>, b: &DMatrix<f64>, phi: &DVector<f64>, order: u32, t: f64) -> DVector<f64> {
    let etb = (b * t).exp();
    let eta = (a * t).exp();
    let mut sum = DVector::zeros(phi.len());
    let mut coef = 1.0;
    for m in 0..=order {
        if m > 0 {
            coef *= -t / m as f64;
        }
        sum += &eta * (c_m(a, b, m) * phi) * coef;
    }
    etb * phi - sum
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeReport {
    pub dim: usize,
    pub order: u32,
    pub seed: u64,
    pub t: Vec<f64>,
    pub remainder: Vec<f64>,
    /// Fitted log-log slope; `None` when the remainder vanishes identically.
    pub slope: Option<f64>,
}

/// Geometric grid of `t` on which the remainder is sampled.
pub fn slope_grid() -> Vec<f64> {
    (0..10).map(|i| 0.005 * 10f64.powf(i as f64 / 9.0)).collect()
}

pub fn remainder_slope(a: &DMatrix<f64>, b: &DMatrix<f64>, phi: &DVector<f64>, order: u32) -> (Vec<f64>, Vec<f64>, Option<f64>) {
    let ts = slope_grid();
    let rs: Vec<f64> = ts.iter().map(|&t| taylor_remainder(a, b, phi, order, t).norm()).collect();
    let floor = 1e3 * f64::EPSILON * phi.norm();
    if rs.iter().all(|r| *r <= floor) {
        return (ts, rs, None);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = ts.iter().zip(&rs).map(|(t, r)| (t.ln(), r.ln())).unzip();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (ts, rs, Some(sxy / sxx))
}

/// Remainder order of the non-commutative Taylor formula for random
/// symmetric `A`, `B` of size `dim`.
pub fn nc_taylor_matrix_check(dim: usize, order: u32, seed: u64) -> Result<SlopeReport> {
    if dim < 2 {
        return Err(Error::Domain("matrix size must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_symmetric(dim, &mut rng);
    let b = random_symmetric(dim, &mut rng);
    let phi = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0));
    let (t, remainder, slope) = remainder_slope(&a, &b, &phi, order);
    Ok(SlopeReport {
        dim,
        order,
        seed,
        t,
        remainder,
        slope,
    })
}

/// Dirichlet finite-difference `H0` and `H = H0 + diag(V)` on `dim`
/// points in `[-L, L]`.
pub fn discretized_pair(v: &PotentialExpr, dim: usize, half_length: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let h = 2.0 * half_length / (dim + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let mut h0 = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        h0[(i, i)] = 2.0 * inv_h2;
        if i + 1 < dim {
            h0[(i, i + 1)] = -inv_h2;
            h0[(i + 1, i)] = -inv_h2;
        }
    }
    let mut hm = h0.clone();
    for i in 0..dim {
        let x = -half_length + (i + 1) as f64 * h;
        hm[(i, i)] += v.evaluate(&[x])?;
    }
    Ok((h0, hm))
}

/// `V_m` from `V_0 = I`, `V_j = V_{j-1} V + V_{j-1} H0 - H0 V_{j-1}` with
/// `V = H - H0`.
pub fn vm_by_recurrence(h0: &DMatrix<f64>, h: &DMatrix<f64>, m: u32) -> DMatrix<f64> {
    let v = h - h0;
    let mut cur = DMatrix::identity(h0.nrows(), h0.ncols());
    for _ in 0..m {
        cur = &cur * &v + &cur * h0 - h0 * &cur;
    }
    cur
}

/// Largest relative deviation between `C_m(-H0, -H)` and `V_m` for `m <= max_m`.
pub fn vm_identity_deviation(h0: &DMatrix<f64>, h: &DMatrix<f64>, max_m: u32) -> f64 {
    (0..=max_m)
        .map(|m| {
            let lhs = c_m(&(-h0), &(-h), m);
            let rhs = vm_by_recurrence(h0, h, m);
            (&lhs - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub oracle: String,
    pub parameters: serde_json::Value,
    pub target: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(oracle: &str, parameters: serde_json::Value, target: f64, observed: f64, tolerance: f64) -> Self {
        VerificationReport {
            oracle: oracle.to_string(),
            parameters,
            target,
            observed,
            tolerance,
            pass: (observed - target).abs() <= tolerance,
        }
    }
}

//! Command-line front end. [`run`] parses arguments, executes, and returns
//! the rendered output together with the exit code, so the binary is a
//! thin wrapper and the whole surface is testable in-process.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::Error;
use crate::invariants::{
    alpha_density, heat_invariant_eq23, heat_invariant_thm31, Engine, Epsilon, Regime, Route,
};
use crate::numeric::{
    decay_warnings, evaluate_density, heat_coefficients, integrate_density, regularized_coefficients,
    CoefficientTable, QuadratureConfig,
};
use crate::oracles::{
    discretized_pair, fd_spectra, fit_expansion, fk_diagonal, nc_taylor_matrix_check, trace_from_spectra,
    vm_identity_deviation, BridgeSampler, TraceGrid, VerificationReport,
};
use crate::potential::PotentialExpr;
use crate::ring::Specialized;

const GRAMMAR: &str = "\
Potentials are expressions in x1..xn built from rational numbers, pi,
+ - * /, integer powers `^`, exp, sin, cos, tanh, sqrt and
powr(base, p, q) = base^(p/q). Example: \"powr(1 + x1^2, -1, 6)\".

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numeric failure.
HEATINV_THREADS caps the number of worker threads.";

#[derive(Parser, Debug)]
#[command(name = "heatinv", version, about = "Local heat invariants and regularized trace coefficients of -Laplacian + V", after_help = GRAMMAR)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Symbolic local heat invariants a_1..a_J.
    Local(LocalArgs),
    /// Symbolic regularized densities alpha_1..alpha_J.
    Alpha(AlphaArgs),
    /// Numeric a_j and scattering coefficients b_j for a potential.
    Coeffs(CoeffArgs),
    /// Numeric alpha_j and trace-distribution coefficients beta_j.
    Regtrace(RegtraceArgs),
    /// Run a verification suite.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
}

fn positive_order() -> clap::builder::RangedI64ValueParser<u32> {
    clap::value_parser!(u32).range(1..)
}

#[derive(Args, Debug)]
pub struct LocalArgs {
    #[arg(long, default_value_t = 1, value_parser = positive_order())]
    pub dim: u32,
    #[arg(long, value_parser = positive_order())]
    pub order: u32,
    /// Largest accepted order; guards against combinatorial blowup.
    #[arg(long, default_value_t = 6)]
    pub max_order: u32,
}

#[derive(Args, Debug)]
pub struct AlphaArgs {
    #[arg(long, default_value_t = 1, value_parser = positive_order())]
    pub dim: u32,
    #[arg(long, value_parser = positive_order())]
    pub order: u32,
    /// Decay exponent as an exact rational, e.g. 1/3.
    #[arg(long)]
    pub epsilon: Epsilon,
    #[arg(long, default_value_t = 6)]
    pub max_order: u32,
}

#[derive(Args, Debug)]
pub struct QuadArgs {
    /// Half-width of the integration box.
    #[arg(long, default_value_t = 12.0)]
    pub half_width: f64,
    /// In one dimension, integrate over the whole line.
    #[arg(long)]
    pub infinite: bool,
}

#[derive(Args, Debug)]
pub struct CoeffArgs {
    #[arg(long, default_value_t = 1, value_parser = positive_order())]
    pub dim: u32,
    #[arg(long, value_parser = positive_order())]
    pub order: u32,
    #[arg(long)]
    pub potential: String,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Args, Debug)]
pub struct RegtraceArgs {
    #[arg(long, default_value_t = 1, value_parser = positive_order())]
    pub dim: u32,
    #[arg(long, value_parser = positive_order())]
    pub order: u32,
    #[arg(long)]
    pub epsilon: Epsilon,
    #[arg(long)]
    pub potential: String,
    /// Integrate over a box even in one dimension.
    #[arg(long)]
    pub finite_box: bool,
    #[arg(long, default_value_t = 12.0)]
    pub half_width: f64,
}

#[derive(Subcommand, Debug)]
pub enum Suite {
    /// Feynman–Kac Monte Carlo against the truncated local expansion.
    Fk(FkArgs),
    /// Finite-difference relative heat trace against integrated invariants.
    Trace(TraceArgs),
    /// Remainder order of the non-commutative Taylor formula.
    Taylor(TaylorArgs),
    /// Agreement of independent symbolic routes.
    Routes(RoutesArgs),
}

#[derive(Args, Debug)]
pub struct FkArgs {
    #[arg(long, default_value_t = 1, value_parser = positive_order())]
    pub dim: u32,
    #[arg(long)]
    pub potential: String,
    /// Comma-separated evaluation point; defaults to the origin.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub t: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 256)]
    pub steps: usize,
    /// Number of invariants a_1..a_k in the comparison expansion.
    #[arg(long, default_value_t = 3)]
    pub terms: u32,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[arg(long, default_value = "exp(-x1^2)")]
    pub potential: String,
    /// Number of fitted coefficients.
    #[arg(long, default_value_t = 3, value_parser = positive_order())]
    pub order: u32,
    #[arg(long, default_value_t = 30.0)]
    pub half_length: f64,
    #[arg(long, default_value_t = 4000)]
    pub points: usize,
    #[arg(long, default_value_t = 0.02)]
    pub t_min: f64,
    #[arg(long, default_value_t = 0.2)]
    pub t_max: f64,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct TaylorArgs {
    /// Truncation order N.
    #[arg(long, default_value_t = 3)]
    pub order: u32,
    /// Matrix size.
    #[arg(long, default_value_t = 6)]
    pub dim: usize,
    /// Single seed; by default seeds 1, 2 and 3 are run.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RoutesArgs {
    #[arg(long, default_value_t = 1, value_parser = positive_order())]
    pub dim: u32,
    #[arg(long, value_parser = positive_order())]
    pub order: u32,
    /// Comma-separated decay exponents for the regularized densities.
    #[arg(long, default_value = "1,1/2,1/3")]
    pub epsilon: String,
    /// Compare by modular specialization with this many seeds instead of
    /// symbolically; reaches higher orders.
    #[arg(long)]
    pub modular: Option<u64>,
}

/// Result of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Evaluation(_) | Error::Quadrature { .. } | Error::Numeric(_) => 3,
        _ => 2,
    }
}

/// Honors `HEATINV_THREADS` for the global worker pool.
pub fn configure_threads() {
    if let Some(n) = std::env::var("HEATINV_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let mut stderr = String::new();
    let result = execute(&cli, &mut stderr);
    match result {
        Ok((body, passed)) => {
            let code = if passed { 0 } else { 1 };
            if let Some(path) = &cli.output {
                if let Err(e) = std::fs::write(path, &body) {
                    let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                    return Outcome { code: 2, stdout: String::new(), stderr };
                }
                return Outcome { code, stdout: String::new(), stderr };
            }
            Outcome { code, stdout: body, stderr }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            Outcome { code: exit_code(&e), stdout: String::new(), stderr }
        }
    }
}

fn execute(cli: &Cli, stderr: &mut String) -> crate::Result<(String, bool)> {
    match &cli.command {
        Command::Local(a) => local(a, cli.format).map(|s| (s, true)),
        Command::Alpha(a) => alpha(a, cli.format).map(|s| (s, true)),
        Command::Coeffs(a) => {
            let v = PotentialExpr::parse(&a.potential, a.dim as usize)?;
            let cfg = QuadratureConfig {
                half_width: a.quad.half_width,
                infinite: a.quad.infinite,
                ..QuadratureConfig::default()
            };
            let table = heat_coefficients(&v, a.order, &cfg)?;
            table_output(&table, cli.format, stderr)
        }
        Command::Regtrace(a) => {
            let v = PotentialExpr::parse(&a.potential, a.dim as usize)?;
            for w in decay_warnings(&v, &a.epsilon, 2) {
                let _ = writeln!(stderr, "warning: {w}");
            }
            let infinite = a.dim == 1 && !a.finite_box;
            if !infinite {
                let suggested = 10f64.powf(3.0 / a.epsilon.to_f64());
                if a.half_width < suggested {
                    let _ = writeln!(
                        stderr,
                        "warning: algebraically decaying densities may need a box of half-width ~{suggested:.3e}; tail estimate reported in err"
                    );
                }
            }
            let cfg = QuadratureConfig {
                half_width: a.half_width,
                infinite,
                ..QuadratureConfig::default()
            };
            let table = regularized_coefficients(&v, &a.epsilon, a.order, &cfg)?;
            table_output(&table, cli.format, stderr)
        }
        Command::Verify { suite } => {
            let reports = match suite {
                Suite::Fk(a) => verify_fk(a)?,
                Suite::Trace(a) => verify_trace(a)?,
                Suite::Taylor(a) => verify_taylor(a)?,
                Suite::Routes(a) => verify_routes(a)?,
            };
            let pass = reports.iter().all(|r| r.pass);
            let name = match suite {
                Suite::Fk(_) => "fk",
                Suite::Trace(_) => "trace",
                Suite::Taylor(_) => "taylor",
                Suite::Routes(_) => "routes",
            };
            Ok((render_reports(name, &reports, pass, cli.format), pass))
        }
    }
}

fn table_output(table: &CoefficientTable, format: Format, stderr: &mut String) -> crate::Result<(String, bool)> {
    for r in &table.rows {
        if let Some(e) = &r.error {
            let _ = writeln!(stderr, "warning: j = {}: {e}", r.j);
        }
    }
    let body = match format {
        Format::Json => pretty(&table.to_json()),
        Format::Csv => table.to_csv(),
        Format::Text => table.to_text(),
    };
    Ok((body, true))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn guard(order: u32, max: u32) -> crate::Result<()> {
    if order > max {
        return Err(Error::Usage(format!(
            "order {order} exceeds the limit {max}; raise --max-order to proceed"
        )));
    }
    Ok(())
}

fn local(a: &LocalArgs, format: Format) -> crate::Result<String> {
    guard(a.order, a.max_order)?;
    let mut rows = Vec::new();
    for j in 1..=a.order {
        let r = heat_invariant_thm31(j, a.dim)?;
        let alt = heat_invariant_eq23(j, a.dim)?;
        rows.push((j, r.density.to_string(), r.density == alt.density));
    }
    Ok(match format {
        Format::Json => pretty(&json!({
            "command": "local",
            "dim": a.dim,
            "rows": rows.iter().map(|(j, d, ok)| json!({
                "j": j, "route": Route::Theorem31.to_string(), "density": d, "routes_agree": ok,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut s = String::from("j,route,routes_agree,density\n");
            for (j, d, ok) in &rows {
                let _ = writeln!(s, "{j},{},{ok},{}", Route::Theorem31, csv_field(d));
            }
            s
        }
        Format::Text => {
            let mut s = format!("dim {}\n{:>3}  {:<6}  density\n", a.dim, "j", "agree");
            for (j, d, ok) in &rows {
                let _ = writeln!(s, "{j:>3}  {:<6}  {d}", if *ok { "yes" } else { "NO" });
            }
            s
        }
    })
}

fn alpha(a: &AlphaArgs, format: Format) -> crate::Result<String> {
    guard(a.order, a.max_order)?;
    let depth = a.epsilon.depth(a.dim);
    let mut rows = Vec::new();
    for j in 1..=a.order {
        let r = alpha_density(j, a.dim, &a.epsilon)?;
        rows.push((j, Regime::of(j, depth), r.density.to_string()));
    }
    Ok(match format {
        Format::Json => pretty(&json!({
            "command": "alpha",
            "dim": a.dim,
            "epsilon": a.epsilon.to_string(),
            "N": depth,
            "rows": rows.iter().map(|(j, g, d)| json!({
                "j": j, "regime": g.to_string(), "route": Route::AlphaDef.to_string(), "density": d,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut s = String::from("j,regime,density\n");
            for (j, g, d) in &rows {
                let _ = writeln!(s, "{j},{g},{}", csv_field(d));
            }
            s
        }
        Format::Text => {
            let mut s = format!("dim {}  epsilon {}  N {}\n{:>3}  {:<6}  density\n", a.dim, a.epsilon, depth, "j", "regime");
            for (j, g, d) in &rows {
                let _ = writeln!(s, "{j:>3}  {:<6}  {d}", g.to_string());
            }
            s
        }
    })
}

fn render_reports(suite: &str, reports: &[VerificationReport], pass: bool, format: Format) -> String {
    match format {
        Format::Json => pretty(&json!({ "suite": suite, "pass": pass, "reports": reports })),
        Format::Csv => {
            let mut s = String::from("oracle,target,observed,tolerance,pass\n");
            for r in reports {
                let _ = writeln!(s, "{},{:e},{:e},{:e},{}", r.oracle, r.target, r.observed, r.tolerance, r.pass);
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for r in reports {
                let _ = writeln!(
                    s,
                    "{}  {:<40} observed {:.10e}  target {:.10e}  tolerance {:.3e}  {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.oracle,
                    r.observed,
                    r.target,
                    r.tolerance,
                    r.parameters
                );
            }
            let _ = writeln!(s, "{} {suite}", if pass { "PASS" } else { "FAIL" });
            s
        }
    }
}

fn parse_point(src: Option<&str>, dim: usize) -> crate::Result<Vec<f64>> {
    let Some(src) = src else {
        return Ok(vec![0.0; dim]);
    };
    let x: Vec<f64> = src
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Usage(format!("cannot parse point `{src}`")))?;
    if x.len() != dim {
        return Err(Error::DimensionMismatch(dim, x.len()));
    }
    Ok(x)
}

/// Monte Carlo estimate and the expansion `(4 pi t)^(-n/2) sum_{j<=terms} a_j(x) t^j`.
pub fn fk_comparison(v: &PotentialExpr, x: &[f64], t: f64, sampler: &BridgeSampler, terms: u32) -> crate::Result<VerificationReport> {
    let n = v.dim() as u32;
    let mut series = 1.0;
    for j in 1..=terms {
        let d = heat_invariant_thm31(j, n)?.density;
        series += evaluate_density(&d, v, x)? * t.powi(j as i32);
    }
    let target = (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0) * series;
    let mc = fk_diagonal(v, x, t, sampler)?;
    let tol = 3.0 * mc.std_error;
    let mut r = VerificationReport::new(
        "fk_diagonal",
        json!({
            "potential": v.to_string(), "x": x, "t": t, "terms": terms,
            "seed": sampler.seed, "paths": sampler.paths, "steps": sampler.steps,
            "std_error": mc.std_error,
        }),
        target,
        mc.estimate,
        tol,
    );
    // zero-variance cases must agree to rounding
    if mc.std_error == 0.0 {
        r.tolerance = 1e-14 * target.abs();
        r.pass = (mc.estimate - target).abs() <= r.tolerance;
    }
    Ok(r)
}

fn verify_fk(a: &FkArgs) -> crate::Result<Vec<VerificationReport>> {
    let v = PotentialExpr::parse(&a.potential, a.dim as usize)?;
    let x = parse_point(a.x.as_deref(), a.dim as usize)?;
    let sampler = BridgeSampler {
        seed: a.seed,
        steps: a.steps,
        paths: a.paths,
        dim: a.dim as usize,
    };
    Ok(vec![fk_comparison(&v, &x, a.t, &sampler, a.terms)?])
}

/// Fits the discretized relative trace on a geometric grid of `t` and
/// compares the first two coefficients with the integrated invariants.
pub fn trace_comparison(v: &PotentialExpr, order: usize, grid: &TraceGrid, t_range: (f64, f64), samples: usize) -> crate::Result<Vec<VerificationReport>> {
    let (lambda, mu) = fd_spectra(v, grid)?;
    let (t0, t1) = t_range;
    if !(t0 > 0.0 && t1 > t0) || samples < 2 {
        return Err(Error::Usage("need 0 < t-min < t-max and at least two samples".into()));
    }
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let t = t0 * (t1 / t0).powf(i as f64 / (samples - 1) as f64);
            (t, trace_from_spectra(&lambda, &mu, t))
        })
        .collect();
    let fit = fit_expansion(&pts, 1, order)?;
    let params = json!({
        "potential": v.to_string(), "fit_order": order, "t_min": t0, "t_max": t1,
        "samples": samples, "half_length": grid.half_length, "points": grid.points,
        "condition": fit.condition,
    });
    let mut out = Vec::new();
    for (j, rel) in [(1u32, 0.02), (2, 0.10)] {
        if j as usize > order {
            break;
        }
        let d = heat_invariant_thm31(j, 1)?.density;
        let target = integrate_density(&d, v, &QuadratureConfig::default())?.value;
        let observed = fit.coefficients[j as usize - 1];
        out.push(VerificationReport::new(
            &format!("relative_heat_trace_1d a{j}"),
            params.clone(),
            target,
            observed,
            rel * target.abs(),
        ));
    }
    Ok(out)
}

fn verify_trace(a: &TraceArgs) -> crate::Result<Vec<VerificationReport>> {
    let v = PotentialExpr::parse(&a.potential, 1)?;
    let grid = TraceGrid {
        half_length: a.half_length,
        points: a.points,
    };
    trace_comparison(&v, a.order as usize, &grid, (a.t_min, a.t_max), a.samples)
}

/// Slope window `[N + 0.8, N + 1.3]` for the remainder of order `N`.
pub fn taylor_reports(dim: usize, order: u32, seeds: &[u64]) -> crate::Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for &seed in seeds {
        let r = nc_taylor_matrix_check(dim, order, seed)?;
        let target = order as f64 + 1.05;
        let observed = r.slope.unwrap_or(f64::NAN);
        out.push(VerificationReport::new(
            "nc_taylor_remainder_slope",
            json!({ "dim": dim, "N": order, "seed": seed }),
            target,
            observed,
            0.25,
        ));
    }
    let v = PotentialExpr::parse("exp(-x1^2)", 1)?;
    let (h0, h) = discretized_pair(&v, dim, 2.0)?;
    let dev = vm_identity_deviation(&h0, &h, order.max(5));
    out.push(VerificationReport::new(
        "c_m(-H0,-H) = V_m",
        json!({ "dim": dim, "max_m": order.max(5), "potential": v.to_string() }),
        0.0,
        dev,
        1e-12,
    ));
    Ok(out)
}

fn verify_taylor(a: &TaylorArgs) -> crate::Result<Vec<VerificationReport>> {
    let seeds = match a.seed {
        Some(s) => vec![s],
        None => vec![1, 2, 3],
    };
    taylor_reports(a.dim, a.order, &seeds)
}

fn equality_report(name: &str, params: Value, equal: bool) -> VerificationReport {
    VerificationReport::new(name, params, 0.0, if equal { 0.0 } else { 1.0 }, 0.0)
}

fn verify_routes(a: &RoutesArgs) -> crate::Result<Vec<VerificationReport>> {
    let mut eps = Vec::new();
    for e in a.epsilon.split(',') {
        eps.push(e.parse::<Epsilon>()?);
    }
    let n = a.dim;
    let mut out = Vec::new();
    match a.modular {
        None => {
            for j in 1..=a.order {
                let x = heat_invariant_thm31(j, n)?.density;
                let y = heat_invariant_eq23(j, n)?.density;
                out.push(equality_report("a_j theorem31 = eq23-xm", json!({"j": j, "n": n}), x == y));
            }
            for e in &eps {
                let depth = e.depth(n);
                let engine = crate::invariants::symbolic_engine(n);
                for j in 1..=a.order.min(depth) {
                    if Regime::of(j, depth) != Regime::Middle {
                        continue;
                    }
                    let x = engine.alpha(j, depth, Route::AlphaDef)?;
                    let y = engine.alpha(j, depth, Route::AlphaAltSum)?;
                    out.push(equality_report(
                        "alpha_j alpha-def = alpha-altsum",
                        json!({"j": j, "n": n, "epsilon": e.to_string(), "N": depth}),
                        x == y,
                    ));
                }
            }
        }
        Some(seeds) => {
            for seed in 1..=seeds.max(1) {
                let engine = Engine::new(Specialized::new(n as usize, seed));
                for j in 1..=a.order {
                    let x = engine.heat_invariant(j, Route::Theorem31)?;
                    let y = engine.heat_invariant(j, Route::Eq23Xm)?;
                    out.push(equality_report(
                        "a_j theorem31 = eq23-xm (mod p)",
                        json!({"j": j, "n": n, "seed": seed}),
                        x == y,
                    ));
                }
                for e in &eps {
                    let depth = e.depth(n);
                    for j in 1..=a.order.min(depth) {
                        if Regime::of(j, depth) != Regime::Middle {
                            continue;
                        }
                        let x = engine.alpha(j, depth, Route::AlphaDef)?;
                        let y = engine.alpha(j, depth, Route::AlphaAltSum)?;
                        out.push(equality_report(
                            "alpha_j alpha-def = alpha-altsum (mod p)",
                            json!({"j": j, "n": n, "epsilon": e.to_string(), "N": depth, "seed": seed}),
                            x == y,
                        ));
                    }
                }
            }
        }
    }
    Ok(out)
}

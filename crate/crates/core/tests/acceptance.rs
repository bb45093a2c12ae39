//! Acceptance criteria. Runs without the libtest harness so that the
//! single `PASS`/`FAIL` line per criterion is always printed.

use std::time::{Duration, Instant};

use heatinv::cli::{fk_comparison, taylor_reports, trace_comparison};
use heatinv::exact::{rat, rat_int};
use heatinv::invariants::{
    alpha_density, heat_invariant_eq23, heat_invariant_thm31, symbolic_engine, truncated_expansion_coefficient,
    vm_diagonal, xm_diagonal, Engine, Epsilon, Regime, Route,
};
use heatinv::jet::{Jet, OperatorRoute};
use heatinv::numeric::{beta_from_alpha, scattering_factor};
use heatinv::oracles::{fk_diagonal, BridgeSampler, TraceGrid};
use heatinv::potential::PotentialExpr;
use heatinv::ring::{Specialized, Symbolic};
use heatinv::{DiffPoly, MultiIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, start: Instant, budget: Duration, failures: &[String]) -> bool {
    let elapsed = start.elapsed();
    let mut failures = failures.to_vec();
    if elapsed > budget {
        failures.push(format!("took {elapsed:.1?}, budget {budget:.0?}"));
    }
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("{status} criterion {id}: {name} ({elapsed:.2?})");
    for f in &failures {
        println!("    {f}");
    }
    failures.is_empty()
}

fn poly(s: &str, n: usize) -> DiffPoly {
    DiffPoly::parse(s, n).unwrap()
}

fn laplacian(n: usize) -> DiffPoly {
    let mut acc = DiffPoly::zero(n);
    for i in 0..n {
        let mut e = vec![0; n];
        e[i] = 2;
        acc.add_scaled(&DiffPoly::var(MultiIndex::new(&e)), &rat_int(1));
    }
    acc
}

fn eps(s: &str) -> Epsilon {
    s.parse().unwrap()
}

fn criterion_1_symbolic_examples() -> bool {
    let start = Instant::now();
    let mut fails = Vec::new();
    for n in 1..=3usize {
        let a1 = heat_invariant_thm31(1, n as u32).unwrap().density;
        if a1 != poly("-V", n) {
            fails.push(format!("a1 in dim {n}: {a1}"));
        }
        let mut expect = poly("1/2*V^2", n);
        expect.add_scaled(&laplacian(n), &rat(-1, 6));
        let a2 = heat_invariant_thm31(2, n as u32).unwrap().density;
        if a2 != expect {
            fails.push(format!("a2 in dim {n}: {a2}"));
        }
    }
    let a2 = heat_invariant_thm31(2, 1).unwrap().density;
    if a2 != poly("1/2*V^2 - 1/6*D[2]V", 1) {
        fails.push(format!("1-D a2: {a2}"));
    }
    let inner = poly("V^3 - 1/2*D[1]V^2 - D[2]V*V + 1/10*D[4]V", 1);
    let a3 = heat_invariant_thm31(3, 1).unwrap().density;
    if a3 != inner.scaled(&rat(-1, 6)) {
        fails.push(format!("1-D a3: {a3}"));
    }
    let e = eps("1/3");
    for j in 1..=2 {
        let a = alpha_density(j, 1, &e).unwrap().density;
        if !a.is_zero() {
            fails.push(format!("alpha{j} for n=1, eps=1/3: {a}"));
        }
    }
    let a3 = alpha_density(3, 1, &e).unwrap().density;
    if a3 != poly("-1/4*D[1]V^2 - 1/3*D[2]V*V + 3/20*D[4]V", 1) {
        fails.push(format!("alpha3 for n=1, eps=1/3: {a3}"));
    }
    report(1, "symbolic examples", start, Duration::from_secs(60), &fails)
}

/// Middle-regime `(j, N)` pairs for `n <= 3`, `eps in {1, 1/2, 1/3}`.
fn middle_cases() -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for e in ["1", "1/2", "1/3"] {
            let depth = eps(e).depth(n);
            for j in 1..=depth {
                if Regime::of(j, depth) == Regime::Middle {
                    out.push((n, depth, j));
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

// Largest order compared symbolically; above it the comparison is done
// after reduction modulo a prime at random points, which is exact with
// overwhelming probability and takes seconds instead of hours.
const SYMBOLIC_ALPHA_MAX: u32 = 6;
const MODULAR_SEEDS: [u64; 3] = [11, 12, 13];

fn criterion_2_route_equivalence() -> bool {
    let start = Instant::now();
    let mut fails = Vec::new();
    for n in 1..=3 {
        for j in 1..=4 {
            let a = heat_invariant_thm31(j, n).unwrap().density;
            let b = heat_invariant_eq23(j, n).unwrap().density;
            if a != b {
                fails.push(format!("a_{j} routes differ in dim {n}"));
            }
        }
    }
    let cases = middle_cases();
    let mut modular = 0;
    for (n, depth, j) in &cases {
        let (n, depth, j) = (*n, *depth, *j);
        if j <= SYMBOLIC_ALPHA_MAX {
            let engine = symbolic_engine(n);
            let x = engine.alpha(j, depth, Route::AlphaDef).unwrap();
            let y = engine.alpha(j, depth, Route::AlphaAltSum).unwrap();
            if x != y {
                fails.push(format!("alpha_{j} routes differ, n={n} N={depth}"));
            }
        } else {
            modular += 1;
            for seed in MODULAR_SEEDS {
                let engine = Engine::new(Specialized::new(n as usize, seed));
                let x = engine.alpha(j, depth, Route::AlphaDef).unwrap();
                let y = engine.alpha(j, depth, Route::AlphaAltSum).unwrap();
                if x != y {
                    fails.push(format!("alpha_{j} routes differ mod p, n={n} N={depth} seed={seed}"));
                }
            }
        }
    }
    println!(
        "    {} middle-regime cases, {} compared modulo p with {} seeds",
        cases.len(),
        modular,
        MODULAR_SEEDS.len()
    );
    report(2, "route equivalence", start, Duration::from_secs(600), &fails)
}

fn criterion_3_vm_xm_diagonals() -> bool {
    let start = Instant::now();
    let mut fails = Vec::new();
    for n in 1..=3 {
        for m in 0..=5 {
            let v = vm_diagonal(m, n).unwrap();
            let x = xm_diagonal(m, n).unwrap();
            let sign = if m % 2 == 0 { rat_int(1) } else { rat_int(-1) };
            if v != x.scaled(&sign) {
                fails.push(format!("m={m} n={n}: {v} vs {x}"));
            }
        }
    }
    report(3, "V_m and X_m diagonals", start, Duration::from_secs(300), &fails)
}

fn random_jet(rng: &mut ChaCha8Rng, n: usize, order: u32) -> Jet {
    let mut terms = Vec::new();
    for _ in 0..3 {
        let mut alpha = vec![0; n];
        if rng.random_bool(0.7) {
            alpha[rng.random_range(0..n)] = 1;
        }
        let mut c = DiffPoly::constant(n, rat(rng.random_range(-5..=5), rng.random_range(1..=4)));
        if rng.random_bool(0.5) {
            let nu: Vec<u32> = (0..n).map(|_| rng.random_range(0..=1)).collect();
            c = c.checked_mul(&DiffPoly::var(MultiIndex::new(&nu))).unwrap();
        }
        terms.push((MultiIndex::new(&alpha), c));
    }
    Jet::from_terms(n, order, terms).unwrap()
}

fn criterion_4_operator_combinatorics() -> bool {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=3usize {
        for m in 0..=6u32 {
            let f = random_jet(&mut rng, n, 2 * m + 1);
            for (name, closed, rec) in [
                ("X", f.apply_xm(m, OperatorRoute::ClosedForm), f.apply_xm(m, OperatorRoute::Recurrence)),
                ("V", f.apply_vm(m, OperatorRoute::ClosedForm), f.apply_vm(m, OperatorRoute::Recurrence)),
            ] {
                if closed.unwrap() != rec.unwrap() {
                    fails.push(format!("{name}_{m} closed form and recurrence differ in dim {n}"));
                }
            }
        }
    }
    // X_0 = I, so the order bound says nothing for m = 0.
    for n in 1..=3usize {
        for m in 1..=6u32 {
            for mu in MultiIndex::all_up_to(n, m) {
                if 2 * mu.order() < m {
                    continue;
                }
                let alpha = mu.doubled();
                let order = alpha.order().max(2 * m);
                let f = Jet::monomial(Symbolic::new(n), alpha, DiffPoly::one(n), order).unwrap();
                let d = f.diagonal_of_xm(m).unwrap();
                if !d.is_zero() {
                    fails.push(format!("X_{m}(z^2mu) at y=x is {d} for mu={:?}", mu.entries()));
                }
            }
        }
    }
    report(4, "operator combinatorics", start, Duration::from_secs(300), &fails)
}

fn criterion_5_trace_oracle() -> bool {
    let start = Instant::now();
    let v = PotentialExpr::parse("exp(-x1^2)", 1).unwrap();
    let reports = trace_comparison(&v, 3, &TraceGrid::default(), (0.02, 0.2), 20).unwrap();
    let pi = std::f64::consts::PI;
    let exact = [-pi.sqrt(), 0.5 * (pi / 2.0).sqrt()];
    let mut fails = Vec::new();
    for (r, (e, rel)) in reports.iter().zip(exact.iter().zip([0.02, 0.10])) {
        println!(
            "    {}: fitted {:.6}, exact {:.6}, relative error {:.3e}",
            r.oracle,
            r.observed,
            e,
            (r.observed - e) / e
        );
        if ((r.observed - e) / e).abs() > rel || (r.target - e).abs() > 1e-8 {
            fails.push(format!("{}: fitted {} vs {e}", r.oracle, r.observed));
        }
    }
    if reports.len() != 2 {
        fails.push("expected two fitted coefficients".into());
    }
    report(5, "heat trace oracle", start, Duration::from_secs(300), &fails)
}

fn criterion_6_feynman_kac() -> bool {
    let start = Instant::now();
    let mut fails = Vec::new();
    let t = 0.05;
    let sampler = BridgeSampler::new(1, 1);
    let v = PotentialExpr::parse("exp(-x1^2)", 1).unwrap();
    let r = fk_comparison(&v, &[0.0], t, &sampler, 3).unwrap();
    let z = (r.observed - r.target) / (r.tolerance / 3.0);
    println!("    exp(-x^2): estimate {:.8}, expansion {:.8}, z = {z:.2}", r.observed, r.target);
    if !r.pass {
        fails.push(format!("exp(-x^2) off by {z:.2} standard errors"));
    }
    for (src, c) in [("0", 0.0), ("3/2", 1.5)] {
        for n in 1..=2usize {
            let v = PotentialExpr::parse(src, n).unwrap();
            let s = BridgeSampler::new(n, 1);
            let x = vec![0.3; n];
            let mc = fk_diagonal(&v, &x, t, &s).unwrap();
            let exact = (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0) * (-c * t).exp();
            let rel = (mc.estimate - exact).abs() / exact;
            if rel > 4.0 * f64::EPSILON {
                fails.push(format!("V={src} in dim {n}: relative error {rel:e}"));
            }
        }
    }
    report(6, "Feynman-Kac oracle", start, Duration::from_secs(300), &fails)
}

fn criterion_7_taylor_matrix() -> bool {
    let start = Instant::now();
    let mut fails = Vec::new();
    for order in 0..=3 {
        for r in taylor_reports(6, order, &[1, 2, 3]).unwrap() {
            if !r.pass {
                fails.push(format!("{} N={order}: {} ({})", r.oracle, r.observed, r.parameters));
            }
        }
    }
    report(7, "non-commutative Taylor remainder", start, Duration::from_secs(60), &fails)
}

fn criterion_8_regimes() -> bool {
    let start = Instant::now();
    let mut fails = Vec::new();
    for n in 1..=8u32 {
        for j in 1..=10u32 {
            let absent = n % 2 == 0 && 2 * j >= n;
            if scattering_factor(j, n).is_none() != absent {
                fails.push(format!("b_{j} presence wrong in dim {n}"));
            }
            if beta_from_alpha(1.0, j, n).is_none() != (n % 2 == 0 || absent) {
                fails.push(format!("beta_{j} presence wrong in dim {n}"));
            }
        }
    }
    // a_j minus the subtracted expansion must cancel below (N+2)/2 and
    // reproduce alpha_j in the middle regime.
    for (n, e) in [(1, "1"), (1, "1/2"), (1, "1/3"), (2, "1"), (2, "1/2"), (3, "1"), (3, "1/2")] {
        let e = eps(e);
        let depth = e.depth(n);
        for j in 1..=depth.min(5) {
            let a = heat_invariant_thm31(j, n).unwrap().density;
            let t = truncated_expansion_coefficient(j, depth, n).unwrap();
            let diff = &a - &t;
            match Regime::of(j, depth) {
                Regime::Zero if !diff.is_zero() => {
                    fails.push(format!("j={j} n={n} eps={e}: expected cancellation, got {diff}"))
                }
                Regime::Middle => {
                    let alpha = alpha_density(j, n, &e).unwrap().density;
                    if alpha != diff {
                        fails.push(format!("j={j} n={n} eps={e}: alpha_j {alpha} vs {diff}"));
                    }
                }
                _ => {}
            }
            if 2 * j < depth + 2 && !alpha_density(j, n, &e).unwrap().density.is_zero() {
                fails.push(format!("alpha_{j} nonzero for n={n} eps={e}"));
            }
        }
    }
    report(8, "regime correctness", start, Duration::from_secs(300), &fails)
}

fn main() {
    let criteria: [(u32, fn() -> bool); 8] = [
        (1, criterion_1_symbolic_examples),
        (2, criterion_2_route_equivalence),
        (3, criterion_3_vm_xm_diagonals),
        (4, criterion_4_operator_combinatorics),
        (5, criterion_5_trace_oracle),
        (6, criterion_6_feynman_kac),
        (7, criterion_7_taylor_matrix),
        (8, criterion_8_regimes),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        let ok = std::panic::catch_unwind(run).unwrap_or_else(|_| {
            println!("FAIL criterion {id}: panicked");
            false
        });
        if !ok {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Oracles here are computed independently of the library.

use std::sync::Arc;
use std::time::{Duration, Instant};

use multisearch_cli::{run_with, template, TemplateKind, EXIT_OK};
use multisearch_core::{
    closure_check, concordance_path, expected_value, fosd_shift, is_member, policy_value, reservation_utility,
    rng_from_seed, run_suite, simulate_search, tabulate_family, dominates, ClosureOperator, ConcordanceCell, Family,
    FunctionClass, Grid, Pmf, Rng, SearchParams, SuiteSpec, TabulatedUtility, TheoremId, UtilitySource,
    DEFAULT_CLASS_TOL,
};
use rand::Rng as _;

const EXAMPLE_MAX_TIME: Duration = Duration::from_millis(1);
const CLOSED_FORM_TOL: f64 = 1e-9;
const SOLVER_AGREEMENT_TOL: f64 = 1e-8;
const SOLVER_MAX_TIME: Duration = Duration::from_secs(1);
const ORACLE_PAIRS: usize = 200;
const ORACLE_MAX_TIME: Duration = Duration::from_secs(30);
const SUITE_CASES: usize = 100;
const SUITE_SLACK: f64 = 1e-8;
const SUITE_MAX_TIME: Duration = Duration::from_secs(60);
const PATH_TOL: f64 = 1e-9;
const CLOSURE_SAMPLES: usize = 50;
const MC_EPISODES: usize = 100_000;
const MC_SIGMAS: f64 = 3.0;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        ("truncation counterexample margins", example_margins),
        ("closed-form reservation utilities", closed_forms),
        ("increasing-order LP matches upper-set enumeration", dominance_oracle),
        ("theorem suites", theorem_suites),
        ("concordance path", concordance_monotone_path),
        ("closure suites", closure_suites),
        ("Monte Carlo consistency", monte_carlo),
        ("byte-identical suite reruns", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail}; {secs:.3}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({detail}; {secs:.3}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn grid(axes: Vec<Vec<f64>>) -> Arc<Grid> {
    Arc::new(Grid::new(axes).unwrap())
}

fn example_margins() -> Verdict {
    let square = grid(vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
    // Canonical order is (1,1), (1,2), (2,1), (2,2).
    let u = TabulatedUtility::new(square.clone(), vec![5.0, -5.0, 14.0, 5.0]).map_err(e)?;
    let truncated = TabulatedUtility::new(square, vec![5.0, 0.0, 14.0, 5.0]).map_err(e)?;
    let start = Instant::now();
    let before = is_member(&u, FunctionClass::Supermodular, DEFAULT_CLASS_TOL).map_err(e)?;
    let after = is_member(&u.truncate(), FunctionClass::Supermodular, DEFAULT_CLASS_TOL).map_err(e)?;
    let elapsed = start.elapsed();
    ensure(u.truncate() == truncated, || "truncation is not max(U, 0)".into())?;
    ensure(before.holds && before.margin == 1.0, || format!("before: {before:?}"))?;
    ensure(!after.holds && after.margin == -4.0, || format!("after: {after:?}"))?;
    ensure(elapsed < EXAMPLE_MAX_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!("margins {} and {}", before.margin, after.margin))
}

/// Exact root of `t = (1−β)γ + β·E[max(U, t)]` by scanning the breakpoints
/// of the piecewise-linear map.
fn reservation_oracle(values: &[f64], masses: &[f64], beta: f64, gamma: f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| masses[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    // For t between consecutive support values, with A the offers above t:
    // t(1 − β(1 − p_A)) = (1−β)γ + β·Σ_A p·U.
    let (mut p_above, mut sum_above) = (0.0, 0.0);
    for k in 0..=order.len() {
        let t = ((1.0 - beta) * gamma + beta * sum_above) / (1.0 - beta * (1.0 - p_above));
        let upper = if k == 0 { f64::INFINITY } else { values[order[k - 1]] };
        let lower = if k == order.len() { f64::NEG_INFINITY } else { values[order[k]] };
        if t >= lower && t <= upper {
            return t;
        }
        if k < order.len() {
            p_above += masses[order[k]];
            sum_above += masses[order[k]] * values[order[k]];
        }
    }
    unreachable!("the map always crosses the diagonal")
}

fn closed_forms() -> Verdict {
    let start = Instant::now();
    let point = grid(vec![vec![3.0]]);
    let line = grid(vec![vec![0.0, 2.0]]);
    let linear = Family::Linear { weights: vec![1.0] };
    let cases = [
        (Pmf::uniform(point.clone()), tabulate_family(&linear, point).map_err(e)?, SearchParams::new(0.5, 1.0), 2.0),
        (Pmf::uniform(line.clone()), tabulate_family(&linear, line.clone()).map_err(e)?, SearchParams::new(0.5, 0.5), 1.0),
        (
            Pmf::new(line.clone(), vec![0.25, 0.75]).map_err(e)?,
            tabulate_family(&linear, line).map_err(e)?,
            SearchParams::new(0.5, 0.5),
            8.0 / 7.0,
        ),
    ];
    for (pmf, u, params, want) in cases {
        let sol = reservation_utility(&pmf, &u, &params.map_err(e)?).map_err(e)?;
        for got in [sol.reservation_utility, sol.bisection_estimate] {
            ensure((got - want).abs() <= CLOSED_FORM_TOL, || format!("{got} vs {want}"))?;
        }
    }

    let mut rng = rng_from_seed(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..5.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let mut axis = values.clone();
        axis.sort_by(f64::total_cmp);
        axis.dedup();
        let g = grid(vec![axis]);
        let mut masses = vec![0.0; g.len()];
        let total: f64 = weights.iter().sum();
        for (v, w) in values.iter().zip(&weights) {
            masses[g.locate(&[*v]).unwrap()] += w / total;
        }
        let pmf = Pmf::new(g.clone(), masses.clone()).map_err(e)?;
        let u = tabulate_family(&linear, g.clone()).map_err(e)?;
        let beta = rng.random_range(0.05..0.95);
        let gamma = rng.random_range(0.1..4.0);
        let sol = reservation_utility(&pmf, &u, &SearchParams::new(beta, gamma).map_err(e)?).map_err(e)?;
        let want = reservation_oracle(u.values(), &masses, beta, gamma);
        for got in [sol.reservation_utility, sol.bisection_estimate] {
            worst = worst.max((got - want).abs());
        }
        worst = worst.max((sol.reservation_utility - sol.bisection_estimate).abs());
    }
    ensure(worst <= SOLVER_AGREEMENT_TOL, || format!("random disagreement {worst:e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < SOLVER_MAX_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!("2, 1, 8/7 matched; worst random gap {worst:.1e}"))
}

/// Dominance on the increasing class by enumerating every upper set of a
/// 3×3 grid.
fn upper_set_dominance(f: &[f64], g: &[f64], tol: f64) -> bool {
    let above = |a: usize, b: usize| a / 3 <= b / 3 && a % 3 <= b % 3;
    (0u32..1 << 9).all(|set| {
        let member = |i: usize| set >> i & 1 == 1;
        let upward = (0..9).all(|a| !member(a) || (0..9).all(|b| !above(a, b) || member(b)));
        !upward || (0..9).filter(|&i| member(i)).map(|i| f[i] - g[i]).sum::<f64>() >= -tol
    })
}

fn random_pmf(g: &Arc<Grid>, rng: &mut Rng) -> Pmf {
    let w: Vec<f64> = (0..g.len()).map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
    let w = if w.iter().all(|&x| x == 0.0) { vec![1.0; g.len()] } else { w };
    Pmf::normalized(g.clone(), w).unwrap()
}

fn dominance_oracle() -> Verdict {
    let start = Instant::now();
    let g3 = grid(vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]]);
    let mut rng = rng_from_seed(77);
    let (mut agree, mut holds) = (0, 0);
    for i in 0..ORACLE_PAIRS {
        let g = random_pmf(&g3, &mut rng);
        let f = if i % 2 == 0 {
            // Upward mass moves produce dominating pairs.
            let mut f = g.clone();
            for _ in 0..rng.random_range(1..4) {
                let to = rng.random_range(1..9);
                let from = loop {
                    let from = rng.random_range(0..9);
                    if g3.precedes(from, to) && from != to {
                        break from;
                    }
                };
                let eps = f.mass(from) * rng.random_range(0.0..=1.0);
                f = fosd_shift(&f, from, to, eps).map_err(e)?;
            }
            f
        } else {
            random_pmf(&g3, &mut rng)
        };
        let lp = dominates(&f, &g, FunctionClass::Increasing, 1e-9).map_err(e)?;
        let oracle = upper_set_dominance(f.masses(), g.masses(), 1e-9);
        agree += usize::from(lp.holds() == oracle);
        holds += usize::from(oracle);
    }
    let elapsed = start.elapsed();
    ensure(agree == ORACLE_PAIRS, || format!("{agree}/{ORACLE_PAIRS} agree"))?;
    ensure(elapsed < ORACLE_MAX_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!("{agree}/{ORACLE_PAIRS} agree, {holds} dominating"))
}

fn theorem_suites() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    for theorem in TheoremId::ALL {
        let shape = multisearch_cli::commands::default_shape(theorem);
        let spec = SuiteSpec::new(theorem, shape, SUITE_CASES, 1);
        let suite = run_suite(&spec, 0).map_err(e)?;
        let holding = suite
            .records
            .iter()
            .filter(|r| !r.report.vacuous)
            .filter(|r| match (r.report.u_f, r.report.u_g) {
                (Some(f), Some(g)) => f >= g - SUITE_SLACK,
                _ => false,
            })
            .count();
        ensure(holding == SUITE_CASES, || {
            format!("{theorem}: {holding}/{SUITE_CASES} hold ({} vacuous)", suite.summary.vacuous)
        })?;
        parts.push(format!("{theorem} {holding}/{SUITE_CASES}"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < SUITE_MAX_TIME, || format!("took {elapsed:?}"))?;
    Ok(parts.join(", "))
}

fn concordance_monotone_path() -> Verdict {
    let square = grid(vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
    let uniform = Pmf::uniform(square.clone());
    let product = tabulate_family(&Family::Product, square.clone()).map_err(e)?;
    let cell = ConcordanceCell::new(&square, 0, 3).map_err(e)?;
    let deltas = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25];
    let params = SearchParams::new(0.5, 1.0).map_err(e)?;
    let path = concordance_path(&uniform, &cell, &product, &params, &deltas).map_err(e)?;
    for w in path.windows(2) {
        ensure(w[1].reservation_utility >= w[0].reservation_utility - PATH_TOL, || format!("u_F drops: {w:?}"))?;
        ensure(w[1].acceptance_size <= w[0].acceptance_size, || format!("acceptance grows: {w:?}"))?;
    }
    let first = &path[0];
    let last = &path[path.len() - 1];
    Ok(format!(
        "u_F {:.6} -> {:.6}, acceptance {} -> {}",
        first.reservation_utility, last.reservation_utility, first.acceptance_size, last.acceptance_size
    ))
}

fn closure_suites() -> Verdict {
    let closed = [
        FunctionClass::Increasing,
        FunctionClass::Convex,
        FunctionClass::ComponentwiseConvex,
        FunctionClass::IncreasingSupermodular,
        FunctionClass::IncreasingUltramodular,
    ];
    let mut checked = 0;
    for class in closed {
        for op in [ClosureOperator::Truncate, ClosureOperator::Affine] {
            let r = closure_check(class, op, CLOSURE_SAMPLES, 3).map_err(e)?;
            ensure(r.preserved == CLOSURE_SAMPLES && r.violations.is_empty(), || {
                format!("{} under {}: {}/{}", class.as_str(), op.as_str(), r.preserved, r.samples)
            })?;
            checked += 1;
        }
    }
    let r = closure_check(FunctionClass::Supermodular, ClosureOperator::Truncate, CLOSURE_SAMPLES, 3).map_err(e)?;
    let c = r.counterexample.ok_or("no counterexample run for supermodular truncation")?;
    ensure(c.violation_detected && c.margin_before == 1.0 && c.margin_after == -4.0, || format!("{c:?}"))?;
    Ok(format!("{checked} class/operator pairs at {CLOSURE_SAMPLES}/{CLOSURE_SAMPLES}; counterexample detected"))
}

fn monte_carlo() -> Verdict {
    let line = grid(vec![vec![0.0, 2.0]]);
    let pmf = Pmf::uniform(line.clone());
    let u = tabulate_family(&Family::Linear { weights: vec![1.0] }, line).map_err(e)?;
    let params = SearchParams::new(0.5, 0.5).map_err(e)?;
    let sol = reservation_utility(&pmf, &u, &params).map_err(e)?;
    // V = max(U, 1)/(1 − β): 2 at U = 0 and 4 at U = 2.
    let analytic = 0.5 * 2.0 + 0.5 * 4.0;
    ensure((expected_value(&sol, &pmf).map_err(e)? - analytic).abs() < 1e-9, || "E[V] mismatch".into())?;
    let best = simulate_search(&pmf, &u, &params, sol.reservation_utility, 9, MC_EPISODES).map_err(e)?;
    let z = (best.mean - analytic) / best.std_error;
    ensure(z.abs() <= MC_SIGMAS, || format!("optimal policy z = {z:.3}"))?;
    for offset in [-0.5, 0.5] {
        let t = sol.reservation_utility + offset;
        let other = simulate_search(&pmf, &u, &params, t, 9, MC_EPISODES).map_err(e)?;
        let se = (best.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        ensure(other.mean - best.mean <= MC_SIGMAS * se, || format!("threshold {t} beats u_F: {}", other.mean))?;
        ensure(policy_value(&pmf, &u, &params, t).map_err(e)? <= analytic + 1e-9, || "policy value above E[V]".into())?;
    }
    Ok(format!("mean {:.5} vs {analytic}, z = {z:.3}", best.mean))
}

fn determinism() -> Verdict {
    let dir = tempfile::TempDir::new().map_err(e)?;
    let scenario = dir.path().join("suite.toml");
    let mut suite = template(TemplateKind::Suite);
    if let Some(s) = suite.suite.as_mut() {
        s.theorem = Some(TheoremId::T3);
        s.shape = Some(vec![3, 3]);
        s.cases = Some(40);
        s.utility = Some(UtilitySource::RandomMember);
    }
    std::fs::write(&scenario, suite.to_toml().map_err(e)?).map_err(e)?;
    let mut outputs = Vec::new();
    for (i, (format, jobs)) in [("csv", "1"), ("csv", "0"), ("json-lines", "2"), ("json-lines", "0")].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let argv = ["multisearch", "verify", scenario.to_str().unwrap(), "--seed", "42", "--jobs", jobs, "--format", format];
        let argv = argv.iter().copied().chain(["--out", out.to_str().unwrap()]);
        let code = run_with(argv, &mut std::io::sink(), &mut std::io::sink());
        ensure(code == EXIT_OK, || format!("suite exited {code}"))?;
        outputs.push(std::fs::read(&out).map_err(e)?);
    }
    ensure(outputs[0] == outputs[1], || "csv reruns differ".into())?;
    ensure(outputs[2] == outputs[3], || "json-lines reruns differ".into())?;
    Ok(format!("{} + {} bytes identical", outputs[0].len(), outputs[2].len()))
}

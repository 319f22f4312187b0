use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use multisearch_core::statics::ClosureOperator;
use multisearch_core::{
    closure_check, common_grid, dominates, dominates_increasing_bruteforce, expected_value, generate_case,
    policy_value, reservation_utility, run_suite, simulate_search, verify_theorem_with, Family, FunctionClass, Grid,
    SearchParams, SuiteSpec, TabulatedUtility, TheoremCase, TheoremId, UtilitySource, VerificationReport,
    DEFAULT_CLASS_TOL,
};

use crate::report::{emit, format_point, table, Report, Value};
use crate::scenario::{
    resolve_params, template, ExpectSpec, GridSpec, OptionsSpec, Overrides, ParamsSpec, PmfSpec, Scenario,
};
use crate::{CommonArgs, Command};

/// Whether every verdict of a successful run passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
}

pub struct Run {
    pub report: Report,
    pub passed: bool,
}

pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<Outcome> {
    let (run, args) = match command {
        Command::Template { kind, out } => {
            let text = template(*kind).to_toml()?;
            match out {
                Some(path) => write_file(path, text.as_bytes())?,
                None => stdout.write_all(text.as_bytes())?,
            }
            return Ok(Outcome { passed: true });
        }
        Command::Solve(a) => (solve(a)?, a),
        Command::Dominate(a) => (dominate(a)?, a),
        Command::Verify(a) => (verify(a)?, a),
        Command::Closure(a) => (closure(a)?, a),
        Command::Simulate(a) => (simulate(a)?, a),
    };
    stdout.write_all(table(&run.report).as_bytes())?;
    if let Some(path) = &args.out {
        let mut buf = Vec::new();
        emit(&run.report, args.format, &mut buf)?;
        write_file(path, &buf)?;
    }
    Ok(Outcome { passed: run.passed })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn load(args: &CommonArgs) -> Result<Scenario> {
    match &args.scenario {
        Some(path) => Scenario::load(path),
        None => Ok(Scenario::empty()),
    }
}

fn overrides(args: &CommonArgs) -> Overrides {
    Overrides { beta: args.beta, gamma: args.gamma, tol: args.tol }
}

fn class_tol(options: &OptionsSpec) -> Result<f64> {
    let tol = options.class_tol.unwrap_or(DEFAULT_CLASS_TOL);
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(anyhow!("options.class_tol: must be positive and finite, got {tol}"))
    }
}

fn echo_source(report: &mut Report, args: &CommonArgs) {
    let source = args.scenario.as_ref().map_or_else(|| "-".to_owned(), |p| p.display().to_string());
    report.config("scenario", source);
}

fn echo_params(report: &mut Report, params: &SearchParams) {
    report.config("beta", params.beta);
    report.config("gamma", params.gamma);
    report.config("tol", params.tol);
}

fn acceptance_text(grid: &Grid, nodes: &[usize]) -> String {
    let points: Vec<String> = nodes.iter().map(|&n| format_point(&grid.point(n))).collect();
    format!("{{{}}}", points.join(", "))
}

/// Applies `[expect]`; without one, `default_ok` decides.
fn check_expect(
    report: &mut Report,
    expect: Option<&ExpectSpec>,
    verdict: &str,
    u_f: Option<f64>,
    u_g: Option<f64>,
    default_ok: bool,
) -> bool {
    let Some(expect) = expect else {
        return default_ok;
    };
    let tol = expect.tolerance.unwrap_or(1e-9);
    let mut ok = match &expect.verdict {
        Some(v) => v.eq_ignore_ascii_case(verdict),
        None => default_ok,
    };
    if !ok {
        report.notes.push(format!("expected verdict {:?}, got {verdict}", expect.verdict.as_deref().unwrap_or("pass")));
    }
    for (name, want, got) in [("u_F", expect.u_f, u_f), ("u_G", expect.u_g, u_g)] {
        if let Some(want) = want {
            let met = got.is_some_and(|g| (g - want).abs() <= tol);
            if !met {
                report.notes.push(format!("expected {name} = {want} (±{tol}), got {got:?}"));
            }
            ok &= met;
        }
    }
    report.summary("expectation", if ok { "met" } else { "violated" });
    ok
}

fn solve(args: &CommonArgs) -> Result<Run> {
    let s = load(args)?;
    let pmf = s.pmf("f")?;
    let u = s.utility_on(pmf.grid())?;
    let params = resolve_params(s.params.as_ref(), &overrides(args), "params")?;
    let sol = reservation_utility(&pmf, &u, &params)?;
    let ev = expected_value(&sol, &pmf)?;

    let mut report = Report::new("solve", vec!["node", "point", "mass", "utility", "value", "accept"]);
    echo_source(&mut report, args);
    echo_params(&mut report, &params);
    report.summary("u_F", sol.reservation_utility);
    report.summary("bisection_estimate", sol.bisection_estimate);
    report.summary("residual", sol.residual);
    report.summary("iterations", sol.iterations);
    report.summary("bisection_iterations", sol.bisection_iterations);
    report.summary("expected_value", ev);
    report.summary("acceptance_set", acceptance_text(pmf.grid(), &sol.acceptance));
    for node in 0..pmf.grid().len() {
        report.row(vec![
            node.into(),
            format_point(&pmf.grid().point(node)).into(),
            pmf.mass(node).into(),
            u.value(node).into(),
            sol.value_at(node).into(),
            sol.accepts(node).into(),
        ]);
    }
    let passed = check_expect(&mut report, s.expect.as_ref(), "pass", Some(sol.reservation_utility), None, true);
    Ok(Run { report, passed })
}

fn dominate(args: &CommonArgs) -> Result<Run> {
    let s = load(args)?;
    let f = s.pmf("f")?;
    let g = s.pmf("g")?;
    let class = args.class.or(s.options.class).ok_or_else(|| anyhow!("options.class: missing (or pass --class)"))?;
    let tol = class_tol(&s.options)?;
    let r = dominates(&f, &g, class, tol)?;
    let (grid, f, g) = common_grid(&f, &g)?;

    let mut report = Report::new("dominate", vec!["node", "point", "f_mass", "g_mass", "witness"]);
    echo_source(&mut report, args);
    report.config("class", class.as_str());
    report.config("class_tol", tol);
    report.summary("verdict", r.verdict.as_str());
    report.summary("lp_optimum", r.lp_optimum);
    report.summary("witness_gap", Value::opt_num(r.witness_gap));
    report.summary("pivots", r.pivots);
    if let Some(reason) = &r.reason {
        report.summary("reason", reason.as_str());
    }
    if class == FunctionClass::Increasing {
        if let Ok(holds) = dominates_increasing_bruteforce(&f, &g, tol) {
            report.summary("upper_set_check", if holds { "dominates" } else { "fails" });
        }
    }
    for node in 0..grid.len() {
        let w = r.witness.as_ref().map_or(Value::Empty, |w| w.value(node).into());
        report.row(vec![node.into(), format_point(&grid.point(node)).into(), f.mass(node).into(), g.mass(node).into(), w]);
    }
    let default_ok = r.holds();
    let passed = check_expect(&mut report, s.expect.as_ref(), r.verdict.as_str(), None, None, default_ok);
    Ok(Run { report, passed })
}

const SUITE_COLUMNS: [&str; 7] = ["case_id", "theorem", "premise_dom", "premise_mem", "u_F", "u_G", "verdict"];

fn suite_row(case_id: usize, r: &VerificationReport) -> Vec<Value> {
    vec![
        case_id.into(),
        r.theorem.as_str().into(),
        r.premise_dominance.verdict.as_str().into(),
        r.premise_membership.into(),
        Value::opt_num(r.u_f),
        Value::opt_num(r.u_g),
        r.outcome().as_str().into(),
    ]
}

fn verify(args: &CommonArgs) -> Result<Run> {
    let s = load(args)?;
    if s.f.is_some() || s.g.is_some() {
        verify_case(args, &s)
    } else {
        verify_suite(args, &s)
    }
}

fn theorem_of(args: &CommonArgs, s: &Scenario) -> Result<TheoremId> {
    args.theorem
        .or(s.suite.as_ref().and_then(|x| x.theorem))
        .or(s.options.theorem)
        .ok_or_else(|| anyhow!("options.theorem: missing (or pass --theorem)"))
}

fn describe_case(report: &mut Report, r: &VerificationReport) {
    report.summary("class", r.theorem.class().as_str());
    report.summary("premise_dominance", r.premise_dominance.verdict.as_str());
    report.summary("lp_optimum", r.premise_dominance.lp_optimum);
    report.summary("premise_membership", r.premise_membership);
    report.summary("membership_margin", r.membership.margin);
    report.summary("u_F", Value::opt_num(r.u_f));
    report.summary("u_G", Value::opt_num(r.u_g));
    report.summary("outcome", r.outcome().as_str());
    if let Some(reason) = &r.reason {
        report.summary("reason", reason.as_str());
    }
}

fn verify_case(args: &CommonArgs, s: &Scenario) -> Result<Run> {
    let theorem = theorem_of(args, s)?;
    let (grid, f, g) = common_grid(&s.pmf("f")?, &s.pmf("g")?)?;
    let utility = s.utility_on(&grid)?;
    let params = resolve_params(s.params.as_ref(), &overrides(args), "params")?;
    let tol = class_tol(&s.options)?;
    let case = TheoremCase { theorem, f, g, utility, params };
    let r = verify_theorem_with(&case, tol)?;

    let mut report = Report::new("verify", SUITE_COLUMNS.to_vec());
    echo_source(&mut report, args);
    report.config("theorem", theorem.as_str());
    echo_params(&mut report, &case.params);
    report.config("class_tol", tol);
    describe_case(&mut report, &r);
    report.row(suite_row(0, &r));
    let default_ok = r.outcome() != multisearch_core::CaseOutcome::Fail;
    let passed = check_expect(&mut report, s.expect.as_ref(), r.outcome().as_str(), r.u_f, r.u_g, default_ok);
    Ok(Run { report, passed })
}

/// Shapes that give each generator room to act.
pub fn default_shape(theorem: TheoremId) -> Vec<usize> {
    match theorem {
        TheoremId::T2a => vec![6],
        TheoremId::T2b => vec![5],
        TheoremId::T2c => vec![4, 3],
        TheoremId::T3 | TheoremId::T4 => vec![3, 3],
    }
}

pub fn suite_spec(args: &CommonArgs, s: &Scenario) -> Result<SuiteSpec> {
    let theorem = theorem_of(args, s)?;
    let section = s.suite.clone();
    let section = section.as_ref();
    let explicit_params = section.and_then(|x| x.params.as_ref()).or(s.params.as_ref());
    let params = if explicit_params.is_some() || args.beta.is_some() || args.gamma.is_some() {
        Some(resolve_params(explicit_params, &overrides(args), "suite.params")?)
    } else {
        None
    };
    let spec = SuiteSpec {
        theorem,
        shape: section.and_then(|x| x.shape.clone()).unwrap_or_else(|| default_shape(theorem)),
        cases: args.cases.or(section.and_then(|x| x.cases)).unwrap_or(100),
        seed: args.seed.or(s.options.seed).unwrap_or(0),
        params,
        utility: section.and_then(|x| x.utility.clone()).unwrap_or(UtilitySource::RandomMember),
        transfers: section.and_then(|x| x.transfers).unwrap_or(1),
        class_tol: class_tol(&s.options)?,
    };
    spec.validate().map_err(|e| anyhow!("suite: {e}"))?;
    Ok(spec)
}

fn echo_suite(report: &mut Report, args: &CommonArgs, spec: &SuiteSpec) {
    echo_source(report, args);
    report.config("theorem", spec.theorem.as_str());
    report.config("class", spec.theorem.class().as_str());
    let shape: Vec<String> = spec.shape.iter().map(usize::to_string).collect();
    report.config("shape", shape.join("x"));
    report.config("cases", spec.cases);
    report.config("seed", spec.seed);
    report.config("transfers", spec.transfers);
    let source = match &spec.utility {
        UtilitySource::RandomMember => "random_member".to_owned(),
        UtilitySource::Family { family } => family.name().to_owned(),
    };
    report.config("utility", source);
    match &spec.params {
        Some(p) => echo_params(report, p),
        None => report.config("params", "random"),
    }
    report.config("class_tol", spec.class_tol);
}

/// A standalone scenario reproducing one theorem case.
pub fn case_scenario(case: &TheoremCase) -> Scenario {
    let mut s = Scenario::empty();
    s.grid = Some(GridSpec { axes: case.utility.grid().axes().to_vec() });
    s.f = Some(PmfSpec { masses: Some(case.f.masses().to_vec()), ..PmfSpec::default() });
    s.g = Some(PmfSpec { masses: Some(case.g.masses().to_vec()), ..PmfSpec::default() });
    s.utility = Some(Family::Custom { values: case.utility.values().to_vec() });
    s.params = Some(ParamsSpec { beta: Some(case.params.beta), gamma: Some(case.params.gamma), tol: Some(case.params.tol) });
    s.options.theorem = Some(case.theorem);
    s
}

fn verify_suite(args: &CommonArgs, s: &Scenario) -> Result<Run> {
    let spec = suite_spec(args, s)?;
    if let Some(case_id) = args.case {
        return replay_case(args, s, &spec, case_id);
    }
    let suite = run_suite(&spec, args.jobs)?;

    let mut report = Report::new("suite", SUITE_COLUMNS.to_vec());
    echo_suite(&mut report, args, &spec);
    report.summary("pass", suite.summary.pass);
    report.summary("fail", suite.summary.fail);
    report.summary("vacuous", suite.summary.vacuous);
    for record in &suite.records {
        report.row(suite_row(record.case_id, &record.report));
    }
    for record in suite.failures() {
        report.notes.push(format!("case {} failed; rerun it alone with --case {}", record.case_id, record.case_id));
        report.replays.push(serde_json::json!({
            "case_id": record.case_id,
            "seed": record.seed,
            "scenario": serde_json::to_value(case_scenario(&record.case))?,
        }));
    }
    let default_ok = suite.summary.fail == 0;
    let verdict = if default_ok { "pass" } else { "fail" };
    let passed = check_expect(&mut report, s.expect.as_ref(), verdict, None, None, default_ok);
    Ok(Run { report, passed })
}

fn replay_case(args: &CommonArgs, s: &Scenario, spec: &SuiteSpec, case_id: usize) -> Result<Run> {
    if case_id >= spec.cases {
        return Err(anyhow!("--case {case_id} is outside the suite of {} cases", spec.cases));
    }
    let case = generate_case(spec, case_id)?;
    let r = verify_theorem_with(&case, spec.class_tol)?;

    let mut report = Report::new("case", vec!["node", "point", "f_mass", "g_mass", "utility"]);
    echo_suite(&mut report, args, spec);
    report.config("case", case_id);
    report.summary("beta", case.params.beta);
    report.summary("gamma", case.params.gamma);
    describe_case(&mut report, &r);
    let grid = case.utility.grid();
    for node in 0..grid.len() {
        report.row(vec![
            node.into(),
            format_point(&grid.point(node)).into(),
            case.f.mass(node).into(),
            case.g.mass(node).into(),
            case.utility.value(node).into(),
        ]);
    }
    report.replays.push(serde_json::json!({
        "case_id": case_id,
        "seed": multisearch_core::derive_seed(spec.seed, case_id as u64),
        "scenario": serde_json::to_value(case_scenario(&case))?,
    }));
    let default_ok = r.outcome() != multisearch_core::CaseOutcome::Fail;
    let passed = check_expect(&mut report, s.expect.as_ref(), r.outcome().as_str(), r.u_f, r.u_g, default_ok);
    Ok(Run { report, passed })
}

/// Classes closed under truncation (and hence clamping); every class is
/// closed under positive affine maps.
pub fn expected_closed(class: FunctionClass, operator: ClosureOperator) -> bool {
    operator == ClosureOperator::Affine || !matches!(class, FunctionClass::Supermodular | FunctionClass::Ultramodular)
}

fn closure(args: &CommonArgs) -> Result<Run> {
    let s = load(args)?;
    let classes = match args.class.or(s.options.class) {
        Some(c) => vec![c],
        None => FunctionClass::ALL.to_vec(),
    };
    let operators = match args.operator.or(s.options.operator) {
        Some(op) => vec![op],
        None => ClosureOperator::ALL.to_vec(),
    };
    let samples = args.samples.or(s.options.samples).unwrap_or(50);
    if samples == 0 {
        return Err(anyhow!("options.samples: must be at least 1"));
    }
    let seed = args.seed.or(s.options.seed).unwrap_or(0);

    let mut report = Report::new(
        "closure",
        vec!["class", "operator", "samples", "preserved", "worst_margin", "expected_closed", "counterexample", "verdict"],
    );
    echo_source(&mut report, args);
    report.config("samples", samples);
    report.config("seed", seed);
    let mut passed = true;
    for &class in &classes {
        for &op in &operators {
            let r = closure_check(class, op, samples, seed)?;
            let closed = expected_closed(class, op);
            let worst = r.violations.iter().map(|v| v.membership.margin).fold(None, |m: Option<f64>, x| {
                Some(m.map_or(x, |m| m.min(x)))
            });
            let (counterexample, detected) = match &r.counterexample {
                Some(c) if c.violation_detected => ("detected", true),
                Some(_) => ("missed", false),
                None => ("", true),
            };
            let verdict = if closed {
                if r.violations.is_empty() { "pass" } else { "fail" }
            } else if r.counterexample.is_some() {
                if detected { "pass" } else { "fail" }
            } else {
                "info"
            };
            passed &= verdict != "fail";
            report.row(vec![
                class.as_str().into(),
                op.as_str().into(),
                r.samples.into(),
                r.preserved.into(),
                Value::opt_num(worst),
                closed.into(),
                counterexample.into(),
                verdict.into(),
            ]);
        }
    }
    let verdict = if passed { "pass" } else { "fail" };
    let passed = check_expect(&mut report, s.expect.as_ref(), verdict, None, None, passed);
    Ok(Run { report, passed })
}

/// Allowed Monte Carlo deviation in standard errors.
pub const MC_SIGMAS: f64 = 3.0;

fn simulate(args: &CommonArgs) -> Result<Run> {
    let s = load(args)?;
    let pmf = s.pmf("f")?;
    let u: TabulatedUtility = s.utility_on(pmf.grid())?;
    let params = resolve_params(s.params.as_ref(), &overrides(args), "params")?;
    let episodes = args.episodes.or(s.options.episodes).unwrap_or(100_000);
    let seed = args.seed.or(s.options.seed).unwrap_or(0);
    let sol = reservation_utility(&pmf, &u, &params)?;
    let ev = expected_value(&sol, &pmf)?;
    let extra = if args.thresholds.is_empty() { &s.options.thresholds } else { &args.thresholds };

    let mut report = Report::new(
        "simulate",
        vec!["threshold", "mean", "std_error", "analytic", "z", "mean_offers", "truncated", "verdict"],
    );
    echo_source(&mut report, args);
    echo_params(&mut report, &params);
    report.config("episodes", episodes);
    report.config("seed", seed);
    report.summary("u_F", sol.reservation_utility);
    report.summary("expected_value", ev);

    let optimal = simulate_search(&pmf, &u, &params, sol.reservation_utility, seed, episodes)?;
    report.summary("horizon", optimal.horizon);
    let mut passed = true;
    for (i, &threshold) in std::iter::once(&sol.reservation_utility).chain(extra).enumerate() {
        let stats = if i == 0 { optimal.clone() } else { simulate_search(&pmf, &u, &params, threshold, seed, episodes)? };
        let analytic = policy_value(&pmf, &u, &params, threshold)?;
        let z = (stats.std_error > 0.0).then(|| (stats.mean - analytic) / stats.std_error);
        let ok = if i == 0 {
            (stats.mean - ev).abs() <= MC_SIGMAS * stats.std_error + 1e-9
        } else {
            let se = (stats.std_error.powi(2) + optimal.std_error.powi(2)).sqrt();
            stats.mean - optimal.mean <= MC_SIGMAS * se + 1e-9
        };
        passed &= ok;
        report.row(vec![
            threshold.into(),
            stats.mean.into(),
            stats.std_error.into(),
            analytic.into(),
            Value::opt_num(z),
            stats.mean_offers.into(),
            stats.truncated.into(),
            if ok { "pass" } else { "fail" }.into(),
        ]);
    }
    let verdict = if passed { "pass" } else { "fail" };
    let passed = check_expect(&mut report, s.expect.as_ref(), verdict, Some(sol.reservation_utility), None, passed);
    Ok(Run { report, passed })
}

//! Executable comparative statics: premise checks, reservation-utility
//! comparisons and seeded batch suites over generated cases.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dominance::{
    concordance_transfer, dominates, fosd_shift, mean_preserving_spread, ConcordanceCell, DominanceResult, Verdict,
};
use crate::error::{Error, Result};
use crate::lattice::{Grid, Pmf, SearchParams};
use crate::reservation::reservation_utility;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::utility::{
    is_member, random_member, tabulate_family, Family, FunctionClass, Membership, TabulatedUtility, Witness,
    DEFAULT_CLASS_TOL,
};

/// Conclusion slack in units of the solver tolerance.
pub const CONCLUSION_SLACK: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    T2a,
    T2b,
    T2c,
    T3,
    T4,
}

impl TheoremId {
    pub const ALL: [TheoremId; 5] = [TheoremId::T2a, TheoremId::T2b, TheoremId::T2c, TheoremId::T3, TheoremId::T4];

    /// Class used for both the dominance and the membership premise.
    pub fn class(self) -> FunctionClass {
        match self {
            TheoremId::T2a => FunctionClass::Increasing,
            TheoremId::T2b => FunctionClass::Convex,
            TheoremId::T2c => FunctionClass::ComponentwiseConvex,
            TheoremId::T3 => FunctionClass::IncreasingSupermodular,
            TheoremId::T4 => FunctionClass::IncreasingUltramodular,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::T2a => "T2a",
            TheoremId::T2b => "T2b",
            TheoremId::T2c => "T2c",
            TheoremId::T3 => "T3",
            TheoremId::T4 => "T4",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown theorem `{s}` (expected T2a, T2b, T2c, T3 or T4)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCase {
    pub theorem: TheoremId,
    pub f: Pmf,
    pub g: Pmf,
    pub utility: TabulatedUtility,
    pub params: SearchParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseOutcome {
    Pass,
    Fail,
    Vacuous,
}

impl CaseOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseOutcome::Pass => "pass",
            CaseOutcome::Fail => "fail",
            CaseOutcome::Vacuous => "vacuous",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub theorem: TheoremId,
    pub premise_dominance: DominanceResult,
    pub premise_membership: bool,
    pub membership: Membership,
    /// Reservation utilities; `None` when a failed premise skipped the solve.
    pub u_f: Option<f64>,
    pub u_g: Option<f64>,
    pub conclusion_holds: bool,
    pub vacuous: bool,
    pub reason: Option<String>,
}

impl VerificationReport {
    pub fn outcome(&self) -> CaseOutcome {
        match (self.vacuous, self.conclusion_holds) {
            (true, _) => CaseOutcome::Vacuous,
            (false, true) => CaseOutcome::Pass,
            (false, false) => CaseOutcome::Fail,
        }
    }
}

/// [`verify_theorem_with`] at the default class tolerance.
pub fn verify_theorem(case: &TheoremCase) -> Result<VerificationReport> {
    verify_theorem_with(case, DEFAULT_CLASS_TOL)
}

/// Checks both premises, then compares the reservation utilities when they
/// hold. The pmfs are embedded into the utility's grid.
pub fn verify_theorem_with(case: &TheoremCase, class_tol: f64) -> Result<VerificationReport> {
    case.params.validate()?;
    let class = case.theorem.class();
    let grid = case.utility.grid();
    let f = case.f.embed(grid)?;
    let g = case.g.embed(grid)?;

    let premise_dominance = dominates(&f, &g, class, class_tol)?;
    let membership = is_member(&case.utility, class, class_tol)?;
    let mut report = VerificationReport {
        theorem: case.theorem,
        premise_membership: membership.holds,
        membership,
        u_f: None,
        u_g: None,
        conclusion_holds: false,
        vacuous: true,
        reason: None,
        premise_dominance,
    };
    report.reason = match report.premise_dominance.verdict {
        Verdict::Fails => Some(format!("F does not dominate G on {class}")),
        Verdict::Inconclusive => Some(format!(
            "dominance inconclusive: {}",
            report.premise_dominance.reason.as_deref().unwrap_or("unknown")
        )),
        Verdict::Dominates if !report.premise_membership => Some(format!("utility is not {class}")),
        Verdict::Dominates => None,
    };
    if report.reason.is_some() {
        return Ok(report);
    }

    let u_f = reservation_utility(&f, &case.utility, &case.params)?.reservation_utility;
    let u_g = reservation_utility(&g, &case.utility, &case.params)?.reservation_utility;
    report.u_f = Some(u_f);
    report.u_g = Some(u_g);
    report.vacuous = false;
    report.conclusion_holds = u_f >= u_g - CONCLUSION_SLACK * case.params.tol;
    if !report.conclusion_holds {
        report.reason = Some(format!("u_F = {u_f} < u_G = {u_g}"));
    }
    Ok(report)
}

/// Where the utility of a generated case comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum UtilitySource {
    /// A verified random member of the theorem's class.
    RandomMember,
    Family { family: Family },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub theorem: TheoremId,
    /// Points per axis; coordinates are drawn per case.
    pub shape: Vec<usize>,
    pub cases: usize,
    pub seed: u64,
    /// Fixed parameters, or `None` to draw them per case.
    pub params: Option<SearchParams>,
    pub utility: UtilitySource,
    /// Transfers composed to build `F` from `G`.
    pub transfers: usize,
    pub class_tol: f64,
}

impl SuiteSpec {
    pub fn new(theorem: TheoremId, shape: Vec<usize>, cases: usize, seed: u64) -> Self {
        Self {
            theorem,
            shape,
            cases,
            seed,
            params: None,
            utility: UtilitySource::RandomMember,
            transfers: 1,
            class_tol: DEFAULT_CLASS_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidSpec(msg));
        if self.shape.is_empty() || self.shape.contains(&0) {
            return invalid(format!("shape must list at least one positive axis length, got {:?}", self.shape));
        }
        let nodes = self.shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        if nodes.is_none_or(|n| n > 4096) {
            return invalid(format!("shape {:?} exceeds 4096 nodes", self.shape));
        }
        if self.transfers == 0 {
            return invalid("transfers must be at least 1".into());
        }
        if !(self.class_tol > 0.0 && self.class_tol.is_finite()) {
            return Err(Error::InvalidTolerance(self.class_tol));
        }
        if let Some(params) = &self.params {
            params.validate()?;
        }
        match self.theorem {
            TheoremId::T2a if self.shape.iter().all(|&n| n < 2) => {
                invalid("first-order shifts need an axis with at least 2 points".into())
            }
            TheoremId::T2b | TheoremId::T2c if self.shape.iter().all(|&n| n < 3) => {
                invalid("mean-preserving spreads need an axis with at least 3 points".into())
            }
            TheoremId::T3 | TheoremId::T4 if self.shape.iter().filter(|&&n| n >= 2).count() < 2 => {
                invalid("concordance transfers need two axes with at least 2 points".into())
            }
            _ => Ok(()),
        }
    }
}

fn random_axes(shape: &[usize], rng: &mut Rng) -> Vec<Vec<f64>> {
    shape
        .iter()
        .map(|&n| {
            let mut x = rng.random_range(0.0..1.0);
            (0..n)
                .map(|_| {
                    let c = x;
                    x += rng.random_range(0.2..1.5);
                    c
                })
                .collect()
        })
        .collect()
}

fn random_pmf(grid: Arc<Grid>, rng: &mut Rng) -> Result<Pmf> {
    let weights = (0..grid.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    Pmf::normalized(grid, weights)
}

fn pick<T: Copy>(items: &[T], rng: &mut Rng) -> T {
    items[rng.random_range(0..items.len())]
}

fn random_transfer(theorem: TheoremId, g: &Pmf, rng: &mut Rng) -> Result<Pmf> {
    let grid = Arc::clone(g.grid());
    let share = rng.random_range(0.1..=1.0);
    match theorem {
        TheoremId::T2a => {
            let from = pick(&(0..grid.len()).filter(|&i| g.mass(i) > 0.0).collect::<Vec<_>>(), rng);
            let above: Vec<usize> = (0..grid.len()).filter(|&j| j != from && grid.precedes(from, j)).collect();
            // the top node has nothing above it
            if above.is_empty() {
                return Ok(g.clone());
            }
            fosd_shift(g, from, pick(&above, rng), share * g.mass(from))
        }
        TheoremId::T2b | TheoremId::T2c => {
            let axes: Vec<usize> = (0..grid.dim()).filter(|&k| grid.axis(k).len() >= 3).collect();
            let axis = pick(&axes, rng);
            let interior: Vec<usize> = (0..grid.len())
                .filter(|&i| grid.neighbor(i, axis, -1).is_some() && grid.neighbor(i, axis, 1).is_some())
                .collect();
            let node = pick(&interior, rng);
            mean_preserving_spread(g, axis, node, share * g.mass(node))
        }
        TheoremId::T3 | TheoremId::T4 => {
            let dims: Vec<usize> = (0..grid.dim()).filter(|&k| grid.axis(k).len() >= 2).collect();
            let p = pick(&dims, rng);
            let q = pick(&dims.iter().copied().filter(|&d| d != p).collect::<Vec<_>>(), rng);
            let mut low = grid.multi_index(rng.random_range(0..grid.len()));
            for d in [p, q] {
                low[d] = rng.random_range(0..grid.axis(d).len() - 1);
            }
            let mut high = low.clone();
            for d in [p, q] {
                high[d] = rng.random_range(low[d] + 1..grid.axis(d).len());
            }
            let cell = ConcordanceCell::new(
                &grid,
                grid.index_of(&low).expect("index within grid"),
                grid.index_of(&high).expect("index within grid"),
            )?;
            let room = g.mass(cell.raised_p).min(g.mass(cell.raised_q));
            concordance_transfer(g, &cell, share * room)
        }
    }
}

/// Builds case `index` of `spec` from its derived seed alone.
pub fn generate_case(spec: &SuiteSpec, index: usize) -> Result<TheoremCase> {
    let mut rng = rng_from_seed(derive_seed(spec.seed, index as u64));
    let grid = Arc::new(Grid::new(random_axes(&spec.shape, &mut rng))?);
    let g = random_pmf(Arc::clone(&grid), &mut rng)?;
    let mut f = g.clone();
    for _ in 0..spec.transfers {
        f = random_transfer(spec.theorem, &f, &mut rng)?;
    }
    let utility = match &spec.utility {
        UtilitySource::RandomMember => random_member(spec.theorem.class(), &grid, &mut rng)?,
        UtilitySource::Family { family } => tabulate_family(family, Arc::clone(&grid))?,
    };
    let params = match &spec.params {
        Some(params) => *params,
        None => {
            let scale = 1.0 + utility.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            SearchParams::new(rng.random_range(0.3..0.95), scale * rng.random_range(0.05..1.0))?
        }
    };
    Ok(TheoremCase { theorem: spec.theorem, f, g, utility, params })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub case_id: usize,
    /// Seed the case was generated from, if it was generated.
    pub seed: Option<u64>,
    pub case: TheoremCase,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SuiteSummary {
    pub pass: usize,
    pub fail: usize,
    pub vacuous: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub records: Vec<CaseRecord>,
    pub summary: SuiteSummary,
}

impl SuiteReport {
    fn from_records(records: Vec<CaseRecord>) -> Self {
        let mut summary = SuiteSummary::default();
        for r in &records {
            match r.report.outcome() {
                CaseOutcome::Pass => summary.pass += 1,
                CaseOutcome::Fail => summary.fail += 1,
                CaseOutcome::Vacuous => summary.vacuous += 1,
            }
        }
        Self { records, summary }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseRecord> {
        self.records.iter().filter(|r| r.report.outcome() == CaseOutcome::Fail)
    }
}

fn in_pool<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(work))
}

/// Generates and verifies every case of `spec` on `jobs` threads (0 picks
/// the number of cores). Records come back in case order.
pub fn run_suite(spec: &SuiteSpec, jobs: usize) -> Result<SuiteReport> {
    spec.validate()?;
    let records = in_pool(jobs, || {
        (0..spec.cases)
            .into_par_iter()
            .map(|case_id| {
                let case = generate_case(spec, case_id)?;
                let report = verify_theorem_with(&case, spec.class_tol)?;
                Ok(CaseRecord { case_id, seed: Some(derive_seed(spec.seed, case_id as u64)), case, report })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SuiteReport::from_records(records))
}

/// Verifies explicit cases, keeping their order.
pub fn run_cases(cases: &[TheoremCase], class_tol: f64, jobs: usize) -> Result<SuiteReport> {
    let records = in_pool(jobs, || {
        cases
            .par_iter()
            .enumerate()
            .map(|(case_id, case)| {
                let report = verify_theorem_with(case, class_tol)?;
                Ok(CaseRecord { case_id, seed: None, case: case.clone(), report })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SuiteReport::from_records(records))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureOperator {
    Truncate,
    /// `m·u + n` with `m > 0`, `n ≥ 0`.
    Affine,
    /// `max(u, level)` for a level inside the range of `u`.
    Clamp,
}

impl ClosureOperator {
    pub const ALL: [ClosureOperator; 3] = [ClosureOperator::Truncate, ClosureOperator::Affine, ClosureOperator::Clamp];

    pub fn as_str(self) -> &'static str {
        match self {
            ClosureOperator::Truncate => "truncate",
            ClosureOperator::Affine => "affine",
            ClosureOperator::Clamp => "clamp",
        }
    }
}

impl fmt::Display for ClosureOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClosureOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClosureOperator::ALL
            .into_iter()
            .find(|op| op.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown operator `{s}` (expected truncate, affine or clamp)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureViolation {
    pub sample: usize,
    pub membership: Membership,
}

/// The four-node utility whose supermodularity is destroyed by truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationCounterexample {
    pub margin_before: f64,
    pub margin_after: f64,
    pub witness: Option<Witness>,
    /// The original is supermodular and its truncation violates the square
    /// spanned by the bottom and top nodes.
    pub violation_detected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureReport {
    pub class: FunctionClass,
    pub operator: ClosureOperator,
    pub samples: usize,
    pub preserved: usize,
    pub violations: Vec<ClosureViolation>,
    pub counterexample: Option<TruncationCounterexample>,
}

impl ClosureReport {
    pub fn preservation_rate(&self) -> f64 {
        self.preserved as f64 / self.samples as f64
    }
}

/// `U(1,1) = U(2,2) = 5`, `U(1,2) = −5`, `U(2,1) = 14` on `{1,2}²`.
pub fn truncation_counterexample_utility() -> TabulatedUtility {
    let grid = Arc::new(Grid::new(vec![vec![1.0, 2.0], vec![1.0, 2.0]]).expect("valid grid"));
    TabulatedUtility::new(grid, vec![5.0, -5.0, 14.0, 5.0]).expect("finite values")
}

fn run_counterexample() -> Result<TruncationCounterexample> {
    let u = truncation_counterexample_utility();
    let before = is_member(&u, FunctionClass::Supermodular, DEFAULT_CLASS_TOL)?;
    let after = is_member(&u.truncate(), FunctionClass::Supermodular, DEFAULT_CLASS_TOL)?;
    let on_square = matches!(
        after.witness,
        Some(Witness { violation: crate::utility::Violation::CrossDifference { dims: (0, 1), low: 0, high: 3 }, .. })
    );
    Ok(TruncationCounterexample {
        margin_before: before.margin,
        margin_after: after.margin,
        violation_detected: before.holds && !after.holds && on_square,
        witness: after.witness,
    })
}

/// Draws verified members of `class` on random grids, applies `operator`
/// after a random shift that makes it bind, and re-tests membership.
pub fn closure_check(
    class: FunctionClass,
    operator: ClosureOperator,
    samples: usize,
    seed: u64,
) -> Result<ClosureReport> {
    if samples == 0 {
        return Err(Error::InvalidSpec("closure check needs at least 1 sample".into()));
    }
    let mut violations = Vec::new();
    for sample in 0..samples {
        let mut rng = rng_from_seed(derive_seed(seed, sample as u64));
        let dims = rng.random_range(1..=3);
        let shape: Vec<usize> = (0..dims).map(|_| rng.random_range(2..=4)).collect();
        let grid = Arc::new(Grid::new(random_axes(&shape, &mut rng))?);
        let member = random_member(class, &grid, &mut rng)?;
        let (lo, hi) = (member.min_value(), member.max_value());
        let level = lo + rng.random_range(0.0..=1.0) * (hi - lo);
        let image = match operator {
            ClosureOperator::Truncate => member.offset(-level).truncate(),
            ClosureOperator::Affine => {
                member.affine_transform(rng.random_range(0.1..5.0), rng.random_range(0.0..3.0))?
            }
            ClosureOperator::Clamp => member.clamp_below(level),
        };
        let membership = is_member(&image, class, DEFAULT_CLASS_TOL)?;
        if !membership.holds {
            violations.push(ClosureViolation { sample, membership });
        }
    }
    let counterexample = (class == FunctionClass::Supermodular && operator == ClosureOperator::Truncate)
        .then(run_counterexample)
        .transpose()?;
    Ok(ClosureReport { class, operator, samples, preserved: samples - violations.len(), violations, counterexample })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub delta: f64,
    pub reservation_utility: f64,
    pub acceptance_size: usize,
}

/// Reservation utility and acceptance-set size along increasing concordance
/// transfers on one cell.
pub fn concordance_path(
    g: &Pmf,
    cell: &ConcordanceCell,
    utility: &TabulatedUtility,
    params: &SearchParams,
    deltas: &[f64],
) -> Result<Vec<PathPoint>> {
    deltas
        .iter()
        .map(|&delta| {
            let f = concordance_transfer(g, cell, delta)?;
            let sol = reservation_utility(&f, utility, params)?;
            Ok(PathPoint { delta, reservation_utility: sol.reservation_utility, acceptance_size: sol.acceptance.len() })
        })
        .collect()
}

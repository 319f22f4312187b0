//! Stochastic dominance of offer distributions over function classes.
//!
//! `F` dominates `G` on a class when `E_F[U] ≥ E_G[U]` for every `U` in it.
//! Each class is a polyhedral cone on the grid (cut out by the local
//! constraints of [`is_member`], with explicit subgradient variables for the
//! convex class) that contains the constants, so its section by the box
//! `0 ≤ U ≤ 1` spans it up to scale and shift. Dominance therefore holds iff
//!
//! ```text
//! min Σ (f_i − g_i)·U_i  over the box section  ≥ 0
//! ```
//!
//! and a negative optimum comes with its minimizer as a violating utility.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{common_grid, Grid, Pmf};
use crate::lp::{LinearProgram, LpOptions, LpOutcome, Relation};
use crate::utility::{is_member, FunctionClass, TabulatedUtility};

/// Upper bound on LP variables (nodes plus subgradient components).
pub const MAX_LP_VARIABLES: usize = 5000;
/// Upper bound on dense tableau entries.
pub const MAX_TABLEAU_CELLS: usize = 50_000_000;
/// Node limit for upper-set enumeration.
pub const MAX_BRUTEFORCE_NODES: usize = 12;
/// Tolerated constraint violation of an LP solution before it is distrusted.
const FEASIBILITY_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Dominates,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Dominates => "dominates",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceResult {
    pub class: FunctionClass,
    pub verdict: Verdict,
    /// Minimum of `E_F[U] − E_G[U]` over the normalized class; NaN when the
    /// LP produced no usable optimum.
    pub lp_optimum: f64,
    /// Violating utility on the common grid when `verdict` is `Fails`.
    pub witness: Option<TabulatedUtility>,
    /// `E_F[witness] − E_G[witness]` recomputed by direct summation.
    pub witness_gap: Option<f64>,
    pub reason: Option<String>,
    pub pivots: usize,
}

impl DominanceResult {
    fn inconclusive(class: FunctionClass, lp_optimum: f64, pivots: usize, reason: impl Into<String>) -> Self {
        Self {
            class,
            verdict: Verdict::Inconclusive,
            lp_optimum,
            witness: None,
            witness_gap: None,
            reason: Some(reason.into()),
            pivots,
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Dominates
    }
}

/// Appends the cone constraints of `class` over the first `grid.len()` variables.
fn add_class_constraints(lp: &mut LinearProgram, grid: &Grid, class: FunctionClass) {
    let n = grid.len();
    let k = grid.dim();
    for node in 0..n {
        for axis in 0..k {
            let next = grid.neighbor(node, axis, 1);
            if class.requires_increasing() {
                if let Some(next) = next {
                    lp.add(vec![(next, 1.0), (node, -1.0)], Relation::Ge, 0.0);
                }
            }
            if class.requires_componentwise_convex() {
                if let (Some(prev), Some(next)) = (grid.neighbor(node, axis, -1), next) {
                    let c = grid.axis(axis);
                    let i = grid.coord_index(node, axis);
                    let (h0, h1) = (c[i] - c[i - 1], c[i + 1] - c[i]);
                    lp.add(
                        vec![(next, 1.0 / h1), (node, -1.0 / h1 - 1.0 / h0), (prev, 1.0 / h0)],
                        Relation::Ge,
                        0.0,
                    );
                }
            }
            if class.requires_supermodular() {
                let Some(up_p) = next else { continue };
                for q in axis + 1..k {
                    let Some(up_q) = grid.neighbor(node, q, 1) else { continue };
                    let high = grid.neighbor(up_p, q, 1).expect("both successors exist");
                    lp.add(
                        vec![(node, 1.0), (high, 1.0), (up_p, -1.0), (up_q, -1.0)],
                        Relation::Ge,
                        0.0,
                    );
                }
            }
        }
    }
    if class.requires_convex() {
        let points: Vec<Vec<f64>> = (0..n).map(|i| grid.point(i)).collect();
        let plus = |i: usize, d: usize| n + i * k + d;
        let minus = |i: usize, d: usize| n + n * k + i * k + d;
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let mut terms = vec![(j, 1.0), (i, -1.0)];
                for d in 0..k {
                    let delta = points[j][d] - points[i][d];
                    if delta != 0.0 {
                        terms.push((plus(i, d), -delta));
                        terms.push((minus(i, d), delta));
                    }
                }
                lp.add(terms, Relation::Ge, 0.0);
            }
        }
    }
}

fn lp_size(grid: &Grid, class: FunctionClass) -> (usize, usize) {
    let n = grid.len();
    let k = grid.dim();
    if class.requires_convex() {
        (n + 2 * n * k, n + n * n.saturating_sub(1))
    } else {
        (n, n + n * k * (1 + k))
    }
}

/// Decides dominance of `f` over `g` on `class` by the box-normalized cone LP.
pub fn dominates(f: &Pmf, g: &Pmf, class: FunctionClass, tol: f64) -> Result<DominanceResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidTolerance(tol));
    }
    let (grid, f, g) = common_grid(f, g)?;
    let n = grid.len();
    let (vars, rows_bound) = lp_size(&grid, class);
    if vars > MAX_LP_VARIABLES {
        return Err(Error::LpTooLarge { what: "variables", size: vars, limit: MAX_LP_VARIABLES });
    }
    let cells = rows_bound.saturating_mul(vars + 2 * rows_bound);
    if cells > MAX_TABLEAU_CELLS {
        return Err(Error::LpTooLarge { what: "tableau cells", size: cells, limit: MAX_TABLEAU_CELLS });
    }

    let mut lp = LinearProgram::new(vars);
    for i in 0..n {
        lp.set_objective(i, f.mass(i) - g.mass(i));
        lp.add(vec![(i, 1.0)], Relation::Le, 1.0);
    }
    add_class_constraints(&mut lp, &grid, class);

    let sol = match lp.minimize(&LpOptions::default()) {
        LpOutcome::Optimal(sol) => sol,
        LpOutcome::Infeasible => return Ok(DominanceResult::inconclusive(class, f64::NAN, 0, "LP reported infeasible")),
        LpOutcome::Unbounded => return Ok(DominanceResult::inconclusive(class, f64::NAN, 0, "LP reported unbounded")),
        LpOutcome::PivotLimit => {
            return Ok(DominanceResult::inconclusive(class, f64::NAN, 0, "LP pivot limit reached"))
        }
    };
    let violation = lp.max_violation(&sol.x);
    if violation > FEASIBILITY_SLACK {
        return Ok(DominanceResult::inconclusive(
            class,
            sol.objective,
            sol.pivots,
            format!("LP solution violates constraints by {violation:e}"),
        ));
    }
    if sol.objective >= -tol {
        return Ok(DominanceResult {
            class,
            verdict: Verdict::Dominates,
            lp_optimum: sol.objective,
            witness: None,
            witness_gap: None,
            reason: None,
            pivots: sol.pivots,
        });
    }

    let witness = TabulatedUtility::new(Arc::clone(&grid), sol.x[..n].to_vec())?;
    let gap = f.expectation(&witness)? - g.expectation(&witness)?;
    if !(gap < -tol) {
        return Ok(DominanceResult::inconclusive(
            class,
            sol.objective,
            sol.pivots,
            format!("witness gap {gap:e} does not confirm LP optimum {:e}", sol.objective),
        ));
    }
    if !is_member(&witness, class, tol)?.holds {
        return Ok(DominanceResult::inconclusive(
            class,
            sol.objective,
            sol.pivots,
            "LP witness fails the membership test",
        ));
    }
    Ok(DominanceResult {
        class,
        verdict: Verdict::Fails,
        lp_optimum: sol.objective,
        witness: Some(witness),
        witness_gap: Some(gap),
        reason: None,
        pivots: sol.pivots,
    })
}

/// Increasing-order dominance by enumerating every upper set of the node
/// poset: `F(S) ≥ G(S) − tol` for all upper sets `S`.
pub fn dominates_increasing_bruteforce(f: &Pmf, g: &Pmf, tol: f64) -> Result<bool> {
    let (grid, f, g) = common_grid(f, g)?;
    let n = grid.len();
    if n > MAX_BRUTEFORCE_NODES {
        return Err(Error::GridTooLarge { nodes: n, limit: MAX_BRUTEFORCE_NODES });
    }
    let successors: Vec<u32> = (0..n)
        .map(|node| {
            (0..grid.dim())
                .filter_map(|k| grid.neighbor(node, k, 1))
                .fold(0u32, |acc, s| acc | (1 << s))
        })
        .collect();
    for set in 1u32..(1 << n) {
        let upper = (0..n).all(|i| set & (1 << i) == 0 || successors[i] & !set == 0);
        if !upper {
            continue;
        }
        let (mut fs, mut gs) = (0.0, 0.0);
        for i in (0..n).filter(|&i| set & (1 << i) != 0) {
            fs += f.mass(i);
            gs += g.mass(i);
        }
        if fs < gs - tol {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_amount(amount: f64) -> Result<()> {
    if amount >= 0.0 && amount.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTransfer(format!("transfer amount must be finite and nonnegative, got {amount}")))
    }
}

fn check_donor(pmf: &Pmf, node: usize, amount: f64) -> Result<()> {
    let available = pmf.mass(node);
    if available + 1e-15 < amount {
        return Err(Error::InsufficientMass { node, available, requested: amount });
    }
    Ok(())
}

/// Moves `eps` of mass from `from` up to `to ⪰ from`.
pub fn fosd_shift(g: &Pmf, from: usize, to: usize, eps: f64) -> Result<Pmf> {
    let grid = g.grid();
    grid.check_node(from)?;
    grid.check_node(to)?;
    check_amount(eps)?;
    if !grid.precedes(from, to) {
        return Err(Error::NotComparable { from, to });
    }
    check_donor(g, from, eps)?;
    let mut mass = g.masses().to_vec();
    mass[from] -= eps;
    mass[to] += eps;
    Ok(Pmf::from_transfer(Arc::clone(grid), mass))
}

/// Splits `eps` of the mass at `node` between its two neighbors along `axis`
/// so that the mean of that coordinate is unchanged.
pub fn mean_preserving_spread(g: &Pmf, axis: usize, node: usize, eps: f64) -> Result<Pmf> {
    let grid = g.grid();
    grid.check_node(node)?;
    if axis >= grid.dim() {
        return Err(Error::DimensionOutOfRange { dim: axis, k: grid.dim() });
    }
    check_amount(eps)?;
    let (Some(prev), Some(next)) = (grid.neighbor(node, axis, -1), grid.neighbor(node, axis, 1)) else {
        return Err(Error::BoundaryNode { node, axis });
    };
    check_donor(g, node, eps)?;
    let c = grid.axis(axis);
    let i = grid.coord_index(node, axis);
    let lower_weight = (c[i + 1] - c[i]) / (c[i + 1] - c[i - 1]);
    let mut mass = g.masses().to_vec();
    mass[node] -= eps;
    mass[prev] += eps * lower_weight;
    mass[next] += eps * (1.0 - lower_weight);
    Ok(Pmf::from_transfer(Arc::clone(grid), mass))
}

/// A 2×2 sub-lattice given by its diagonal corners, which differ in exactly
/// two coordinates `(p, q)` with `low` below `high` in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConcordanceCell {
    pub low: usize,
    pub high: usize,
    pub dims: (usize, usize),
    /// `low` with coordinate `p` raised to `high`'s.
    pub raised_p: usize,
    /// `low` with coordinate `q` raised to `high`'s.
    pub raised_q: usize,
}

impl ConcordanceCell {
    pub fn new(grid: &Grid, low: usize, high: usize) -> Result<Self> {
        grid.check_node(low)?;
        grid.check_node(high)?;
        let (li, hi) = (grid.multi_index(low), grid.multi_index(high));
        let differing: Vec<usize> = (0..grid.dim()).filter(|&k| li[k] != hi[k]).collect();
        let &[p, q] = differing.as_slice() else {
            return Err(Error::InvalidTransfer(format!(
                "cell corners must differ in exactly two coordinates, they differ in {}",
                differing.len()
            )));
        };
        if li[p] > hi[p] || li[q] > hi[q] {
            return Err(Error::NotComparable { from: low, to: high });
        }
        let raise = |k: usize| {
            let mut idx = li.clone();
            idx[k] = hi[k];
            grid.index_of(&idx).expect("index within grid")
        };
        Ok(Self { low, high, dims: (p, q), raised_p: raise(p), raised_q: raise(q) })
    }

    /// Cell spanned by `low` and its successors along `p` and `q`.
    pub fn elementary(grid: &Grid, low: usize, p: usize, q: usize) -> Result<Self> {
        let k = grid.dim();
        for d in [p, q] {
            if d >= k {
                return Err(Error::DimensionOutOfRange { dim: d, k });
            }
        }
        let high = grid
            .neighbor(low, p, 1)
            .and_then(|n| grid.neighbor(n, q, 1))
            .filter(|_| p != q)
            .ok_or_else(|| Error::InvalidTransfer(format!("node {low} has no elementary cell in dims ({p}, {q})")))?;
        Self::new(grid, low, high)
    }
}

/// Moves `delta` from each anti-diagonal corner of `cell` to each diagonal
/// corner. Every one-dimensional marginal is preserved.
pub fn concordance_transfer(g: &Pmf, cell: &ConcordanceCell, delta: f64) -> Result<Pmf> {
    let grid = g.grid();
    let checked = ConcordanceCell::new(grid, cell.low, cell.high)?;
    if checked != *cell {
        return Err(Error::InvalidTransfer("cell does not match its corners".into()));
    }
    check_amount(delta)?;
    check_donor(g, cell.raised_p, delta)?;
    check_donor(g, cell.raised_q, delta)?;
    let mut mass = g.masses().to_vec();
    mass[cell.low] += delta;
    mass[cell.high] += delta;
    mass[cell.raised_p] -= delta;
    mass[cell.raised_q] -= delta;
    Ok(Pmf::from_transfer(Arc::clone(grid), mass))
}

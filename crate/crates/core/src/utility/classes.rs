use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TabulatedUtility;
use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::lp::{LinearProgram, LpOptions, LpOutcome, Relation};

/// Absolute tolerance on differences, shared by membership and dominance.
pub const DEFAULT_CLASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionClass {
    Increasing,
    Convex,
    ComponentwiseConvex,
    Supermodular,
    /// Supermodular and componentwise convex.
    Ultramodular,
    IncreasingSupermodular,
    IncreasingUltramodular,
}

impl FunctionClass {
    pub const ALL: [FunctionClass; 7] = [
        FunctionClass::Increasing,
        FunctionClass::Convex,
        FunctionClass::ComponentwiseConvex,
        FunctionClass::Supermodular,
        FunctionClass::Ultramodular,
        FunctionClass::IncreasingSupermodular,
        FunctionClass::IncreasingUltramodular,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionClass::Increasing => "increasing",
            FunctionClass::Convex => "convex",
            FunctionClass::ComponentwiseConvex => "componentwise_convex",
            FunctionClass::Supermodular => "supermodular",
            FunctionClass::Ultramodular => "ultramodular",
            FunctionClass::IncreasingSupermodular => "increasing_supermodular",
            FunctionClass::IncreasingUltramodular => "increasing_ultramodular",
        }
    }

    pub(crate) fn requires_increasing(self) -> bool {
        matches!(
            self,
            FunctionClass::Increasing
                | FunctionClass::IncreasingSupermodular
                | FunctionClass::IncreasingUltramodular
        )
    }

    pub(crate) fn requires_supermodular(self) -> bool {
        matches!(
            self,
            FunctionClass::Supermodular
                | FunctionClass::Ultramodular
                | FunctionClass::IncreasingSupermodular
                | FunctionClass::IncreasingUltramodular
        )
    }

    pub(crate) fn requires_componentwise_convex(self) -> bool {
        matches!(
            self,
            FunctionClass::ComponentwiseConvex
                | FunctionClass::Ultramodular
                | FunctionClass::IncreasingUltramodular
        )
    }

    pub(crate) fn requires_convex(self) -> bool {
        self == FunctionClass::Convex
    }
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        FunctionClass::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| format!("unknown function class `{s}`"))
    }
}

/// A violated local constraint. Nodes are canonical indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    /// `u(next) < u(node)` where `next` is the successor of `node` along `axis`.
    Decrease { axis: usize, node: usize, next: usize },
    /// The slope after `node` along `axis` is smaller than the slope before it.
    Concavity { axis: usize, node: usize },
    /// Negative cross-difference on the elementary cell with corners `low ⪯ high`.
    CrossDifference { dims: (usize, usize), low: usize, high: usize },
    /// No supporting hyperplane at `node`.
    NoSubgradient { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub violation: Violation,
    /// Signed slack of the violated constraint (negative).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub class: FunctionClass,
    pub holds: bool,
    /// Smallest slack over every tested constraint; `+inf` when there are none.
    pub margin: f64,
    /// Lexicographically first violated constraint.
    pub witness: Option<Witness>,
}

#[derive(Default)]
struct Check {
    margin: Option<f64>,
    first: Option<Witness>,
}

impl Check {
    fn record(&mut self, slack: f64, tol: f64, violation: impl FnOnce() -> Violation) {
        self.margin = Some(self.margin.map_or(slack, |m| m.min(slack)));
        if self.first.is_none() && !(slack >= -tol) {
            self.first = Some(Witness { violation: violation(), margin: slack });
        }
    }

    fn merge(&mut self, other: Check) {
        if let Some(m) = other.margin {
            self.margin = Some(self.margin.map_or(m, |s| s.min(m)));
        }
        if self.first.is_none() {
            self.first = other.first;
        }
    }
}

/// Tests `u` against the local characterization of `class` on its grid.
pub fn is_member(u: &TabulatedUtility, class: FunctionClass, tol: f64) -> Result<Membership> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidTolerance(tol));
    }
    let mut check = Check::default();
    if class.requires_increasing() {
        check.merge(increasing(u, tol));
    }
    if class.requires_convex() {
        check.merge(convex(u, tol));
    }
    if class.requires_componentwise_convex() {
        check.merge(componentwise_convex(u, tol));
    }
    if class.requires_supermodular() {
        check.merge(supermodular(u, tol));
    }
    Ok(Membership {
        class,
        holds: check.first.is_none(),
        margin: check.margin.unwrap_or(f64::INFINITY),
        witness: check.first,
    })
}

fn increasing(u: &TabulatedUtility, tol: f64) -> Check {
    let grid = u.grid();
    let mut check = Check::default();
    for node in 0..grid.len() {
        for axis in 0..grid.dim() {
            if let Some(next) = grid.neighbor(node, axis, 1) {
                check.record(u.value(next) - u.value(node), tol, || Violation::Decrease { axis, node, next });
            }
        }
    }
    check
}

/// Slope of `u` between `node` and its successor along `axis`.
pub(crate) fn forward_slope(grid: &Grid, values: &[f64], node: usize, axis: usize) -> Option<f64> {
    let next = grid.neighbor(node, axis, 1)?;
    let coords = grid.axis(axis);
    let i = grid.coord_index(node, axis);
    Some((values[next] - values[node]) / (coords[i + 1] - coords[i]))
}

fn componentwise_convex(u: &TabulatedUtility, tol: f64) -> Check {
    let grid = u.grid();
    let mut check = Check::default();
    for node in 0..grid.len() {
        for axis in 0..grid.dim() {
            let Some(prev) = grid.neighbor(node, axis, -1) else { continue };
            let (Some(before), Some(after)) = (
                forward_slope(grid, u.values(), prev, axis),
                forward_slope(grid, u.values(), node, axis),
            ) else {
                continue;
            };
            check.record(after - before, tol, || Violation::Concavity { axis, node });
        }
    }
    check
}

fn supermodular(u: &TabulatedUtility, tol: f64) -> Check {
    let grid = u.grid();
    let mut check = Check::default();
    for low in 0..grid.len() {
        for p in 0..grid.dim() {
            let Some(up_p) = grid.neighbor(low, p, 1) else { continue };
            for q in p + 1..grid.dim() {
                let Some(up_q) = grid.neighbor(low, q, 1) else { continue };
                let high = grid.neighbor(up_p, q, 1).expect("both successors exist");
                let cross = u.value(low) + u.value(high) - u.value(up_p) - u.value(up_q);
                check.record(cross, tol, || Violation::CrossDifference { dims: (p, q), low, high });
            }
        }
    }
    check
}

/// Convex-extendability: each node needs a subgradient `g` with
/// `u(x_j) ≥ u(x_i) + g·(x_j − x_i)` for every node `j`. The LP minimizes
/// the uniform slack `s` needed to make that system feasible.
fn convex(u: &TabulatedUtility, tol: f64) -> Check {
    let grid = u.grid();
    let k = grid.dim();
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|n| grid.point(n)).collect();
    let slack_var = 2 * k;
    let mut check = Check::default();
    for node in 0..grid.len() {
        if grid.len() == 1 {
            break;
        }
        let mut lp = LinearProgram::new(2 * k + 1);
        lp.set_objective(slack_var, 1.0);
        for (j, pj) in points.iter().enumerate() {
            if j == node {
                continue;
            }
            let mut terms = Vec::with_capacity(2 * k + 1);
            for d in 0..k {
                let delta = pj[d] - points[node][d];
                if delta != 0.0 {
                    terms.push((d, delta));
                    terms.push((k + d, -delta));
                }
            }
            terms.push((slack_var, -1.0));
            lp.add(terms, Relation::Le, u.value(j) - u.value(node));
        }
        let slack = match lp.minimize(&LpOptions::default()) {
            LpOutcome::Optimal(sol) => 0.0 - sol.objective,
            _ => f64::NAN,
        };
        check.record(slack, tol, || Violation::NoSubgradient { node });
    }
    check
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::utility::{tabulate_family, Family};

    fn grid(axes: Vec<Vec<f64>>) -> Arc<Grid> {
        Arc::new(Grid::new(axes).unwrap())
    }

    fn square() -> Arc<Grid> {
        grid(vec![vec![1.0, 2.0], vec![1.0, 2.0]])
    }

    fn example_one() -> TabulatedUtility {
        TabulatedUtility::new(square(), vec![5.0, -5.0, 14.0, 5.0]).unwrap()
    }

    #[test]
    fn example_one_supermodular_then_not_after_truncation() {
        let m = is_member(&example_one(), FunctionClass::Supermodular, DEFAULT_CLASS_TOL).unwrap();
        assert!(m.holds);
        assert_eq!(m.margin, 1.0);

        let t = is_member(&example_one().truncate(), FunctionClass::Supermodular, DEFAULT_CLASS_TOL).unwrap();
        assert!(!t.holds);
        assert_eq!(t.margin, -4.0);
        assert_eq!(
            t.witness,
            Some(Witness {
                violation: Violation::CrossDifference { dims: (0, 1), low: 0, high: 3 },
                margin: -4.0
            })
        );
    }

    #[test]
    fn product_is_increasing_ultramodular() {
        let prod = tabulate_family(&Family::Product, square()).unwrap();
        let m = is_member(&prod, FunctionClass::IncreasingUltramodular, DEFAULT_CLASS_TOL).unwrap();
        assert!(m.holds);
        // no interior points, so only the unit steps and the cross-difference 1 bind
        assert_eq!(m.margin, 1.0);
        assert_eq!(is_member(&prod, FunctionClass::Supermodular, 1e-9).unwrap().margin, 1.0);
        // four corners are in convex position, so any values extend convexly
        assert!(is_member(&prod, FunctionClass::Convex, 1e-9).unwrap().holds);
        let three = grid(vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]);
        let prod = tabulate_family(&Family::Product, three).unwrap();
        assert!(!is_member(&prod, FunctionClass::Convex, 1e-9).unwrap().holds);
    }

    #[test]
    fn documented_family_memberships() {
        let g = grid(vec![vec![0.0, 1.0, 2.5], vec![0.5, 1.0, 3.0]]);
        let fam = |f: Family| tabulate_family(&f, g.clone()).unwrap();
        let holds = |u: &TabulatedUtility, c| is_member(u, c, DEFAULT_CLASS_TOL).unwrap().holds;

        let lin = fam(Family::Linear { weights: vec![2.0, -1.0] });
        for c in [
            FunctionClass::Convex,
            FunctionClass::ComponentwiseConvex,
            FunctionClass::Supermodular,
            FunctionClass::Ultramodular,
        ] {
            assert!(holds(&lin, c), "linear ∉ {c}");
        }
        assert!(!holds(&lin, FunctionClass::Increasing));
        assert!(holds(&fam(Family::Linear { weights: vec![2.0, 1.0] }), FunctionClass::IncreasingUltramodular));

        let min = fam(Family::Min);
        assert!(holds(&min, FunctionClass::IncreasingSupermodular));
        assert!(!holds(&min, FunctionClass::ComponentwiseConvex));

        let max = fam(Family::Max);
        assert!(holds(&max, FunctionClass::Increasing));
        assert!(holds(&max, FunctionClass::Convex));
        assert!(!holds(&max, FunctionClass::Supermodular));

        let sq = fam(Family::SquaredDistance { center: vec![1.0, 1.0] });
        assert!(holds(&sq, FunctionClass::Convex));
        assert!(holds(&sq, FunctionClass::Ultramodular));
        assert!(!holds(&sq, FunctionClass::Increasing));

        assert!(holds(&fam(Family::Product), FunctionClass::IncreasingUltramodular));
    }

    #[test]
    fn increasing_witness_is_first_edge() {
        let u = TabulatedUtility::new(grid(vec![vec![0.0, 1.0, 2.0]]), vec![0.0, 1.0, 0.5]).unwrap();
        let m = is_member(&u, FunctionClass::Increasing, 1e-9).unwrap();
        assert!(!m.holds);
        assert_eq!(
            m.witness.unwrap().violation,
            Violation::Decrease { axis: 0, node: 1, next: 2 }
        );
        assert_eq!(m.margin, -0.5);
    }

    #[test]
    fn componentwise_convexity_uses_divided_differences() {
        // x² on the nonuniform axis {0, 1, 3}: slopes 1 and 4.
        let g = grid(vec![vec![0.0, 1.0, 3.0]]);
        let sq = TabulatedUtility::from_fn(g.clone(), |x| x[0] * x[0]);
        let m = is_member(&sq, FunctionClass::ComponentwiseConvex, 1e-9).unwrap();
        assert!(m.holds);
        assert_eq!(m.margin, 3.0);
        // values (0, 1, 2) are linear in index but concave in coordinate
        let u = TabulatedUtility::new(g, vec![0.0, 1.0, 2.0]).unwrap();
        let m = is_member(&u, FunctionClass::ComponentwiseConvex, 1e-9).unwrap();
        assert!(!m.holds);
        assert_eq!(m.witness.unwrap().violation, Violation::Concavity { axis: 0, node: 1 });
        assert!((m.margin + 0.5).abs() < 1e-15);
    }

    #[test]
    fn convexity_is_extendability() {
        let g = grid(vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]]);
        // x·y is componentwise linear and supermodular but not convex.
        let xy = TabulatedUtility::from_fn(g.clone(), |x| x[0] * x[1]);
        assert!(is_member(&xy, FunctionClass::Ultramodular, 1e-9).unwrap().holds);
        let m = is_member(&xy, FunctionClass::Convex, 1e-9).unwrap();
        assert!(!m.holds);
        assert!(matches!(m.witness.unwrap().violation, Violation::NoSubgradient { .. }));

        let bowl = TabulatedUtility::from_fn(g.clone(), |x| (x[0] - 0.7).powi(2) + (x[0] + x[1]).powi(2));
        let m = is_member(&bowl, FunctionClass::Convex, 1e-9).unwrap();
        assert!(m.holds, "{m:?}");
        assert!(m.margin.abs() < 1e-12);

        let single = TabulatedUtility::new(grid(vec![vec![3.0]]), vec![-2.0]).unwrap();
        let m = is_member(&single, FunctionClass::Convex, 1e-9).unwrap();
        assert!(m.holds);
        assert_eq!(m.margin, f64::INFINITY);
    }

    #[test]
    fn tolerance_must_be_positive() {
        assert_eq!(
            is_member(&example_one(), FunctionClass::Increasing, 0.0),
            Err(Error::InvalidTolerance(0.0))
        );
        assert!(is_member(&example_one(), FunctionClass::Increasing, f64::NAN).is_err());
    }

    #[test]
    fn class_names_round_trip() {
        for c in FunctionClass::ALL {
            assert_eq!(c.as_str().parse::<FunctionClass>().unwrap(), c);
        }
        assert_eq!("Increasing-Supermodular".parse(), Ok(FunctionClass::IncreasingSupermodular));
        assert!("concave".parse::<FunctionClass>().is_err());
    }
}

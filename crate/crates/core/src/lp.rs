//! Small dense two-phase simplex.
//!
//! Minimizes `c·x` subject to linear rows and `x ≥ 0`. Entering columns are
//! priced by most negative reduced cost; after a run of degenerate pivots the
//! solver switches to Bland's rule (lowest-index entering column,
//! lowest-index leaving basic variable among ratio ties) until the objective
//! moves again, so the heavily degenerate cone programs of the dominance
//! checker cannot cycle.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    /// Reduced-cost threshold for optimality.
    pub optimality_tol: f64,
    /// Entries smaller than this are never used as pivots.
    pub pivot_tol: f64,
    pub max_pivots: usize,
    /// Consecutive degenerate pivots before falling back to Bland's rule.
    pub degenerate_streak: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { optimality_tol: 1e-9, pivot_tol: 1e-8, max_pivots: 200_000, degenerate_streak: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
    PivotLimit,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, objective: vec![0.0; num_vars], constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    pub fn add(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        debug_assert!(terms.iter().all(|&(v, _)| v < self.num_vars));
        self.constraints.push(Constraint { terms, relation, rhs });
    }

    /// Largest violation of any row (or of `x ≥ 0`) at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * x[v]).sum();
            match c.relation {
                Relation::Le => (lhs - c.rhs).max(0.0),
                Relation::Ge => (c.rhs - lhs).max(0.0),
                Relation::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = x.iter().map(|&v| (-v).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn minimize(&self, opts: &LpOptions) -> LpOutcome {
        Tableau::build(self).solve(&self.objective, opts)
    }
}

struct Tableau {
    rows: usize,
    /// Structural + slack/surplus + artificial columns (rhs excluded).
    cols: usize,
    num_vars: usize,
    first_artificial: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    live: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let mut rows = Vec::with_capacity(m);
        let mut slacks = 0;
        let mut artificials = 0;
        for c in &lp.constraints {
            let mut dense = vec![0.0; lp.num_vars];
            for &(v, a) in &c.terms {
                dense[v] += a;
            }
            let (mut rel, mut rhs) = (c.relation, c.rhs);
            let flip = match rel {
                Relation::Ge => rhs <= 0.0,
                Relation::Le | Relation::Eq => rhs < 0.0,
            };
            if flip {
                dense.iter_mut().for_each(|a| *a = -*a);
                rhs = -rhs;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            match rel {
                Relation::Le => slacks += 1,
                Relation::Ge => {
                    slacks += 1;
                    artificials += 1
                }
                Relation::Eq => artificials += 1,
            }
            rows.push((dense, rel, rhs));
        }

        let first_artificial = lp.num_vars + slacks;
        let cols = first_artificial + artificials;
        let width = cols + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let (mut next_slack, mut next_art) = (lp.num_vars, first_artificial);
        for (i, (dense, rel, rhs)) in rows.into_iter().enumerate() {
            let row = &mut data[i * width..(i + 1) * width];
            row[..lp.num_vars].copy_from_slice(&dense);
            row[cols] = rhs;
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Self {
            rows: m,
            cols,
            num_vars: lp.num_vars,
            first_artificial,
            data,
            basis,
            live: vec![true; m],
        }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn solve(mut self, objective: &[f64], opts: &LpOptions) -> LpOutcome {
        let mut pivots = 0;
        if self.first_artificial < self.cols {
            let mut phase1 = vec![0.0; self.cols];
            phase1[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            match self.run(&phase1, self.cols, opts, &mut pivots) {
                Phase::Optimal => {}
                Phase::Unbounded => return LpOutcome::Infeasible,
                Phase::PivotLimit => return LpOutcome::PivotLimit,
            }
            let infeasibility: f64 = (0..self.rows)
                .filter(|&i| self.live[i] && self.basis[i] >= self.first_artificial)
                .map(|i| self.rhs(i))
                .sum();
            let scale = (0..self.rows).map(|i| self.rhs(i).abs()).fold(1.0, f64::max);
            if infeasibility > 1e-9 * scale {
                return LpOutcome::Infeasible;
            }
            self.expel_artificials(opts);
        }

        let mut phase2 = vec![0.0; self.cols];
        phase2[..self.num_vars].copy_from_slice(objective);
        match self.run(&phase2, self.first_artificial, opts, &mut pivots) {
            Phase::Optimal => {}
            Phase::Unbounded => return LpOutcome::Unbounded,
            Phase::PivotLimit => return LpOutcome::PivotLimit,
        }

        let mut x = vec![0.0; self.num_vars];
        for i in (0..self.rows).filter(|&i| self.live[i]) {
            if self.basis[i] < self.num_vars {
                x[self.basis[i]] = self.rhs(i).max(0.0);
            }
        }
        let objective = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpOutcome::Optimal(LpSolution { x, objective, pivots })
    }

    /// Pivots basic artificials (at level zero) out; drops redundant rows.
    fn expel_artificials(&mut self, opts: &LpOptions) {
        for i in 0..self.rows {
            if !self.live[i] || self.basis[i] < self.first_artificial {
                continue;
            }
            let entering = (0..self.first_artificial).find(|&j| self.at(i, j).abs() > opts.pivot_tol);
            match entering {
                Some(j) => self.pivot(i, j, None),
                None => self.live[i] = false,
            }
        }
    }

    /// Primal simplex on columns `0..allowed` under `cost`.
    fn run(&mut self, cost: &[f64], allowed: usize, opts: &LpOptions, pivots: &mut usize) -> Phase {
        let mut reduced = cost.to_vec();
        reduced.push(0.0);
        for i in (0..self.rows).filter(|&i| self.live[i]) {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let w = self.width();
                for (j, r) in reduced.iter_mut().enumerate() {
                    *r -= cb * self.data[i * w + j];
                }
            }
        }

        let mut streak = 0;
        loop {
            let candidates = (0..allowed).filter(|&j| reduced[j] < -opts.optimality_tol);
            let bland = streak >= opts.degenerate_streak;
            let entering = if bland {
                candidates.min()
            } else {
                candidates.min_by(|&a, &b| reduced[a].total_cmp(&reduced[b]))
            };
            let Some(entering) = entering else {
                return Phase::Optimal;
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in (0..self.rows).filter(|&i| self.live[i]) {
                let a = self.at(i, entering);
                if a <= opts.pivot_tol {
                    continue;
                }
                // round-off can leave a basic variable slightly negative
                let ratio = self.rhs(i).max(0.0) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((l, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                        // ties go to the larger pivot element, or the lower basic index under Bland
                        let better_tie = if bland { self.basis[i] < self.basis[l] } else { a > self.at(l, entering) };
                        if ratio < best && !tie || tie && better_tie {
                            Some((i, ratio))
                        } else {
                            Some((l, best))
                        }
                    }
                };
            }
            let Some((row, step)) = leaving else {
                return Phase::Unbounded;
            };
            if *pivots >= opts.max_pivots {
                return Phase::PivotLimit;
            }
            *pivots += 1;
            streak = if step * -reduced[entering] > 1e-14 { 0 } else { streak + 1 };
            self.pivot(row, entering, Some(&mut reduced));
        }
    }

    fn pivot(&mut self, row: usize, col: usize, reduced: Option<&mut Vec<f64>>) {
        let w = self.width();
        let p = self.data[row * w + col];
        for j in 0..w {
            self.data[row * w + j] /= p;
        }
        self.data[row * w + col] = 1.0;
        let pivot_row: Vec<(usize, f64)> = self.data[row * w..(row + 1) * w]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        for i in 0..self.rows {
            if i == row || !self.live[i] {
                continue;
            }
            let factor = self.data[i * w + col];
            if factor != 0.0 {
                let r = &mut self.data[i * w..(i + 1) * w];
                for &(j, pv) in &pivot_row {
                    r[j] -= factor * pv;
                }
                r[col] = 0.0;
                if r[w - 1] < 0.0 && r[w - 1] > -1e-12 {
                    r[w - 1] = 0.0;
                }
            }
        }
        if let Some(reduced) = reduced {
            let factor = reduced[col];
            if factor != 0.0 {
                for &(j, pv) in &pivot_row {
                    reduced[j] -= factor * pv;
                }
                reduced[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }
}

enum Phase {
    Optimal,
    Unbounded,
    PivotLimit,
}

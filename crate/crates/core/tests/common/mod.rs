#![allow(dead_code)]

use std::sync::Arc;

use multisearch_core::{Grid, Pmf, Rng, TabulatedUtility};
use rand::Rng as _;

pub fn grid(axes: Vec<Vec<f64>>) -> Arc<Grid> {
    Arc::new(Grid::new(axes).unwrap())
}

pub fn square() -> Arc<Grid> {
    grid(vec![vec![1.0, 2.0], vec![1.0, 2.0]])
}

/// Sorted, strictly increasing coordinates with gaps in `[0.2, 1.5)`.
pub fn random_grid(shape: &[usize], rng: &mut Rng) -> Arc<Grid> {
    let axes = shape
        .iter()
        .map(|&n| {
            let mut x: f64 = rng.random_range(-1.0..1.0);
            (0..n)
                .map(|_| {
                    x += rng.random_range(0.2..1.5);
                    x
                })
                .collect()
        })
        .collect();
    grid(axes)
}

/// Random pmf; roughly a third of the nodes get no mass.
pub fn random_pmf(grid: &Arc<Grid>, rng: &mut Rng) -> Pmf {
    let mut w: Vec<f64> =
        (0..grid.len()).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    Pmf::normalized(Arc::clone(grid), w).unwrap()
}

pub fn random_utility(grid: &Arc<Grid>, rng: &mut Rng) -> TabulatedUtility {
    let values = (0..grid.len()).map(|_| rng.random_range(-3.0..5.0)).collect();
    TabulatedUtility::new(Arc::clone(grid), values).unwrap()
}

/// Root of `u − γ − β/(1 − β)·Σ p_i (U_i − u)⁺`, found by locating the
/// linear piece containing the sign change and solving it exactly.
pub fn reservation_oracle(masses: &[f64], values: &[f64], beta: f64, gamma: f64) -> f64 {
    let k = beta / (1.0 - beta);
    let h = |u: f64| u - gamma - k * masses.iter().zip(values).map(|(p, v)| p * (v - u).max(0.0)).sum::<f64>();
    let mut knots: Vec<f64> = values.to_vec();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    // the piece [a, b] with h(a) ≤ 0 ≤ h(b); above the top knot h(u) = u − γ
    let top = *knots.last().unwrap();
    if h(top) <= 0.0 {
        return gamma;
    }
    let b = knots.iter().copied().find(|&b| h(b) >= 0.0).unwrap();
    // between b and the knot below it, the offers above u are those with U_i ≥ b
    let (mut pa, mut pv) = (0.0, 0.0);
    for (p, &v) in masses.iter().zip(values) {
        if v >= b {
            pa += p;
            pv += p * v;
        }
    }
    // u − γ − k·(pv − pa·u) = 0
    (gamma + k * pv) / (1.0 + k * pa)
}

/// `U(w ∧ w′) + U(w ∨ w′) ≥ U(w) + U(w′) − tol` over every pair of nodes.
pub fn supermodular_pairwise(u: &TabulatedUtility, tol: f64) -> bool {
    let g = u.grid();
    (0..g.len()).all(|a| {
        (0..g.len()).all(|b| {
            let (ia, ib) = (g.multi_index(a), g.multi_index(b));
            let meet: Vec<usize> = ia.iter().zip(&ib).map(|(x, y)| *x.min(y)).collect();
            let join: Vec<usize> = ia.iter().zip(&ib).map(|(x, y)| *x.max(y)).collect();
            let (m, j) = (g.index_of(&meet).unwrap(), g.index_of(&join).unwrap());
            u.value(m) + u.value(j) >= u.value(a) + u.value(b) - tol
        })
    })
}

/// `U(w) ≤ U(w′) + tol` whenever `w ⪯ w′`.
pub fn increasing_pairwise(u: &TabulatedUtility, tol: f64) -> bool {
    let g = u.grid();
    (0..g.len()).all(|a| (0..g.len()).all(|b| !g.precedes(a, b) || u.value(a) <= u.value(b) + tol))
}

/// Chord test on every triple of points along every axis line.
pub fn componentwise_convex_triples(u: &TabulatedUtility, tol: f64) -> bool {
    let g = u.grid();
    for node in 0..g.len() {
        for k in 0..g.dim() {
            if g.coord_index(node, k) != 0 {
                continue;
            }
            let line: Vec<usize> = std::iter::successors(Some(node), |&n| g.neighbor(n, k, 1)).collect();
            let x = g.axis(k);
            for a in 0..line.len() {
                for b in a + 1..line.len() {
                    for c in b + 1..line.len() {
                        let lam = (x[c] - x[b]) / (x[c] - x[a]);
                        let chord = lam * u.value(line[a]) + (1.0 - lam) * u.value(line[c]);
                        if u.value(line[b]) > chord + tol {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

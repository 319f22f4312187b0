//! Reservation utility, value function and acceptance set of the stationary
//! search problem, plus direct Monte Carlo evaluation of threshold policies.
//!
//! With `V(w) = max(U(w), u*)/(1 − β)` the indifference condition
//! `u*/(1 − β) = γ + β·E[V(w′)]` rearranges to the fixed point `t = ψ(t)` of
//!
//! ```text
//! ψ(t) = (1 − β)·γ + β·E[max(U, t)]
//! ```
//!
//! which is nondecreasing with modulus `β`, so iteration converges
//! geometrically for every `β ∈ (0, 1)`. Bisection on `t − ψ(t)` (slope at
//! least `1 − β`) is run as an independent cross-check.

use std::sync::Arc;

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::lattice::{same_grid, Grid, OfferSampler, Pmf, SearchParams};
use crate::utility::TabulatedUtility;

pub const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub reservation_utility: f64,
    /// `max(U(x), u*)/(1 − β)` at every node.
    pub value: TabulatedUtility,
    /// Nodes with `U(x) ≥ u* − tol`, in canonical order.
    pub acceptance: Vec<usize>,
    /// Defect of `u = γ + β/(1 − β)·E[(U − u)⁺]` at the returned `u`.
    pub residual: f64,
    pub iterations: usize,
    pub bisection_estimate: f64,
    pub bisection_iterations: usize,
}

impl Solution {
    pub fn grid(&self) -> &Arc<Grid> {
        self.value.grid()
    }

    pub fn value_at(&self, node: usize) -> f64 {
        self.value.value(node)
    }

    pub fn accepts(&self, node: usize) -> bool {
        self.acceptance.binary_search(&node).is_ok()
    }
}

fn check_inputs(pmf: &Pmf, u: &TabulatedUtility, params: &SearchParams) -> Result<()> {
    params.validate()?;
    if !same_grid(pmf.grid(), u.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn expected_max(pmf: &Pmf, u: &TabulatedUtility, t: f64) -> f64 {
    pmf.masses().iter().zip(u.values()).map(|(m, &v)| m * v.max(t)).sum()
}

fn psi(pmf: &Pmf, u: &TabulatedUtility, params: &SearchParams, t: f64) -> f64 {
    (1.0 - params.beta) * params.gamma + params.beta * expected_max(pmf, u, t)
}

/// `ψ(t) = (1 − β)γ + β·E[max(U, t)]`.
pub fn continuation_map(t: f64, pmf: &Pmf, u: &TabulatedUtility, params: &SearchParams) -> Result<f64> {
    check_inputs(pmf, u, params)?;
    if !t.is_finite() {
        return Err(Error::InvalidParams(format!("candidate utility must be finite, got {t}")));
    }
    Ok(psi(pmf, u, params, t))
}

/// `u − γ − β/(1 − β)·E[(U − u)⁺]`.
pub fn reservation_residual(t: f64, pmf: &Pmf, u: &TabulatedUtility, params: &SearchParams) -> f64 {
    let excess: f64 = pmf.masses().iter().zip(u.values()).map(|(m, &v)| m * (v - t).max(0.0)).sum();
    t - params.gamma - params.beta / (1.0 - params.beta) * excess
}

fn fixed_point(pmf: &Pmf, u: &TabulatedUtility, params: &SearchParams) -> Result<(f64, usize)> {
    let beta = params.beta;
    // |t_{k+1} − t*| ≤ β/(1 − β)·|t_{k+1} − t_k|; the reservation residual is at
    // most |t − t*|/(1 − β), so aim for half of tol·(1 − β) in t.
    let step_goal = 0.5 * params.tol * (1.0 - beta).powi(2) / beta;
    let mut t = params.gamma;
    for iteration in 1..=MAX_ITERATIONS {
        let next = psi(pmf, u, params, t);
        let step = (next - t).abs();
        t = next;
        if step <= step_goal || step == 0.0 {
            return Ok((t, iteration));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        defect: reservation_residual(t, pmf, u, params),
    })
}

/// Bracket `[min(γ, min U), max(γ, max U) + γβ/(1 − β)]`, mapped into itself by ψ.
pub fn bisection_bracket(u: &TabulatedUtility, params: &SearchParams) -> (f64, f64) {
    let lo = params.gamma.min(u.min_value());
    let hi = params.gamma.max(u.max_value()) + params.gamma * params.beta / (1.0 - params.beta);
    (lo, hi)
}

fn bisection(pmf: &Pmf, u: &TabulatedUtility, params: &SearchParams) -> Result<(f64, usize)> {
    let (mut lo, mut hi) = bisection_bracket(u, params);
    let width_goal = 0.5 * params.tol * (1.0 - params.beta);
    let h = |t: f64| t - psi(pmf, u, params, t);
    for iteration in 1..=MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= width_goal || mid <= lo || mid >= hi {
            return Ok((mid, iteration));
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS, defect: reservation_residual(mid, pmf, u, params) })
}

/// Solves for the reservation utility by contraction and by bisection and
/// requires both to agree within `10·tol`.
pub fn reservation_utility(pmf: &Pmf, u: &TabulatedUtility, params: &SearchParams) -> Result<Solution> {
    check_inputs(pmf, u, params)?;
    let (t, iterations) = fixed_point(pmf, u, params)?;
    let (bis, bisection_iterations) = bisection(pmf, u, params)?;
    if (t - bis).abs() > 10.0 * params.tol {
        return Err(Error::SolverDisagreement { fixed_point: t, bisection: bis });
    }
    let residual = reservation_residual(t, pmf, u, params);
    if !(residual.abs() <= params.tol) {
        return Err(Error::NonConvergence { iterations, defect: residual });
    }
    let scale = 1.0 / (1.0 - params.beta);
    let value = TabulatedUtility::new(
        Arc::clone(u.grid()),
        u.values().iter().map(|&v| v.max(t) * scale).collect(),
    )?;
    let acceptance = (0..u.grid().len()).filter(|&n| u.value(n) >= t - params.tol).collect();
    Ok(Solution {
        reservation_utility: t,
        value,
        acceptance,
        residual,
        iterations,
        bisection_estimate: bis,
        bisection_iterations,
    })
}

/// `max(U(x), u*)/(1 − β)`.
pub fn value_function(solution: &Solution, node: usize) -> Result<f64> {
    solution.grid().check_node(node)?;
    Ok(solution.value_at(node))
}

/// Analytic `E[V(w)]` of a solved problem.
pub fn expected_value(solution: &Solution, pmf: &Pmf) -> Result<f64> {
    pmf.expectation(&solution.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationStats {
    pub threshold: f64,
    pub episodes: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Offers drawn per episode before stopping, averaged.
    pub mean_offers: f64,
    /// Episodes cut off at `horizon` without accepting.
    pub truncated: usize,
    pub horizon: usize,
}

/// Exact expected payoff of the policy "accept iff `U(w) ≥ threshold`",
/// measured before the first offer is seen. With acceptance probability `p`,
/// `W = E[U·1{U ≥ threshold}]/(1 − β) + (1 − p)(γ + βW)`.
pub fn policy_value(pmf: &Pmf, u: &TabulatedUtility, params: &SearchParams, threshold: f64) -> Result<f64> {
    check_inputs(pmf, u, params)?;
    let (mut p, mut accepted) = (0.0, 0.0);
    for (m, &v) in pmf.masses().iter().zip(u.values()) {
        if v >= threshold {
            p += m;
            accepted += m * v;
        }
    }
    let beta = params.beta;
    Ok((accepted / (1.0 - beta) + (1.0 - p) * params.gamma) / (1.0 - beta * (1.0 - p)))
}

/// Smallest `T` with `β^T·(max|U| + γ)/(1 − β) < tol`.
pub fn simulation_horizon(u: &TabulatedUtility, params: &SearchParams) -> usize {
    let max_abs = u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let bound = (max_abs + params.gamma) / (1.0 - params.beta);
    let mut tail = bound;
    let mut t = 0;
    while tail >= params.tol {
        tail *= params.beta;
        t += 1;
    }
    t
}

/// Realized discounted utility `Σ_{t<T} β^t γ + β^T U(w_T)/(1 − β)` of the
/// policy "accept iff `U(w) ≥ threshold`". Episode `i` draws from ChaCha8
/// stream `i` of the master seed.
pub fn simulate_search(
    pmf: &Pmf,
    u: &TabulatedUtility,
    params: &SearchParams,
    threshold: f64,
    seed: u64,
    episodes: usize,
) -> Result<SimulationStats> {
    check_inputs(pmf, u, params)?;
    if episodes == 0 {
        return Err(Error::InvalidParams("episodes must be at least 1".into()));
    }
    if !threshold.is_finite() {
        return Err(Error::InvalidParams(format!("threshold must be finite, got {threshold}")));
    }
    let horizon = simulation_horizon(u, params);
    let sampler = OfferSampler::new(pmf);
    let base = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let accept_scale = 1.0 / (1.0 - params.beta);

    let (mut sum, mut sum_sq, mut offers, mut truncated) = (0.0, 0.0, 0usize, 0usize);
    for episode in 0..episodes {
        let mut rng = base.clone();
        rng.set_stream(episode as u64);
        let mut payoff = 0.0;
        let mut discount = 1.0;
        let mut accepted = false;
        for _ in 0..horizon {
            let node = sampler.draw(&mut rng);
            offers += 1;
            let utility = u.value(node);
            if utility >= threshold {
                payoff += discount * utility * accept_scale;
                accepted = true;
                break;
            }
            payoff += discount * params.gamma;
            discount *= params.beta;
        }
        truncated += usize::from(!accepted);
        sum += payoff;
        sum_sq += payoff * payoff;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let variance = if episodes > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(SimulationStats {
        threshold,
        episodes,
        mean,
        std_error: (variance / n).sqrt(),
        mean_offers: offers as f64 / n,
        truncated,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(coords: Vec<f64>) -> Arc<Grid> {
        Arc::new(Grid::new(vec![coords]).unwrap())
    }

    fn identity(grid: &Arc<Grid>) -> TabulatedUtility {
        TabulatedUtility::from_fn(grid.clone(), |x| x[0])
    }

    fn two_point(p_high: f64) -> (Pmf, TabulatedUtility) {
        let g = line(vec![0.0, 2.0]);
        (Pmf::new(g.clone(), vec![1.0 - p_high, p_high]).unwrap(), identity(&g))
    }

    #[test]
    fn continuation_map_examples() {
        let p = SearchParams::new(0.5, 0.5).unwrap();
        let (f, u) = two_point(0.5);
        assert_eq!(continuation_map(1.0, &f, &u, &p).unwrap(), 1.0);
        // far above max U: (1 − β)γ + βt
        assert_eq!(continuation_map(10.0, &f, &u, &p).unwrap(), 0.25 + 5.0);

        let g = line(vec![0.0]);
        let c = TabulatedUtility::new(g.clone(), vec![3.0]).unwrap();
        let point = Pmf::uniform(g);
        assert_eq!(continuation_map(4.0, &point, &c, &p).unwrap(), 0.25 + 2.0);
        assert!(continuation_map(f64::NAN, &point, &c, &p).is_err());
    }

    #[test]
    fn closed_form_reservation_utilities() {
        let g = line(vec![0.0]);
        let c = TabulatedUtility::new(g.clone(), vec![3.0]).unwrap();
        let s = reservation_utility(&Pmf::uniform(g), &c, &SearchParams::new(0.5, 1.0).unwrap()).unwrap();
        assert!((s.reservation_utility - 2.0).abs() <= 1e-9);

        let p = SearchParams::new(0.5, 0.5).unwrap();
        let (f, u) = two_point(0.5);
        let s = reservation_utility(&f, &u, &p).unwrap();
        assert!((s.reservation_utility - 1.0).abs() <= 1e-9);
        assert!(s.residual.abs() <= p.tol);
        assert_eq!(s.acceptance, vec![1]);
        assert!((value_function(&s, 1).unwrap() - 4.0).abs() < 1e-9);
        assert!((value_function(&s, 0).unwrap() - 2.0).abs() < 1e-9);
        assert!((expected_value(&s, &f).unwrap() - 3.0).abs() < 1e-9);
        assert!((policy_value(&f, &u, &p, s.reservation_utility).unwrap() - 3.0).abs() < 1e-9);
        // accepting everything: E[U]/(1 − β) = 2; accepting nothing: γ/(1 − β) = 1
        assert!((policy_value(&f, &u, &p, -1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((policy_value(&f, &u, &p, 5.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(value_function(&s, 2).is_err());

        let (f, u) = two_point(0.75);
        let s = reservation_utility(&f, &u, &p).unwrap();
        assert!((s.reservation_utility - 8.0 / 7.0).abs() <= 1e-9);
    }

    #[test]
    fn ties_are_accepted() {
        // U ≡ u*: the degenerate offer 2.0 with β = 0.5, γ = 2 has u* = 2.
        let g = line(vec![0.0, 1.0]);
        let u = TabulatedUtility::new(g.clone(), vec![2.0, 2.0]).unwrap();
        let s = reservation_utility(&Pmf::uniform(g), &u, &SearchParams::new(0.5, 2.0).unwrap()).unwrap();
        assert!((s.reservation_utility - 2.0).abs() < 1e-9);
        assert_eq!(s.acceptance, vec![0, 1]);
        assert!((s.value_at(0) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn negative_utilities_are_supported() {
        let g = line(vec![-3.0, -1.0]);
        let u = identity(&g);
        let p = SearchParams::new(0.9, 0.1).unwrap();
        let s = reservation_utility(&Pmf::uniform(g), &u, &p).unwrap();
        assert!(s.residual.abs() <= p.tol);
        // every offer is worse than waiting forever on γ > 0
        assert!(s.acceptance.is_empty());
        assert!((s.reservation_utility - 0.1).abs() < 1e-9);
    }

    #[test]
    fn high_discount_converges() {
        let (f, u) = two_point(0.5);
        let p = SearchParams::new(0.999, 0.5).unwrap();
        let s = reservation_utility(&f, &u, &p).unwrap();
        assert!(s.residual.abs() <= p.tol);
        assert!((s.reservation_utility - s.bisection_estimate).abs() <= 10.0 * p.tol);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (f, _) = two_point(0.5);
        let other = identity(&line(vec![0.0, 3.0]));
        let p = SearchParams::new(0.5, 0.5).unwrap();
        assert_eq!(reservation_utility(&f, &other, &p), Err(Error::GridMismatch));
        assert!(continuation_map(1.0, &f, &other, &p).is_err());
    }

    #[test]
    fn horizon_bounds_the_tail() {
        let (_, u) = two_point(0.5);
        let p = SearchParams::new(0.5, 0.5).unwrap();
        let t = simulation_horizon(&u, &p);
        let bound = (2.0 + 0.5) / 0.5;
        assert!(0.5f64.powi(t as i32) * bound < p.tol);
        assert!(0.5f64.powi(t as i32 - 1) * bound >= p.tol);
    }

    #[test]
    fn simulation_is_deterministic_and_validates() {
        let (f, u) = two_point(0.5);
        let p = SearchParams::new(0.5, 0.5).unwrap();
        let a = simulate_search(&f, &u, &p, 1.0, 5, 1000).unwrap();
        let b = simulate_search(&f, &u, &p, 1.0, 5, 1000).unwrap();
        assert_eq!(a, b);
        assert!(simulate_search(&f, &u, &p, 1.0, 5, 0).is_err());
        assert!(simulate_search(&f, &u, &p, f64::INFINITY, 5, 10).is_err());
    }

    #[test]
    fn never_accepting_collects_gamma_forever() {
        let (f, u) = two_point(0.5);
        let p = SearchParams::new(0.5, 0.5).unwrap();
        let s = simulate_search(&f, &u, &p, 100.0, 1, 50).unwrap();
        assert_eq!(s.truncated, 50);
        assert!((s.mean - 1.0).abs() < 1e-9);
    }
}

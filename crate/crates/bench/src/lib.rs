//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use multisearch_core::{
    random_member, rng_from_seed, tabulate_family, Family, FunctionClass, Grid, Pmf, TabulatedUtility,
};

/// Evenly spaced grid `{0, 1, …, n−1}^dims`.
pub fn cube(n: usize, dims: usize) -> Arc<Grid> {
    let axis: Vec<f64> = (0..n).map(|i| i as f64).collect();
    Arc::new(Grid::new(vec![axis; dims]).expect("valid grid"))
}

/// Mass increasing in the node index, so nothing is degenerate.
pub fn ramp(grid: &Arc<Grid>) -> Pmf {
    let w = (1..=grid.len()).map(|i| i as f64).collect();
    Pmf::normalized(grid.clone(), w).expect("positive weights")
}

pub fn product(grid: &Arc<Grid>) -> TabulatedUtility {
    tabulate_family(&Family::Product, grid.clone()).expect("finite product")
}

pub fn member(class: FunctionClass, grid: &Arc<Grid>, seed: u64) -> TabulatedUtility {
    random_member(class, grid, &mut rng_from_seed(seed)).expect("generator succeeds")
}

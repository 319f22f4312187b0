//! Finite product grids, offer distributions on them, and sampling.
//!
//! Nodes of a [`Grid`] are addressed by a canonical index: the Cartesian
//! product of the axes in lexicographic order with axis 0 most significant.
//! Every tabulation in the crate (masses, utility values, LP variables) uses
//! this order.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::utility::TabulatedUtility;

/// Slack allowed on the total mass of a [`Pmf`].
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::EmptyAxes);
        }
        for (axis, coords) in axes.iter().enumerate() {
            if coords.is_empty() {
                return Err(Error::EmptyAxis { axis });
            }
            if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
                return Err(Error::NonFiniteCoordinate { axis, index });
            }
            if let Some(w) = coords.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::UnsortedAxis { axis, index: w + 1 });
            }
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].len();
        }
        let len = strides[0] * axes[0].len();
        Ok(Self { axes, strides, len })
    }

    /// Number of attributes `K`.
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    /// Position of `node` along axis `k`.
    pub fn coord_index(&self, node: usize, k: usize) -> usize {
        (node / self.strides[k]) % self.axes[k].len()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim()).map(|k| self.coord_index(node, k)).collect()
    }

    pub fn index_of(&self, idx: &[usize]) -> Option<usize> {
        if idx.len() != self.dim() {
            return None;
        }
        idx.iter()
            .zip(&self.axes)
            .zip(&self.strides)
            .try_fold(0, |acc, ((&i, axis), &s)| (i < axis.len()).then_some(acc + i * s))
    }

    /// Coordinates of a node.
    pub fn point(&self, node: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.axes[k][self.coord_index(node, k)])
            .collect()
    }

    /// Node whose coordinates equal `point` exactly.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim() {
            return None;
        }
        let idx: Option<Vec<usize>> = point
            .iter()
            .zip(&self.axes)
            .map(|(x, axis)| axis.iter().position(|c| c == x))
            .collect();
        self.index_of(&idx?)
    }

    /// Neighbor of `node` one step up (`step = 1`) or down (`step = -1`) along `k`.
    pub fn neighbor(&self, node: usize, k: usize, step: isize) -> Option<usize> {
        let i = self.coord_index(node, k) as isize + step;
        (0..self.axes[k].len() as isize)
            .contains(&i)
            .then(|| (node as isize + step * self.strides[k] as isize) as usize)
    }

    /// Componentwise order on nodes: `lower ⪯ upper`.
    pub fn precedes(&self, lower: usize, upper: usize) -> bool {
        (0..self.dim()).all(|k| self.coord_index(lower, k) <= self.coord_index(upper, k))
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.len {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node, len: self.len })
        }
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Probability mass function over the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    grid: Arc<Grid>,
    mass: Vec<f64>,
}

impl Pmf {
    /// Validates masses without rescaling them.
    pub fn new(grid: Arc<Grid>, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: mass.len() });
        }
        for (node, &m) in mass.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonFiniteValue { node, value: m });
            }
            if m < 0.0 {
                return Err(Error::NegativeMass { node, mass: m });
            }
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { grid, mass })
    }

    /// Explicit normalization of nonnegative weights.
    pub fn normalized(grid: Arc<Grid>, weights: Vec<f64>) -> Result<Self> {
        if let Some(node) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFiniteValue { node, value: weights[node] });
        }
        if let Some(node) = weights.iter().position(|&w| w < 0.0) {
            return Err(Error::NegativeMass { node, mass: weights[node] });
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::ZeroWeights);
        }
        Self::new(grid, weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, mass: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(grid: Arc<Grid>, node: usize) -> Result<Self> {
        grid.check_node(node)?;
        let mut mass = vec![0.0; grid.len()];
        mass[node] = 1.0;
        Ok(Self { grid, mass })
    }

    /// Builds a pmf from `(coordinates, mass)` pairs; unlisted nodes get zero.
    pub fn from_points(grid: Arc<Grid>, points: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut mass = vec![0.0; grid.len()];
        for (point, m) in points {
            let node = grid.locate(point).ok_or_else(|| Error::UnknownPoint(point.clone()))?;
            mass[node] += m;
        }
        Self::new(grid, mass)
    }

    /// Internal constructor for transfers that conserve total mass exactly.
    pub(crate) fn from_transfer(grid: Arc<Grid>, mut mass: Vec<f64>) -> Self {
        for m in &mut mass {
            if *m < 0.0 {
                *m = 0.0;
            }
        }
        Self { grid, mass }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass(&self, node: usize) -> f64 {
        self.mass[node]
    }

    /// `Σ mass(x)·u(x)`.
    pub fn expectation(&self, u: &TabulatedUtility) -> Result<f64> {
        if !same_grid(&self.grid, u.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(self.expect_values(u.values()))
    }

    pub(crate) fn expect_values(&self, values: &[f64]) -> f64 {
        self.mass.iter().zip(values).map(|(m, v)| m * v).sum()
    }

    /// One-dimensional marginal along `dim`.
    pub fn marginal(&self, dim: usize) -> Result<Pmf> {
        let k = self.grid.dim();
        if dim >= k {
            return Err(Error::DimensionOutOfRange { dim, k });
        }
        let axis = self.grid.axis(dim).to_vec();
        let mut mass = vec![0.0; axis.len()];
        for (node, m) in self.mass.iter().enumerate() {
            mass[self.grid.coord_index(node, dim)] += m;
        }
        let grid = Arc::new(Grid::new(vec![axis])?);
        Ok(Pmf { grid, mass })
    }

    /// Mean of coordinate `dim`.
    pub fn axis_mean(&self, dim: usize) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(node, m)| m * self.grid.axis(dim)[self.grid.coord_index(node, dim)])
            .sum()
    }

    /// Re-indexes onto a grid whose axes contain this grid's axes.
    pub fn embed(&self, target: &Arc<Grid>) -> Result<Pmf> {
        if target.dim() != self.grid.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), got: self.grid.dim() });
        }
        let maps: Vec<Vec<usize>> = (0..self.grid.dim())
            .map(|k| {
                self.grid
                    .axis(k)
                    .iter()
                    .map(|c| target.axis(k).iter().position(|t| t == c))
                    .collect::<Option<Vec<_>>>()
                    .ok_or(Error::GridMismatch)
            })
            .collect::<Result<_>>()?;
        let mut mass = vec![0.0; target.len()];
        for (node, &m) in self.mass.iter().enumerate() {
            let idx: Vec<usize> =
                (0..self.grid.dim()).map(|k| maps[k][self.grid.coord_index(node, k)]).collect();
            mass[target.index_of(&idx).expect("mapped index lies on target")] = m;
        }
        Ok(Pmf { grid: Arc::clone(target), mass })
    }

    /// Draws `n` i.i.d. nodes using the seeded ChaCha8 stream.
    pub fn sample_offers(&self, seed: u64, n: usize) -> Vec<usize> {
        let sampler = OfferSampler::new(self);
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| sampler.draw(&mut rng)).collect()
    }
}

/// Union-of-coordinates grid carrying both pmfs.
pub fn common_grid(f: &Pmf, g: &Pmf) -> Result<(Arc<Grid>, Pmf, Pmf)> {
    if same_grid(f.grid(), g.grid()) {
        let grid = Arc::clone(f.grid());
        let g = Pmf { grid: Arc::clone(&grid), mass: g.mass.clone() };
        return Ok((grid, f.clone(), g));
    }
    if f.grid().dim() != g.grid().dim() {
        return Err(Error::DimensionMismatch { expected: f.grid().dim(), got: g.grid().dim() });
    }
    let axes = (0..f.grid().dim())
        .map(|k| {
            let mut axis: Vec<f64> =
                f.grid().axis(k).iter().chain(g.grid().axis(k)).copied().collect();
            axis.sort_by(f64::total_cmp);
            axis.dedup();
            axis
        })
        .collect();
    let grid = Arc::new(Grid::new(axes)?);
    let fe = f.embed(&grid)?;
    let ge = g.embed(&grid)?;
    Ok((grid, fe, ge))
}

/// Inverse-CDF sampler over the canonical node order.
#[derive(Debug, Clone)]
pub struct OfferSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl OfferSampler {
    pub fn new(pmf: &Pmf) -> Self {
        let mut acc = 0.0;
        let cumulative = pmf
            .masses()
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        let last_positive = pmf.masses().iter().rposition(|&m| m > 0.0).unwrap_or(0);
        Self { cumulative, last_positive }
    }

    pub fn draw(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }
}

/// Discount, unemployment flow utility and solver tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "SearchParams::default_tol")]
    pub tol: f64,
}

impl SearchParams {
    pub const DEFAULT_TOL: f64 = 1e-10;

    fn default_tol() -> f64 {
        Self::DEFAULT_TOL
    }

    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        Self::with_tol(beta, gamma, Self::DEFAULT_TOL)
    }

    pub fn with_tol(beta: f64, gamma: f64, tol: f64) -> Result<Self> {
        let p = Self { beta, gamma, tol };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParams(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidTolerance(self.tol));
        }
        Ok(())
    }
}

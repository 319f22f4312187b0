//! Utility functions tabulated on a grid, the function classes used by the
//! comparative statics results, and the operators those classes must be
//! closed under.

mod classes;
mod random;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Grid;

pub use classes::{is_member, FunctionClass, Membership, Violation, Witness, DEFAULT_CLASS_TOL};
pub use random::{random_member, MAX_GENERATOR_ATTEMPTS};

/// Utility values at every node of a grid, in canonical node order.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedUtility {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl TabulatedUtility {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { node, value: values[node] });
        }
        Ok(Self { grid, values })
    }

    /// Tabulates `f` at the coordinates of every node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|node| f(&grid.point(node))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: Arc::clone(&self.grid), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Adds a constant of either sign. Constants lie in every class.
    pub fn offset(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn truncate(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// `m·u + n` with `m > 0`, `n ≥ 0`.
    pub fn affine_transform(&self, m: f64, n: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidScale(m));
        }
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::InvalidIntercept(n));
        }
        Ok(self.map(|v| m * v + n))
    }

    /// Pointwise `max(u, level)`.
    pub fn clamp_below(&self, level: f64) -> Self {
        self.map(|v| v.max(level))
    }
}

/// Closed-form utility families.
///
/// Expected memberships (checked in tests):
/// * `linear`: modular and componentwise linear, so convex, componentwise
///   convex, supermodular and ultramodular; increasing iff all weights ≥ 0.
/// * `product`: increasing ultramodular on grids with nonnegative
///   coordinates. Negative coordinates break monotonicity (and, for `K ≥ 3`,
///   supermodularity).
/// * `min`: increasing supermodular; concave along each axis, so not
///   componentwise convex once an axis crosses another coordinate.
/// * `max`: increasing and convex; submodular.
/// * `squared_distance`: separable convex, hence convex, componentwise
///   convex, supermodular and ultramodular.
/// * `custom`: values listed in canonical node order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Linear { weights: Vec<f64> },
    Product,
    Min,
    Max,
    SquaredDistance { center: Vec<f64> },
    Custom { values: Vec<f64> },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Linear { .. } => "linear",
            Family::Product => "product",
            Family::Min => "min",
            Family::Max => "max",
            Family::SquaredDistance { .. } => "squared_distance",
            Family::Custom { .. } => "custom",
        }
    }
}

pub fn tabulate_family(family: &Family, grid: Arc<Grid>) -> Result<TabulatedUtility> {
    let k = grid.dim();
    let check_len = |v: &[f64]| {
        if v.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidFamily(format!("{} parameters must be finite", family.name())));
        }
        Ok(())
    };
    let u = match family {
        Family::Linear { weights } => {
            check_len(weights)?;
            TabulatedUtility::from_fn(grid, |x| x.iter().zip(weights).map(|(x, a)| a * x).sum())
        }
        Family::Product => TabulatedUtility::from_fn(grid, |x| x.iter().product()),
        Family::Min => TabulatedUtility::from_fn(grid, |x| x.iter().copied().fold(f64::INFINITY, f64::min)),
        Family::Max => {
            TabulatedUtility::from_fn(grid, |x| x.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        }
        Family::SquaredDistance { center } => {
            check_len(center)?;
            TabulatedUtility::from_fn(grid, |x| x.iter().zip(center).map(|(x, c)| (x - c).powi(2)).sum())
        }
        Family::Custom { values } => return TabulatedUtility::new(grid, values.clone()),
    };
    // Products of large coordinates can overflow.
    TabulatedUtility::new(u.grid, u.values)
}

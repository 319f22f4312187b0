//! Constructive random members of each function class.
//!
//! A member is a nonnegative combination of generator terms known to lie in
//! the class (signed coefficients only for terms whose negation is also in
//! the class). Terms are evaluated on coordinates rescaled to `[0, 1]` per
//! axis, which is an increasing affine change of variables and preserves
//! every class. Each draw is re-checked with [`is_member`] and redrawn on
//! failure.

use std::sync::Arc;

use rand::Rng as _;

use super::{is_member, FunctionClass, TabulatedUtility, DEFAULT_CLASS_TOL};
use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::rng::Rng;

pub const MAX_GENERATOR_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy)]
enum Piece {
    /// `1[z ≥ a]`: increasing, nonnegative.
    Step(f64),
    /// `max(z − a, 0)^p`: increasing, convex, nonnegative.
    Hinge(f64, i32),
    /// `max(a − z, 0)^p`: decreasing, convex, nonnegative.
    FallingHinge(f64, i32),
    /// `min(z, a)`: increasing, concave, nonnegative.
    Cap(f64),
    /// `(z − c)²`: convex.
    Bowl(f64),
}

impl Piece {
    fn eval(self, z: f64) -> f64 {
        match self {
            Piece::Step(a) => f64::from(u8::from(z >= a)),
            Piece::Hinge(a, p) => (z - a).max(0.0).powi(p),
            Piece::FallingHinge(a, p) => (a - z).max(0.0).powi(p),
            Piece::Cap(a) => z.min(a),
            Piece::Bowl(c) => (z - c).powi(2),
        }
    }
}

#[derive(Debug, Clone)]
enum Term {
    /// Product of nonnegative one-axis pieces on distinct axes.
    Product(Vec<(usize, Piece)>),
    /// Arbitrary values along one axis (separable, hence modular).
    Free(usize, Vec<f64>),
    MinPair(usize, usize),
    MaxPair(usize, usize),
    /// `(Σ z_k)²`.
    SquaredSum,
    /// `max_j (a_j·z + b_j)`.
    MaxAffine(Vec<(Vec<f64>, f64)>),
    /// `Π (z_k − m_k)`, linear along each axis.
    Multilinear(Vec<f64>),
    Linear(Vec<f64>),
}

impl Term {
    fn eval(&self, z: &[f64], idx: &[usize]) -> f64 {
        match self {
            Term::Product(pieces) => pieces.iter().map(|&(k, p)| p.eval(z[k])).product(),
            Term::Free(k, values) => values[idx[*k]],
            Term::MinPair(p, q) => z[*p].min(z[*q]),
            Term::MaxPair(p, q) => z[*p].max(z[*q]),
            Term::SquaredSum => z.iter().sum::<f64>().powi(2),
            Term::MaxAffine(planes) => planes
                .iter()
                .map(|(a, b)| a.iter().zip(z).map(|(a, z)| a * z).sum::<f64>() + b)
                .fold(f64::NEG_INFINITY, f64::max),
            Term::Multilinear(m) => z.iter().zip(m).map(|(z, m)| z - m).product(),
            Term::Linear(w) => w.iter().zip(z).map(|(w, z)| w * z).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Orthant,
    IncreasingAxis,
    IncreasingProduct,
    ConvexIncreasingAxis,
    ConvexIncreasingProduct,
    ConvexFallingProduct,
    BowlAxis,
    Free,
    MinPair,
    MaxPair,
    SquaredSum,
    MaxAffine,
    Multilinear,
    SignedLinear,
    PositiveLinear,
}

/// Generator kinds whose nonnegative combinations stay in the class.
fn kinds(class: FunctionClass) -> &'static [Kind] {
    use Kind::*;
    match class {
        FunctionClass::Increasing => &[
            Orthant,
            IncreasingAxis,
            IncreasingProduct,
            MinPair,
            MaxPair,
            SquaredSum,
            PositiveLinear,
        ],
        FunctionClass::Convex => &[ConvexIncreasingAxis, BowlAxis, MaxPair, SquaredSum, MaxAffine, SignedLinear],
        FunctionClass::ComponentwiseConvex => &[
            ConvexIncreasingAxis,
            BowlAxis,
            ConvexIncreasingProduct,
            ConvexFallingProduct,
            MaxAffine,
            Multilinear,
            SignedLinear,
        ],
        FunctionClass::Supermodular => &[
            Free,
            Orthant,
            IncreasingProduct,
            ConvexFallingProduct,
            MinPair,
            SquaredSum,
            SignedLinear,
        ],
        FunctionClass::Ultramodular => &[
            ConvexIncreasingAxis,
            BowlAxis,
            ConvexIncreasingProduct,
            ConvexFallingProduct,
            SquaredSum,
            SignedLinear,
        ],
        FunctionClass::IncreasingSupermodular => &[
            Orthant,
            IncreasingAxis,
            IncreasingProduct,
            MinPair,
            SquaredSum,
            PositiveLinear,
        ],
        FunctionClass::IncreasingUltramodular => &[
            ConvexIncreasingAxis,
            ConvexIncreasingProduct,
            SquaredSum,
            PositiveLinear,
        ],
    }
}

fn increasing_piece(rng: &mut Rng) -> Piece {
    match rng.random_range(0..3) {
        0 => Piece::Step(rng.random_range(0.05..1.0)),
        1 => Piece::Hinge(rng.random_range(0.0..0.9), rng.random_range(1..=2)),
        _ => Piece::Cap(rng.random_range(0.1..1.0)),
    }
}

fn convex_increasing_piece(rng: &mut Rng) -> Piece {
    Piece::Hinge(rng.random_range(0.0..0.9), rng.random_range(1..=2))
}

fn distinct_axes(rng: &mut Rng, k: usize, count: usize) -> Vec<usize> {
    let mut axes: Vec<usize> = (0..k).collect();
    for i in 0..count {
        let j = rng.random_range(i..k);
        axes.swap(i, j);
    }
    axes.truncate(count);
    axes
}

fn draw_term(kind: Kind, grid: &Grid, rng: &mut Rng) -> Option<(Term, bool)> {
    let k = grid.dim();
    let axis = rng.random_range(0..k);
    let product_of = |rng: &mut Rng, piece: fn(&mut Rng) -> Piece| -> Option<Term> {
        if k < 2 {
            return None;
        }
        let count = rng.random_range(2..=k.min(3));
        let axes = distinct_axes(rng, k, count);
        Some(Term::Product(axes.into_iter().map(|a| (a, piece(rng))).collect()))
    };
    let pair = |rng: &mut Rng| -> Option<(usize, usize)> {
        (k >= 2).then(|| {
            let a = distinct_axes(rng, k, 2);
            (a[0], a[1])
        })
    };
    let term = match kind {
        Kind::Orthant => {
            let count = rng.random_range(1..=k);
            let axes = distinct_axes(rng, k, count);
            Term::Product(axes.into_iter().map(|a| (a, Piece::Step(rng.random_range(0.05..1.0)))).collect())
        }
        Kind::IncreasingAxis => Term::Product(vec![(axis, increasing_piece(rng))]),
        Kind::IncreasingProduct => product_of(rng, increasing_piece)?,
        Kind::ConvexIncreasingAxis => Term::Product(vec![(axis, convex_increasing_piece(rng))]),
        Kind::ConvexIncreasingProduct => product_of(rng, convex_increasing_piece)?,
        Kind::ConvexFallingProduct => {
            product_of(rng, |r| Piece::FallingHinge(r.random_range(0.1..1.0), r.random_range(1..=2)))?
        }
        Kind::BowlAxis => Term::Product(vec![(axis, Piece::Bowl(rng.random_range(0.0..1.0)))]),
        Kind::Free => {
            let values = (0..grid.axis(axis).len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            return Some((Term::Free(axis, values), true));
        }
        Kind::MinPair => {
            let (p, q) = pair(rng)?;
            Term::MinPair(p, q)
        }
        Kind::MaxPair => {
            let (p, q) = pair(rng)?;
            Term::MaxPair(p, q)
        }
        Kind::SquaredSum => Term::SquaredSum,
        Kind::MaxAffine => {
            let planes = (0..rng.random_range(2..=4))
                .map(|_| ((0..k).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(-1.0..1.0)))
                .collect();
            Term::MaxAffine(planes)
        }
        Kind::Multilinear => {
            if k < 2 {
                return None;
            }
            let centers = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            return Some((Term::Multilinear(centers), true));
        }
        Kind::SignedLinear => {
            let w = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            return Some((Term::Linear(w), false));
        }
        Kind::PositiveLinear => Term::Linear((0..k).map(|_| rng.random_range(0.0..1.0)).collect()),
    };
    Some((term, false))
}

fn normalized_coords(grid: &Grid, node: usize) -> Vec<f64> {
    (0..grid.dim())
        .map(|k| {
            let axis = grid.axis(k);
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            if hi > lo {
                (axis[grid.coord_index(node, k)] - lo) / (hi - lo)
            } else {
                0.0
            }
        })
        .collect()
}

fn draw_candidate(class: FunctionClass, grid: &Arc<Grid>, rng: &mut Rng) -> TabulatedUtility {
    let allowed = kinds(class);
    let mut terms = Vec::new();
    let wanted = rng.random_range(1..=4);
    while terms.len() < wanted {
        let kind = allowed[rng.random_range(0..allowed.len())];
        if let Some((term, signed)) = draw_term(kind, grid, rng) {
            let mut coef = rng.random_range(0.2..2.0);
            if signed && rng.random_bool(0.5) {
                coef = -coef;
            }
            terms.push((coef, term));
        }
    }
    let scale = rng.random_range(0.5..5.0);
    let values = (0..grid.len())
        .map(|node| {
            let z = normalized_coords(grid, node);
            let idx = grid.multi_index(node);
            scale * terms.iter().map(|(c, t)| c * t.eval(&z, &idx)).sum::<f64>()
        })
        .collect();
    TabulatedUtility { grid: Arc::clone(grid), values }
}

/// Draws a member of `class` on `grid`, verified by [`is_member`].
pub fn random_member(class: FunctionClass, grid: &Arc<Grid>, rng: &mut Rng) -> Result<TabulatedUtility> {
    for _ in 0..MAX_GENERATOR_ATTEMPTS {
        let candidate = draw_candidate(class, grid, rng);
        if is_member(&candidate, class, DEFAULT_CLASS_TOL)?.holds {
            return Ok(candidate);
        }
    }
    Err(Error::GeneratorExhausted { class, attempts: MAX_GENERATOR_ATTEMPTS })
}

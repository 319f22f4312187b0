use thiserror::Error;

use crate::utility::FunctionClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid must have at least one axis")]
    EmptyAxes,
    #[error("axis {axis} has no coordinates")]
    EmptyAxis { axis: usize },
    #[error("axis {axis} coordinate {index} is not finite")]
    NonFiniteCoordinate { axis: usize, index: usize },
    #[error("axis {axis} is not strictly increasing at coordinate {index}")]
    UnsortedAxis { axis: usize, index: usize },

    #[error("expected {expected} values (one per grid node), got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative mass {mass} at node {node}")]
    NegativeMass { node: usize, mass: f64 },
    #[error("masses sum to {sum}, which is not within 1e-9 of 1")]
    NotNormalized { sum: f64 },
    #[error("weights must have a positive finite sum to be normalized")]
    ZeroWeights,
    #[error("non-finite value {value} at node {node}")]
    NonFiniteValue { node: usize, value: f64 },

    #[error("operands live on different grids")]
    GridMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {dim} out of range for a {k}-dimensional grid")]
    DimensionOutOfRange { dim: usize, k: usize },
    #[error("node {node} out of range for a grid with {len} nodes")]
    NodeOutOfRange { node: usize, len: usize },
    #[error("point {0:?} is not a node of the grid")]
    UnknownPoint(Vec<f64>),

    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),
    #[error("affine scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("affine intercept must be nonnegative and finite, got {0}")]
    InvalidIntercept(f64),

    #[error("node {to} does not dominate node {from} componentwise")]
    NotComparable { from: usize, to: usize },
    #[error("node {node} holds {available} but {requested} was requested")]
    InsufficientMass { node: usize, available: f64, requested: f64 },
    #[error("node {node} has no neighbor on both sides along axis {axis}")]
    BoundaryNode { node: usize, axis: usize },
    #[error("invalid transfer: {0}")]
    InvalidTransfer(String),

    #[error("fixed-point solver did not converge after {iterations} iterations (defect {defect:e})")]
    NonConvergence { iterations: usize, defect: f64 },
    #[error("fixed-point ({fixed_point}) and bisection ({bisection}) solutions disagree")]
    SolverDisagreement { fixed_point: f64, bisection: f64 },

    #[error("linear program has {size} {what}, limit is {limit}")]
    LpTooLarge { what: &'static str, size: usize, limit: usize },
    #[error("grid has {nodes} nodes, brute-force limit is {limit}")]
    GridTooLarge { nodes: usize, limit: usize },

    #[error("could not generate a verified {class} member after {attempts} attempts")]
    GeneratorExhausted { class: FunctionClass, attempts: usize },
    #[error("invalid suite specification: {0}")]
    InvalidSpec(String),
}

use thiserror::Error;

use crate::complex::VerifyReport;
use crate::decompose::HypothesisReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distance matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },

    #[error("distance matrix entry ({i},{j}) is not a finite nonnegative length: {value}")]
    BadEntry { i: usize, j: usize, value: f64 },

    #[error("distance matrix has nonzero diagonal at {i}: {value}")]
    NonzeroDiagonal { i: usize, value: f64 },

    #[error("distance matrix is asymmetric at ({i},{j}): {dij} != {dji}")]
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },

    #[error("triangle inequality violated by ({i},{j},{k}): d(i,j) + d(j,k) = {via} < d(i,k) = {direct}")]
    TriangleViolation { i: usize, j: usize, k: usize, via: f64, direct: f64 },

    #[error("mesh resolution must be positive and finite, got {0}")]
    InvalidMesh(f64),

    #[error("graph has {components} connected components; infinite distances are unsupported")]
    Disconnected { components: usize },

    #[error("invalid edge ({u},{v}) with length {len}")]
    InvalidEdge { u: usize, v: usize, len: f64 },

    #[error("point id {id} out of range for a space of {len} points")]
    InvalidPoint { id: usize, len: usize },

    #[error("target has {size} points, exceeding the exact-solver budget of {budget}; use the greedy solver")]
    BudgetExceeded { size: usize, budget: usize },

    #[error("radius cap {zeta} is below the mesh floor {mesh_h}; no admissible cover exists")]
    Infeasible { zeta: f64, mesh_h: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {point} at distance {dist} lies outside the annulus [{r1}, {r2}]")]
    OutsideAnnulus { point: usize, dist: f64, r1: f64, r2: f64 },

    #[error("radius window too thin for a shell of width {shell_width}; need R >= {required_r}")]
    RangeTooThin { shell_width: f64, required_r: f64 },

    #[error("space too coarse: mesh_h = {mesh_h} exceeds D/4 = {limit}")]
    TooCoarse { mesh_h: f64, limit: f64 },

    #[error("apex id {0} already used by the base complex")]
    ApexCollision(usize),

    #[error("simplex {0:?} is not in the complex")]
    UnknownSimplex(Vec<usize>),

    #[error("point {0} is not assigned to any simplex")]
    UnassignedPoint(usize),

    #[error("hypothesis violated: worst ball content {} exceeds {}", .0.worst_value, .0.threshold)]
    HypothesisFailed(Box<HypothesisReport>),

    #[error("recursion failed at level {level} (dimension {n})")]
    RecursionFailed { level: usize, n: usize, source: Box<Error> },

    #[error("certificate rejected by verifier: max fiber {} > R = {}", .0.max_fiber, .0.r)]
    CertificateRejected(Box<VerifyReport>),

    #[error("neighborhood of {x} misses {missing} points of the ball B(x, R)")]
    NeighborhoodMissingBall { x: usize, missing: usize },

    #[error("malformed drawing: {0}")]
    MalformedDrawing(String),

    #[error("generator would produce {points} points, over the budget of {budget}")]
    PointBudget { points: usize, budget: usize },
}

//! Grid-based relative capacity of variable-exponent weighted Dirichlet type,
//! Wiener-style thinness diagnostics, and fine-topology tools.
//!
//! The crate is organized bottom-up:
//! - [`grid`]: uniform nodal grids, fields, masks, rasterization, morphology;
//! - [`fieldexpr`]: closed-form expressions for exponents/weights;
//! - [`spaces`]: modulars, Luxemburg/Sobolev norms, admissibility checks;
//! - [`capacity`]: the Dirichlet energy and its constrained minimization;
//! - [`wiener`]: dyadic thinness sums/integrals and classification;
//! - [`fine`]: finely-open diagnostics, fine interior/closure, the spine;
//! - [`properties`]: randomized verification of the capacity axioms;
//! - [`scenario`]: scenario files, the task runner, and report emission;
//! - [`render`]: deterministic SVG heatmaps.
//!
//! All numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64` for the common case.

pub mod capacity;
pub mod fieldexpr;
pub mod fine;
pub mod grid;
pub mod properties;
pub mod render;
pub mod scalar;
pub mod scenario;
pub mod spaces;
pub mod wiener;

pub use scalar::Scalar;

/// `f64` grid.
pub type Grid = grid::Grid<f64>;
/// `f64` nodal field.
pub type ScalarField = grid::ScalarField<f64>;
/// `f64` node mask.
pub type GridSet = grid::GridSet<f64>;
/// `f64` exponent field.
pub type ExponentField = spaces::ExponentField<f64>;
/// `f64` weight field.
pub type WeightField = spaces::WeightField<f64>;
/// `f64` capacity result.
pub type CapacityResult = capacity::CapacityResult<f64>;
/// `f64` capacity cache.
pub type CapacityCache = capacity::CapacityCache<f64>;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("ball below grid resolution")]
    BallBelowResolution,
    #[error("point is not a grid node: {0}")]
    NotANode(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("expression error at byte {offset}: {msg}")]
    Expr { offset: usize, msg: String },
    #[error("expression evaluation failed: {0}")]
    ExprEval(String),
    #[error("inadmissible exponent/weight: {0}")]
    Inadmissible(String),
    #[error("compact set touches boundary")]
    TouchesBoundary,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

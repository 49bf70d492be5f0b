//! Error type shared by every stage.

use alloc::string::String;

#[allow(missing_docs)]
/// Errors raised by graph construction, measures, featurization and learning.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty graph")]
    EmptyGraph,
    #[error("invalid coordinate at point {index}")]
    InvalidCoordinate { index: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("node {node} out of range (n_nodes = {n_nodes})")]
    NodeOutOfRange { node: usize, n_nodes: usize },
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("degenerate graph: needs at least 2 nodes")]
    DegenerateGraph,
    #[error("eigenvector undefined: graph has no edges")]
    EigenvectorUndefined,
    #[error("power iteration did not converge (residual {residual:e})")]
    NotConverged { residual: f64 },
    #[error("katz divergent alpha: {alpha} >= 1/{lambda_max}")]
    KatzDivergentAlpha { alpha: f64, lambda_max: f64 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("layout mismatch: expected {expected} features, got {found}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("single class: training needs at least two classes")]
    SingleClass,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("too few images: {0}")]
    TooFewImages(String),
}

/// Crate result alias.
pub type Result<T> = core::result::Result<T, Error>;

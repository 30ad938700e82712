use thiserror::Error;

/// Errors produced across the localization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("ring {ring}: degenerate ring ({distinct} distinct vertices, need at least 3)")]
    DegenerateRing { ring: usize, distinct: usize },
    #[error("ring {ring}: label count {labels} does not match edge count {edges}")]
    LabelCount { ring: usize, labels: usize, edges: usize },
    #[error("ring {ring}: edges {first} and {second} intersect")]
    SelfIntersecting { ring: usize, first: usize, second: usize },
    #[error("ring {ring}, edge {edge}: unknown semantic label {label:?}")]
    UnknownLabel { ring: usize, edge: usize, label: String },
    #[error("free-space hint ({x}, {y}) is not inside the map's free space")]
    HintOutsideFreeSpace { x: f64, y: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("location ({x}, {y}) is outside free space")]
    OutsideFreeSpace { x: f64, y: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no jointly valid segments")]
    EmptyJointMask,
    #[error("all valid segments have zero norm")]
    ZeroContext,
    #[error("origin coincides with map point")]
    CoincidentPoint,
    #[error("unknown codebook class {0}")]
    UnknownClass(usize),
    #[error("posterior grid has no free cells")]
    NoFreeCells,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, iteration {iteration}")]
    NonFiniteLoss { epoch: usize, iteration: usize },
    #[error("length mismatch: {results} results vs {truths} ground truths")]
    LengthMismatch { results: usize, truths: usize },
    #[error("infeasible scene parameters: {0}")]
    InfeasibleScene(String),
    #[error("codebook file: {0}")]
    Codebook(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

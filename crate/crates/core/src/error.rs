use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("invalid lattice specification: {0}")]
    InvalidSpec(String),

    #[error("empty lattice: no cell of size {epsilon} fits inside the enlarged domain")]
    EmptyLattice { epsilon: f64 },

    #[error("margin violation: axis {axis} has margin {margin} < required {required}")]
    MarginViolation {
        axis: usize,
        margin: f64,
        required: f64,
    },

    #[error("fringe point {0:?}: not covered by any stored cell")]
    FringePoint(Vec<f64>),

    #[error("lattice mismatch: field belongs to a different lattice")]
    LatticeMismatch,

    #[error("quadrature grid is not aligned with the lattice cells: {0}")]
    QuadratureMisalignment(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid too coarse: axis {axis} has {nodes} nodes (need at least 3)")]
    GridTooCoarse { axis: usize, nodes: usize },

    #[error("malformed corner matrix: Z Z^T is singular")]
    SingularCornerMatrix,

    #[error("model defect: {0}")]
    ModelDefect(String),

    #[error("elasticity tensor symmetry violated: {kind} defect {defect:e}")]
    SymmetryViolation { kind: &'static str, defect: f64 },

    #[error("non-finite cell energy in cell {cell}")]
    NonFiniteEnergy { cell: usize },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("instability at t = {time}: norm {norm:e} exceeds {limit:e}")]
    Instability { time: f64, norm: f64, limit: f64 },

    #[error("implicit solve did not converge after {iterations} iterations (residual {residual:e})")]
    ImplicitSolveFailed { iterations: usize, residual: f64 },

    #[error("CFL violation: dt = {dt} exceeds stable bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("resolution budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

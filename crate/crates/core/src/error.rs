use alloc::boxed::Box;
use alloc::string::String;

use crate::kkt::KktSolution;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("constraint region is not aligned with the mesh: triangle {triangle} partially overlaps K")]
    MisalignedRegion { triangle: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported quadrature order {0}; supported orders are 1..=8")]
    UnsupportedQuadrature(u32),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("linear solver failed: {0}")]
    LinearSolve(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("active-set iteration did not converge after {iterations} outer iterations (residual {residual:.3e})")]
    KktNonConvergence { iterations: usize, residual: f64, last: Box<KktSolution> },

    #[error("degenerate active set: {0}")]
    DegenerateActiveSet(String),

    #[error("no tabulated Gagliardo-Nirenberg bound for q = {q}; supply C_q explicitly (c_q = <value>)")]
    UnsupportedConstant { q: f64 },

    #[error("refusing to certify a non-stationary point (KKT residual {residual:.3e} > 1e-8)")]
    NotStationary { residual: f64 },

    #[error("meshes are not nested")]
    NonNested,

    #[error("error functional must be positive, got {0}")]
    NonPositiveError(f64),

    #[error("level {level}: {source}")]
    AtLevel { level: u32, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_level(self, level: u32) -> Self {
        Error::AtLevel { level, source: Box::new(self) }
    }
}

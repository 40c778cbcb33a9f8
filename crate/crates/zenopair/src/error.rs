use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("Zeno reduction undefined without dissipation")]
    ZenoReductionUndefined,

    #[error("detuning grid must be strictly monotone and non-empty")]
    BadGrid,

    #[error("ambiguous branch assignment near x = {x}: overlaps within {gap:.2e} after {depth} bisections")]
    AmbiguousBranches { x: f64, gap: f64, depth: usize },

    #[error("integrator tolerance not reached; last good time t = {t} s ({msg})")]
    IntegratorFailure { t: f64, msg: String },

    #[error("non-physical density matrix: {0}")]
    NonPhysicalDensityMatrix(String),

    #[error("branch tracking failed: {0}")]
    BranchTrackingFailed(String),

    #[error("fit did not converge after {iterations} iterations (best residual {residual:.3e})")]
    FitDidNotConverge { iterations: usize, residual: f64 },

    #[error("fit needs at least 4 points with distinct times")]
    FitUnderdetermined,
}

pub type Result<T> = std::result::Result<T, Error>;

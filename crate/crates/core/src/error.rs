use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("regressor matrix is rank deficient (rank {rank} of {cols} columns)")]
    SingularDesign { rank: usize, cols: usize },

    #[error("insufficient sample: {observations} observations for {regressors} regressors")]
    InsufficientSample {
        observations: usize,
        regressors: usize,
    },

    #[error("structural matrix is singular (|det| = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("weak proxy: first-stage covariance {covariance:e} is below the guard {threshold:e}")]
    WeakProxy { covariance: f64, threshold: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("optimizer did not converge after {iterations} iterations (objective {objective})")]
    NonConvergence {
        iterations: u64,
        objective: f64,
        best: DMatrix<f64>,
    },

    #[error("chain initialization failed: {0}")]
    Initialization(String),

    #[error("chain stuck: block `{block}` accepted no proposals in the window ending at iteration {iteration}")]
    StuckChain { block: String, iteration: usize },

    #[error("mapping to the simultaneous-equation parameterization is degenerate: {0}")]
    MappingDegenerate(String),

    #[error("data error at row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

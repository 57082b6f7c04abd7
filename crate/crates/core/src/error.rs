use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative edge mean: dot(k_{a}, k_{b}) = {dot} < 0")]
    NegativeProduct { a: usize, b: usize, dot: f64 },

    #[error("atom weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },

    #[error("model has zero average degree")]
    ZeroDegree,

    #[error("theta = {theta} exceeds kappa = {kappa}; edge means would be negative")]
    ThetaTooLarge { kappa: f64, theta: f64 },

    #[error("simplex angle {phi} rad has negative cosine")]
    BadAngle { phi: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed point did not converge in {max_iter} iterations (residual {residual:e})")]
    NoConvergence { max_iter: usize, residual: f64 },

    #[error("solution at z = {z} is on a non-physical branch (Im g = {im_g:e})")]
    NonPhysicalBranch { z: String, im_g: f64 },

    #[error("no real solution of the fixed point at z = {z}")]
    NoRealSolution { z: f64 },

    #[error("{failed} of {total} density points failed to converge")]
    TooManyFailures { failed: usize, total: usize },

    #[error("no spectral density found in [{lo}, {hi}]")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("outlier {r}: g is not monotone on [{lo}, {hi}]")]
    BracketFailure { r: usize, lo: f64, hi: f64 },

    #[error("dense eigensolve requested for n = {n} above the limit {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("iterative eigensolver did not converge; residuals {residuals:?}")]
    IterativeNoConvergence { residuals: Vec<f64> },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by an invalid model or malformed input rather
    /// than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NegativeProduct { .. }
                | Error::WeightSum { .. }
                | Error::ZeroDegree
                | Error::ThetaTooLarge { .. }
                | Error::BadAngle { .. }
                | Error::InvalidModel(_)
                | Error::InvalidArgument(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

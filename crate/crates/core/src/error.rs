use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("tolerance not achievable: {0}")]
    ToleranceNotAchievable(String),

    #[error("matrix is not symplectic (residual {residual:e} > {tolerance:e})")]
    NotSymplectic { residual: f64, tolerance: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("degenerate parameterization: {0}")]
    DegenerateParameterization(String),

    #[error("every cell is caustic for target pair {0}")]
    AllCaustic(usize),

    #[error("disc approached the theta singularity at t = {t} (|sin theta| = {sin_theta:e})")]
    ThetaSingularity { t: f64, sin_theta: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures raised while integrating an ODE.
    pub fn is_integration_failure(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::ToleranceNotAchievable(_)
                | Error::NonFinite(_)
                | Error::ThetaSingularity { .. }
        )
    }
}

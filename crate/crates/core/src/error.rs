use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { abscissa: f64 },

    #[error("gain is not stabilizing (closed-loop spectral abscissa {abscissa:.3e})")]
    NotStabilizing { abscissa: f64 },

    #[error("linear system is numerically singular: {0}")]
    SingularSystem(String),

    #[error("eigenvalue routine did not converge")]
    EigenFailure,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("reference evaluation is not stationary (gradient norm {grad_norm:.3e})")]
    NotOptimal { grad_norm: f64 },

    #[error("gradient factor vanished; the iterate is already stationary")]
    Converged,

    #[error("step controller underflow at t = {t:.6e} (step {step:.3e})")]
    StepFailure { t: f64, step: f64 },

    #[error("sparsity pattern allows no entries")]
    EmptyPattern,

    #[error("initial gain has nonzero entries outside the sparsity pattern")]
    OffPattern,

    #[error("state weight Q is singular (smallest eigenvalue {0:.3e})")]
    SingularQ(f64),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("invalid plant: {0}")]
    InvalidPlant(String),

    #[error("certified step left the stabilizing set at iteration {0}")]
    CertificateViolated(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Parse(_)
            | Error::InvalidPlant(_)
            | Error::UnknownPreset(_)
            | Error::Dimension(_)
            | Error::EmptyPattern
            | Error::OffPattern
            | Error::SingularQ(_) => 2,
            Error::NotHurwitz { .. } | Error::NotStabilizing { .. } => 3,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 5,
            _ => 4,
        }
    }
}

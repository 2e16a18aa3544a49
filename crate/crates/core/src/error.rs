use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is singular: smallest singular value {sigma_min:e} <= tolerance {tol:e}")]
    Singular { sigma_min: f64, tol: f64 },

    #[error("lambda = {re}{im:+}i is not unimodular")]
    NotUnimodular { re: f64, im: f64 },

    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error(
        "resolvent is near-singular at lambda = {re}{im:+}i (distance to spectrum ~ {distance:e})"
    )]
    NearSingularResolvent { re: f64, im: f64, distance: f64 },

    #[error(
        "contour |lambda| = {radius} passes within {distance:e} of the spectrum (guard {guard:e})"
    )]
    ContourThroughSpectrum {
        radius: f64,
        distance: f64,
        guard: f64,
    },

    #[error("decay certificate failed: r_plus = {r_plus}, r_minus = {r_minus} (both must be < 1)")]
    DecayCertificate { r_plus: f64, r_minus: f64 },

    #[error(
        "series truncation at {tail_k} terms leaves a tail bound of {bound:e}, above {limit:e}"
    )]
    TailBound {
        tail_k: usize,
        bound: f64,
        limit: f64,
    },

    #[error("operator kind mismatch: {0}")]
    KindMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed operator JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const CERTIFICATE: i32 = 4;
}

impl Error {
    /// Maps an error onto the stable exit-code contract of the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::NotUnimodular { .. }
            | Error::KindMismatch(_)
            | Error::InvalidArgument(_)
            | Error::Json(_)
            | Error::Io(_) => exit::INPUT,
            Error::Singular { .. }
            | Error::NoConvergence(_)
            | Error::NearSingularResolvent { .. }
            | Error::ContourThroughSpectrum { .. } => exit::NUMERICAL,
            Error::DecayCertificate { .. } | Error::TailBound { .. } => exit::CERTIFICATE,
        }
    }
}

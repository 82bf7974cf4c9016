use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not a hyperbolic toral automorphism: {0}")]
    NotHyperbolic(String),

    #[error("rotation map geometry is infeasible: {0}")]
    InfeasibleGeometry(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integrator exceeded its step budget ({steps} steps)")]
    NonConvergence { steps: usize },

    #[error("orbit point lies on the singularity set: {0}")]
    OnSingularity(String),

    #[error("curve evolution requires a positive leading eigenvalue")]
    UnsupportedOrientation,

    #[error("failed to parse parameters: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

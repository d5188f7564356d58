use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("overlap matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("step rejected after {halvings} halvings at t = {t:.6} a.u.: norm drift {drift:.3e}")]
    NormDrift { t: f64, drift: f64, halvings: u32 },

    #[error("atoms {i} and {j} are {distance:.4} bohr apart (minimum 0.1)")]
    AtomOverlap { i: usize, j: usize, distance: f64 },

    #[error("states {i} and {j} are degenerate (gap {gap:.3e} hartree)")]
    DegeneratePair { i: usize, j: usize, gap: f64 },

    #[error("cannot collapse onto state {index}: population {population:.3e}")]
    EmptyBranch { index: usize, population: f64 },

    #[error("quadrature did not converge: estimated error {error:.3e} after {evaluations} panels")]
    Quadrature { error: f64, evaluations: usize },

    #[error("record schema mismatch: expected version {expected}, found {found}")]
    Schema { expected: u32, found: String },

    #[error("run aborted at t = {t:.6} a.u. ({source}); last good state: {}", checkpoint.as_deref().unwrap_or("not saved"))]
    Aborted {
        t: f64,
        checkpoint: Option<String>,
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors raised by the numerics rather than by the input.
    pub fn is_numerical(&self) -> bool {
        if let Error::Aborted { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::Singular(_)
                | Error::NormDrift { .. }
                | Error::AtomOverlap { .. }
                | Error::DegeneratePair { .. }
                | Error::EmptyBranch { .. }
                | Error::Quadrature { .. }
        )
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or argument is outside its admissible range.
    #[error("{field} {requirement} (got {value})")]
    Domain {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e}, last iterate {last_re} + {last_im}i)")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        last_re: f64,
        last_im: f64,
    },

    #[error("singular normal equations in {0}")]
    Singular(&'static str),

    #[error("time-marching diverged at t = {t} (|x| = {magnitude:e})")]
    Diverged { t: f64, magnitude: f64 },

    #[error("series kernel lost validity at t = {valid_until} before the end of the horizon")]
    KernelInvalid { valid_until: f64 },

    #[error("found {found} positive peaks, at least {needed} required")]
    InsufficientPeaks { found: usize, needed: usize },

    #[error("unknown case id {0:?}")]
    UnknownCase(String),

    #[error("scenario: {0}")]
    Scenario(String),
}

impl Error {
    pub(crate) fn domain(field: &'static str, requirement: &'static str, value: f64) -> Self {
        Error::Domain {
            field,
            requirement,
            value,
        }
    }
}

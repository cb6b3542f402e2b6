use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma has a pole at x = {0}")]
    Pole(f64),

    #[error("result overflows f64 at x = {0}")]
    Overflow(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integral diverges: s = {s} must exceed m/2 = {half_m}")]
    Divergent { s: f64, half_m: f64 },

    #[error("quadrature did not reach tolerance (estimate {value:e}, error {error:e})")]
    Quadrature { value: f64, error: f64 },

    #[error("no eigenvalue below cutoff {cutoff} (lowest is {lowest})")]
    EmptySpectrum { cutoff: f64, lowest: f64 },

    #[error("enumeration below cutoff {cutoff} exceeds the cap of {cap} modes")]
    ResourceLimit { cutoff: f64, cap: usize },

    #[error("tail bound {tail:e} exceeds {ratio:e} of the trace value {value:e}; raise the cutoff")]
    InsufficientCutoff { tail: f64, value: f64, ratio: f64 },

    #[error("least-squares design is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("finite part unstable: full window gives {full}, nested window gives {nested}")]
    Unstable { full: f64, nested: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("unsupported argument: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("report has no `{0}` section")]
    MissingSection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

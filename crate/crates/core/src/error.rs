use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("non-real spectrum: root with imaginary part {imag:e} exceeds tolerance {tol:e}")]
    NonRealSpectrum { imag: f64, tol: f64 },

    #[error("order ambiguous: asymptotic slope {slope} is not within {tol} of an integer")]
    OrderAmbiguous { slope: f64, tol: f64 },

    #[error("series divergent: |tanh(lambda)| * max(1, |alpha|) = {ratio} >= 1")]
    SeriesDivergent { ratio: f64 },

    #[error("singular matrix")]
    Singular,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid step mismatch: {0} vs {1}")]
    StepMismatch(f64, f64),

    #[error("window too small: tail mass bound {tail:e} exceeds 1e-8 (increase t_max)")]
    InsufficientWindow { tail: f64 },

    #[error("sampler rejected {0} consecutive draws")]
    Sampling(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

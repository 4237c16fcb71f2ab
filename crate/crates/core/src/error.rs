use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frequency outside the exponential-moment strip: Im(u) = {im}, strip ({lo}, {hi})")]
    StripViolation { im: f64, lo: f64, hi: f64 },
    #[error("positive jumps have infinite variation, d diverges to -inf")]
    DivergentPositiveJumps,
    #[error("integral diverges: {0}")]
    NonIntegrable(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no sign change on the bracket [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("no exercised node before maturity")]
    EmptyExerciseRegion,
    #[error("premium bound violated at t={t}, s={s}: {detail}")]
    BoundViolation { t: f64, s: f64, detail: String },
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("rate law needs the stopping threshold y*")]
    MissingYStar,
    #[error("not converged: {0}")]
    Unconverged(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

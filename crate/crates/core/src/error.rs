use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("a point already occupies the origin")]
    OriginOccupied,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("edge length must be positive, got {0}")]
    InvalidLength(f64),
    #[error("cost kind mismatch: {0}")]
    WrongKind(String),
    #[error("invalid matching: {0}")]
    InvalidMatching(String),
    #[error("edges share an endpoint")]
    InvalidPair,
    #[error("configuration has {points} points, the cap is {cap}")]
    TooLarge { points: usize, cap: usize },
    #[error("two distances coincide within tolerance: {0} and {1}")]
    DegenerateDistances(f64, f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("window [{have_lo}, {have_hi}] does not cover [{need_lo}, {need_hi}]")]
    WindowTooSmall {
        have_lo: f64,
        have_hi: f64,
        need_lo: f64,
        need_hi: f64,
    },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("malformed json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

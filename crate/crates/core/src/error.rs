use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inconsistent nonlinearity: sigma'(0) = {sigma_prime_zero} but a^2 = {a_squared}")]
    Consistency { sigma_prime_zero: f64, a_squared: f64 },

    #[error("argument {value} outside the validity interval [{lo}, {hi}] of the polynomial nonlinearity")]
    OutsideValidity { value: f64, lo: f64, hi: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("eigen-solver failed to converge at xi = {xi}")]
    EigenConvergence { xi: f64 },

    #[error("time step {dt} violates the CFL guard dt <= {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite state encountered at t = {t}")]
    BlowUp { t: f64 },

    #[error("decay floor reached: value {value} at t = {t} is not positive; use a larger domain or an earlier fit window")]
    DecayFloor { t: f64, value: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("wrap-around guard violated: t = {t} exceeds L/(2 max speed) = {limit}")]
    WrapAround { t: f64, limit: f64 },

    #[error("energy identity undefined: initial energy is zero")]
    ZeroEnergy,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

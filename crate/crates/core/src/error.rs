use thiserror::Error;

/// Errors raised by the two-level laser toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("N must be ≥ 1 (got {0})")]
    AtomCount(f64),
    #[error("N must be an integer (got {0})")]
    AtomCountFractional(f64),
    #[error("alpha must be positive (got {0})")]
    Alpha(f64),
    #[error("gamma must be non-negative (got {0})")]
    Gamma(f64),
    #[error("J must be non-negative (got {0})")]
    Pump(f64),
    #[error("xi must lie in [0, 1] (got {0})")]
    Xi(f64),
    #[error("invalid parameter document: {0}")]
    Parse(String),

    #[error("{0} undefined for dark laser (J = 0)")]
    DarkLaser(&'static str),
    #[error("singular fluctuation system at omega = {omega} (|det| = {det}); inputs are inconsistent")]
    Singular { omega: f64, det: f64 },
    #[error("quadrature did not converge: estimated relative error {achieved:.3e} > {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("frequency grid must be strictly increasing and finite")]
    Grid,

    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("simulable pumps are xi ∈ {{0, 1}} (got xi = {0})")]
    FractionalPump(f64),
    #[error("pump mode {mode} does not match xi = {xi}")]
    PumpModeMismatch { mode: &'static str, xi: f64 },
    #[error("cannot apply {event} to state (m = {m}, n2 = {n2})")]
    InapplicableEvent { event: &'static str, m: u64, n2: u64 },
    #[error("pump blocked at n2 = N")]
    PumpBlocked,
    #[error("pump reservoir saturated: {blocked} of {attempted} pump events blocked")]
    PumpSaturated { blocked: u64, attempted: u64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("Fano undefined for dark trajectory")]
    DarkTrajectory,
    #[error("empty detection stream")]
    NoDetections,
    #[error("bin width {bin_width} incompatible with duration {duration}: {reason}")]
    Binning { bin_width: f64, duration: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

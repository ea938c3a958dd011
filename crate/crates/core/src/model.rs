//! Laser parameters and the deterministic steady state.
//!
//! Time is measured in units of the inverse stimulated-emission gain, so the
//! probability per unit time of a stimulated transition from an excited atom
//! is `m + 1` when the cavity holds `m` photons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated parameter document, as read from JSON or assembled from flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    #[serde(rename = "N")]
    pub n_atoms: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "J")]
    pub pump: f64,
    pub xi: f64,
}

/// The five physical inputs of a two-level laser.
///
/// Construct through [`validate_params`] (or `TryFrom<RawParams>`); every
/// value of this type satisfies `N ≥ 1`, `alpha > 0`, `gamma ≥ 0`, `J ≥ 0`
/// and `0 ≤ xi ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct LaserParams {
    /// Number of active atoms.
    pub n_atoms: u64,
    /// Photon absorption (detection) rate per photon.
    pub alpha: f64,
    /// Spontaneous decay rate out of the lasing mode.
    pub gamma: f64,
    /// Mean pump rate.
    pub pump: f64,
    /// Pump noise scale: 1 for a Poissonian pump, 0 for a quiet pump.
    pub xi: f64,
}

impl LaserParams {
    pub fn new(n_atoms: f64, alpha: f64, gamma: f64, pump: f64, xi: f64) -> Result<Self> {
        validate_params(RawParams {
            n_atoms,
            alpha,
            gamma,
            pump,
            xi,
        })
    }

    /// Parses a JSON object with exactly the keys `N`, `alpha`, `gamma`, `J`, `xi`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawParams = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        validate_params(raw)
    }

    pub fn is_dark(&self) -> bool {
        self.pump == 0.0
    }

    pub fn with_pump(self, pump: f64) -> Result<Self> {
        validate_params(RawParams { pump, ..self.into() })
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        validate_params(RawParams { gamma, ..self.into() })
    }

    pub fn with_xi(self, xi: f64) -> Result<Self> {
        validate_params(RawParams { xi, ..self.into() })
    }
}

impl From<LaserParams> for RawParams {
    fn from(p: LaserParams) -> Self {
        RawParams {
            n_atoms: p.n_atoms as f64,
            alpha: p.alpha,
            gamma: p.gamma,
            pump: p.pump,
            xi: p.xi,
        }
    }
}

impl TryFrom<RawParams> for LaserParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        validate_params(raw)
    }
}

/// Checks every parameter invariant, reporting the first violation found.
pub fn validate_params(raw: RawParams) -> Result<LaserParams> {
    for (name, value) in [
        ("N", raw.n_atoms),
        ("alpha", raw.alpha),
        ("gamma", raw.gamma),
        ("J", raw.pump),
        ("xi", raw.xi),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFinite { name, value });
        }
    }
    if raw.n_atoms < 1.0 {
        return Err(Error::AtomCount(raw.n_atoms));
    }
    if raw.n_atoms.fract() != 0.0 || raw.n_atoms > u64::MAX as f64 {
        return Err(Error::AtomCountFractional(raw.n_atoms));
    }
    if raw.alpha <= 0.0 {
        return Err(Error::Alpha(raw.alpha));
    }
    if raw.gamma < 0.0 {
        return Err(Error::Gamma(raw.gamma));
    }
    if raw.pump < 0.0 {
        return Err(Error::Pump(raw.pump));
    }
    if !(0.0..=1.0).contains(&raw.xi) {
        return Err(Error::Xi(raw.xi));
    }
    Ok(LaserParams {
        n_atoms: raw.n_atoms as u64,
        alpha: raw.alpha,
        gamma: raw.gamma,
        pump: raw.pump,
        xi: raw.xi,
    })
}

/// Mean photon number and level populations at steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub m: f64,
    pub n2: f64,
    pub n0: f64,
    #[serde(rename = "J_hat")]
    pub j_hat: f64,
    /// `m + gamma + 1`.
    pub m_hat: f64,
}

impl SteadyState {
    /// True when more than 99% of the atoms sit in the upper level, outside
    /// the regime where the ground-state reservoir can be treated as abundant.
    pub fn is_saturated(&self, params: &LaserParams) -> bool {
        self.n2 > 0.99 * params.n_atoms as f64
    }
}

/// Steady state from the pump/loss balance.
///
/// Eliminating `n2` from `J = (m+1)n2 + gamma n2` and `alpha m = (m+1)n2`
/// leaves `m² + (gamma + 1 − Ĵ) m − Ĵ = 0`, whose non-negative root is taken
/// in a cancellation-free form.
pub fn steady_state(params: &LaserParams) -> SteadyState {
    let j_hat = params.pump / params.alpha;
    let b = params.gamma + 1.0 - j_hat;
    let disc = (b * b + 4.0 * j_hat).sqrt();
    let m = if j_hat == 0.0 {
        0.0
    } else if b < 0.0 {
        0.5 * (disc - b)
    } else {
        2.0 * j_hat / (disc + b)
    };
    let n2 = params.alpha * m / (m + 1.0);
    SteadyState {
        m,
        n2,
        n0: params.n_atoms as f64 - n2,
        j_hat,
        m_hat: m + params.gamma + 1.0,
    }
}

/// Returns `(J − R − S, Q − R)` with `R = (m+1) n2`, `S = gamma n2`, `Q = alpha m`.
pub fn balance_residuals(params: &LaserParams, ss: &SteadyState) -> (f64, f64) {
    let stimulated = (ss.m + 1.0) * ss.n2;
    let spontaneous = params.gamma * ss.n2;
    let detection = params.alpha * ss.m;
    (
        params.pump - stimulated - spontaneous,
        detection - stimulated,
    )
}

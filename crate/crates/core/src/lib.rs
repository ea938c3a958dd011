//! Photon statistics of two-level lasers.
//!
//! Two independent routes to the same quantities:
//!
//! * [`noise`]: the linearized Langevin analysis around the steady state of
//!   [`model`], giving the photocurrent spectrum `S(Ω)`, the intracavity
//!   spectrum and the Fano factor analytically;
//! * [`sim`] + [`estimate`]: exact jump-process simulation of the same laser
//!   and statistical estimators over the simulated photon number and
//!   detection stream.

pub mod error;
pub mod estimate;
pub mod model;
pub mod noise;
pub mod quad;
pub mod sim;

pub use error::{Error, Result};
pub use estimate::{estimate_fano, estimate_mean_photon, estimate_psd, EstimateWithError, PsdEstimate};
pub use model::{balance_residuals, steady_state, validate_params, LaserParams, RawParams, SteadyState};
pub use noise::{
    fano_closed_form, fano_quadrature, intracavity_psd, langevin_densities, photocurrent_psd,
    photocurrent_psd_closed_form, psd_peak, spectrum_sweep, transfer_coefficients, LangevinDensities,
    NoiseModel, PsdPeak, SpectrumKind, SpectrumSeries, Target, TransferCoeffs,
};
pub use sim::{simulate, PumpMode, SimConfig, Trajectory};

/// Formats a float with 12 significant digits for CSV output.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.11e}")
}

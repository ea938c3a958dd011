//! Linearized fluctuation analysis in the Fourier domain.
//!
//! Around the steady state every rate splits into its mean, a first-order
//! response to the population fluctuations `Δm`, `Δn2`, and a white Langevin
//! force (`j` pump, `q` detection, `r` stimulated, `s` spontaneous) whose
//! spectral density equals the mean rate. With `Δn0 = −Δn2` the rate
//! equations at angular frequency `Ω` reduce to
//!
//! ```text
//! (iΩ + α − n2) Δm − (m+1) Δn2 = r − q
//!  n2 Δm + (iΩ + m̂) Δn2        = j − r − s
//! ```
//!
//! with `m̂ = m + γ + 1`. Solving this system is the reference route to the
//! spectra; the rational closed forms are kept alongside as cross-checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{steady_state, LaserParams, SteadyState};
use crate::quad;

/// Which fluctuation the transfer coefficients map the Langevin forces onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// Detection-rate fluctuation `ΔQ = α Δm + q`.
    DeltaQ,
    /// Intracavity photon-number fluctuation.
    DeltaM,
}

/// Complex response of the target fluctuation to each unit Langevin force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCoeffs {
    pub target: Target,
    pub omega: f64,
    pub c_j: Complex64,
    pub c_q: Complex64,
    pub c_r: Complex64,
    pub c_s: Complex64,
}

impl TransferCoeffs {
    /// `Σ |c_z|² σ_z`.
    pub fn weighted_power(&self, d: &LangevinDensities) -> f64 {
        self.c_j.norm_sqr() * d.sigma_j
            + self.c_q.norm_sqr() * d.sigma_q
            + self.c_r.norm_sqr() * d.sigma_r
            + self.c_s.norm_sqr() * d.sigma_s
    }
}

/// Spectral densities of the four Langevin forces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinDensities {
    pub sigma_j: f64,
    pub sigma_q: f64,
    pub sigma_r: f64,
    pub sigma_s: f64,
}

pub fn langevin_densities(params: &LaserParams, ss: &SteadyState) -> LangevinDensities {
    LangevinDensities {
        sigma_j: params.xi * params.pump,
        sigma_q: params.alpha * ss.m,
        sigma_r: (ss.m + 1.0) * ss.n2,
        sigma_s: params.gamma * ss.n2,
    }
}

/// Solves `A x = rhs` for a 2×2 complex system by Gaussian elimination with
/// partial pivoting.
fn solve2(a: [[Complex64; 2]; 2], rhs: [Complex64; 2]) -> Option<[Complex64; 2]> {
    let (p, o) = if a[0][0].norm() >= a[1][0].norm() {
        (0, 1)
    } else {
        (1, 0)
    };
    let pivot = a[p][0];
    if pivot.norm() == 0.0 {
        return None;
    }
    let factor = a[o][0] / pivot;
    let a22 = a[o][1] - factor * a[p][1];
    let b2 = rhs[o] - factor * rhs[p];
    if a22.norm() == 0.0 || !a22.is_finite() {
        return None;
    }
    let x1 = b2 / a22;
    let x0 = (rhs[p] - a[p][1] * x1) / pivot;
    Some([x0, x1])
}

/// Transfer coefficients from the 2×2 fluctuation system at frequency `omega`.
pub fn transfer_coefficients(
    params: &LaserParams,
    ss: &SteadyState,
    omega: f64,
    target: Target,
) -> Result<TransferCoeffs> {
    let i_omega = Complex64::new(0.0, omega);
    let a = [
        [i_omega + (params.alpha - ss.n2), Complex64::from(-(ss.m + 1.0))],
        [Complex64::from(ss.n2), i_omega + ss.m_hat],
    ];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let singular = || Error::Singular {
        omega,
        det: det.norm(),
    };
    // Unit forcing vectors for j, q, r, s.
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let forcing = [[zero, one], [-one, zero], [one, -one], [zero, -one]];
    let mut dm = [zero; 4];
    for (slot, rhs) in dm.iter_mut().zip(forcing) {
        *slot = solve2(a, rhs).ok_or_else(singular)?[0];
    }
    if dm.iter().any(|c| !c.is_finite()) {
        return Err(singular());
    }
    let [c_j, c_q, c_r, c_s] = match target {
        Target::DeltaM => dm,
        Target::DeltaQ => {
            let alpha = params.alpha;
            [alpha * dm[0], one + alpha * dm[1], alpha * dm[2], alpha * dm[3]]
        }
    };
    Ok(TransferCoeffs {
        target,
        omega,
        c_j,
        c_q,
        c_r,
        c_s,
    })
}

/// Which spectral density a series tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Photocurrent,
    Intracavity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSeries {
    pub kind: SpectrumKind,
    pub points: Vec<(f64, f64)>,
}

impl SpectrumSeries {
    /// CSV with header `omega,value`, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,value\n");
        for (omega, value) in &self.points {
            out.push_str(&format!("{},{}\n", crate::fmt_sig(*omega), crate::fmt_sig(*value)));
        }
        out
    }
}

/// Location and height of the photocurrent spectrum maximum over `Ω ≥ 0`.
///
/// `omega_star` is `+∞` when the supremum is the unit shot-noise level
/// approached from below at high frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdPeak {
    pub omega_star: f64,
    pub s_max: f64,
}

/// Relaxation of the linearized system: roots of `s² + B s + C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    Overdamped { slow: f64, fast: f64 },
    Underdamped { decay: f64, frequency: f64 },
}

impl Relaxation {
    /// Smallest decay rate, the inverse of the longest correlation time.
    pub fn slowest_rate(&self) -> f64 {
        match *self {
            Relaxation::Overdamped { slow, .. } => slow,
            Relaxation::Underdamped { decay, .. } => decay,
        }
    }

    /// Largest pole magnitude.
    pub fn largest_scale(&self) -> f64 {
        match *self {
            Relaxation::Overdamped { fast, .. } => fast,
            Relaxation::Underdamped { decay, frequency } => decay.hypot(frequency),
        }
    }

    pub fn smallest_scale(&self) -> f64 {
        match *self {
            Relaxation::Overdamped { slow, .. } => slow,
            Relaxation::Underdamped { decay, frequency } => decay.hypot(frequency),
        }
    }
}

/// Coefficients of the printed rational forms, in `x = Ω²`:
/// `U = u1 x + u0`, `V = v1 x + v0`, `D = x² + d1 x + d0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalCoeffs {
    pub u1: f64,
    pub u0: f64,
    pub v1: f64,
    pub v0: f64,
    pub d1: f64,
    pub d0: f64,
}

impl RationalCoeffs {
    pub fn denominator(&self, omega: f64) -> f64 {
        let x = omega * omega;
        x * x + self.d1 * x + self.d0
    }
}

/// Analytic noise engine for one parameter set with `J > 0`.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    params: LaserParams,
    ss: SteadyState,
    densities: LangevinDensities,
}

/// Relative tolerance requested from the Fano quadrature.
pub const FANO_QUAD_TOL: f64 = 1e-10;

impl NoiseModel {
    pub fn new(params: LaserParams) -> Result<Self> {
        if params.is_dark() {
            return Err(Error::DarkLaser("spectrum"));
        }
        let ss = steady_state(&params);
        Ok(Self {
            params,
            ss,
            densities: langevin_densities(&params, &ss),
        })
    }

    pub fn params(&self) -> &LaserParams {
        &self.params
    }

    pub fn steady_state(&self) -> &SteadyState {
        &self.ss
    }

    pub fn densities(&self) -> &LangevinDensities {
        &self.densities
    }

    pub fn coefficients(&self, omega: f64, target: Target) -> Result<TransferCoeffs> {
        transfer_coefficients(&self.params, &self.ss, omega, target)
    }

    /// Normalized photocurrent spectral density from the linear system.
    pub fn photocurrent_psd(&self, omega: f64) -> Result<f64> {
        let c = self.coefficients(omega, Target::DeltaQ)?;
        Ok(c.weighted_power(&self.densities) / (self.params.alpha * self.ss.m))
    }

    /// Intracavity photon-number spectral density from the linear system.
    pub fn intracavity_psd(&self, omega: f64) -> Result<f64> {
        let c = self.coefficients(omega, Target::DeltaM)?;
        Ok(c.weighted_power(&self.densities) / self.ss.m)
    }

    pub fn rational_coeffs(&self) -> RationalCoeffs {
        let LaserParams {
            alpha, gamma, pump, xi, ..
        } = self.params;
        let SteadyState { m, n2, m_hat, .. } = self.ss;
        let pump_term = pump * (m + 1.0).powi(2) * xi;
        let relax = gamma * n2 - alpha * m_hat;
        RationalCoeffs {
            u1: n2 * (3.0 * m + 1.0) - alpha * m,
            u0: n2 * (3.0 * m + 1.0) * gamma * m_hat - alpha * m * m_hat * m_hat + pump_term,
            v1: n2 * (m + 1.0) + alpha * m,
            v0: n2 * (m + 1.0) * gamma * m_hat + alpha * m * m_hat * m_hat + pump_term,
            d1: (m_hat + alpha - n2).powi(2) + 2.0 * relax,
            d0: relax * relax,
        }
    }

    /// `1 + (α/m) U(Ω)/D(Ω)`.
    pub fn photocurrent_psd_closed_form(&self, omega: f64) -> f64 {
        let c = self.rational_coeffs();
        let x = omega * omega;
        1.0 + self.params.alpha / self.ss.m * (c.u1 * x + c.u0) / c.denominator(omega)
    }

    /// `V(Ω) / (m D(Ω))`.
    pub fn intracavity_psd_closed_form(&self, omega: f64) -> f64 {
        let c = self.rational_coeffs();
        (c.v1 * omega * omega + c.v0) / (self.ss.m * c.denominator(omega))
    }

    pub fn relaxation(&self) -> Relaxation {
        let b = self.params.alpha - self.ss.n2 + self.ss.m_hat;
        let c = self.params.alpha * self.ss.m_hat - self.params.gamma * self.ss.n2;
        let disc = b * b - 4.0 * c;
        if disc >= 0.0 {
            let root = disc.sqrt();
            let fast = 0.5 * (b + root);
            Relaxation::Overdamped {
                slow: c / fast,
                fast,
            }
        } else {
            Relaxation::Underdamped {
                decay: 0.5 * b,
                frequency: 0.5 * (-disc).sqrt(),
            }
        }
    }

    /// Fano factor by integrating the intracavity spectrum over all
    /// frequencies.
    ///
    /// The integrand is even, so `[0, Ω_cut]` is integrated adaptively and
    /// doubled; beyond `Ω_cut = 10³ · max(α, m̂, |p|, |q|)` the two leading
    /// terms of the `Ω⁻²` expansion are added analytically.
    pub fn fano_quadrature(&self) -> Result<f64> {
        self.fano_quadrature_with_tol(FANO_QUAD_TOL)
    }

    pub fn fano_quadrature_with_tol(&self, rel_tol: f64) -> Result<f64> {
        let relax = self.relaxation();
        let cutoff = 1e3
            * self
                .params
                .alpha
                .max(self.ss.m_hat)
                .max(relax.largest_scale());
        let mut breaks = vec![0.0];
        let mut knot = 1e-2 * relax.smallest_scale().min(self.params.alpha);
        while knot < cutoff {
            breaks.push(knot);
            knot *= 10.0;
        }
        breaks.push(cutoff);

        let integrand = |omega: f64| self.intracavity_psd(omega).unwrap_or(f64::NAN);
        let body = quad::integrate(integrand, &breaks, rel_tol, 20_000)?;
        let c = self.rational_coeffs();
        let m = self.ss.m;
        let tail = c.v1 / (m * cutoff) + (c.v0 - c.v1 * c.d1) / (3.0 * m * cutoff.powi(3));
        let fano = (body.value + tail) / std::f64::consts::PI;
        if !fano.is_finite() {
            return Err(Error::Quadrature {
                achieved: f64::NAN,
                requested: rel_tol,
            });
        }
        Ok(fano)
    }

    /// Fano factor from the residue integral of `V/(m D)`.
    ///
    /// Writing `D = (Ω² + p²)(Ω² + q²)`, only the symmetric combinations
    /// `pq = √d0` and `p + q = √(d1 + 2√d0)` enter, so the result stays in
    /// real arithmetic for both overdamped and underdamped relaxation.
    pub fn fano_closed_form(&self) -> f64 {
        let c = self.rational_coeffs();
        let pq = c.d0.sqrt();
        let p_plus_q = (c.d1 + 2.0 * pq).sqrt();
        (c.v1 / (2.0 * p_plus_q) + c.v0 / (2.0 * pq * p_plus_q)) / self.ss.m
    }

    /// Maximum of the photocurrent spectrum over `Ω ≥ 0`.
    ///
    /// `S − 1` is `(u1 x + u0)/(x² + d1 x + d0)` up to a positive factor, so
    /// its stationary points in `x = Ω²` solve `u1 x² + 2 u0 x − (u1 d0 − u0 d1) = 0`.
    /// Candidates are those roots, `Ω = 0`, and the high-frequency limit.
    /// Falls back to a golden-section search if the coefficients are not
    /// usable.
    pub fn psd_peak(&self) -> Result<PsdPeak> {
        let c = self.rational_coeffs();
        let coeffs = [c.u1, c.u0, c.d1, c.d0];
        let roots = if coeffs.iter().all(|v| v.is_finite()) {
            stationary_points(c.u1, c.u0, c.d1, c.d0)
        } else {
            None
        };
        let Some(roots) = roots else {
            return self.psd_peak_golden();
        };

        let mut candidates = vec![PsdPeak {
            omega_star: 0.0,
            s_max: self.photocurrent_psd(0.0)?,
        }];
        for x in roots {
            let omega = x.sqrt();
            candidates.push(PsdPeak {
                omega_star: omega,
                s_max: self.photocurrent_psd(omega)?,
            });
        }
        candidates.push(PsdPeak {
            omega_star: f64::INFINITY,
            s_max: 1.0,
        });
        Ok(select_peak(&candidates))
    }

    /// Golden-section maximization of `S` on a logarithmic frequency axis,
    /// seeded by a coarse scan.
    pub fn psd_peak_golden(&self) -> Result<PsdPeak> {
        let relax = self.relaxation();
        let lo = (1e-4 * relax.smallest_scale().min(self.params.alpha)).ln();
        let hi = (1e4 * relax.largest_scale().max(self.params.alpha)).ln();
        let s = |log_omega: f64| self.photocurrent_psd(log_omega.exp());
        let n = 400;
        let step = (hi - lo) / n as f64;
        let mut best = (lo, s(lo)?);
        for k in 1..=n {
            let u = lo + step * k as f64;
            let v = s(u)?;
            if v > best.1 {
                best = (u, v);
            }
        }
        let (mut a, mut b) = (best.0 - step, best.0 + step);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let (mut f1, mut f2) = (s(x1)?, s(x2)?);
        for _ in 0..200 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = s(x2)?;
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = s(x1)?;
            }
            if b - a < 1e-12 {
                break;
            }
        }
        let interior = PsdPeak {
            omega_star: (0.5 * (a + b)).exp(),
            s_max: f1.max(f2),
        };
        let candidates = [
            PsdPeak {
                omega_star: 0.0,
                s_max: self.photocurrent_psd(0.0)?,
            },
            interior,
            PsdPeak {
                omega_star: f64::INFINITY,
                s_max: 1.0,
            },
        ];
        Ok(select_peak(&candidates))
    }

    /// Tabulates the chosen spectrum over a strictly increasing grid.
    pub fn spectrum_sweep(&self, grid: &[f64], kind: SpectrumKind) -> Result<SpectrumSeries> {
        if grid.iter().any(|w| !w.is_finite() || *w < 0.0) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid);
        }
        let points = grid
            .iter()
            .map(|&omega| {
                let value = match kind {
                    SpectrumKind::Photocurrent => self.photocurrent_psd(omega)?,
                    SpectrumKind::Intracavity => self.intracavity_psd(omega)?,
                };
                Ok((omega, value))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectrumSeries { kind, points })
    }
}

/// Positive roots of `u1 x² + 2 u0 x − (u1 d0 − u0 d1) = 0`.
fn stationary_points(u1: f64, u0: f64, d1: f64, d0: f64) -> Option<Vec<f64>> {
    let c = -(u1 * d0 - u0 * d1);
    let mut roots = Vec::new();
    if u1 == 0.0 {
        if u0 != 0.0 {
            roots.push(-c / (2.0 * u0));
        }
    } else {
        let disc = u0 * u0 - u1 * c;
        if disc >= 0.0 {
            let q = -(u0 + u0.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(q / u1);
                roots.push(c / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    if roots.iter().any(|r| !r.is_finite()) {
        return None;
    }
    Some(roots.into_iter().filter(|&x| x > 0.0).collect())
}

const FLAT_SPECTRUM_TOL: f64 = 1e-12;

fn select_peak(candidates: &[PsdPeak]) -> PsdPeak {
    let max = candidates
        .iter()
        .copied()
        .max_by(|a, b| a.s_max.total_cmp(&b.s_max))
        .expect("candidates");
    let min = candidates
        .iter()
        .map(|c| c.s_max)
        .fold(f64::INFINITY, f64::min);
    if max.s_max - min < FLAT_SPECTRUM_TOL {
        PsdPeak {
            omega_star: 0.0,
            s_max: max.s_max,
        }
    } else {
        max
    }
}

pub fn photocurrent_psd(params: &LaserParams, omega: f64) -> Result<f64> {
    NoiseModel::new(*params)?.photocurrent_psd(omega)
}

pub fn photocurrent_psd_closed_form(params: &LaserParams, omega: f64) -> Result<f64> {
    Ok(NoiseModel::new(*params)?.photocurrent_psd_closed_form(omega))
}

pub fn intracavity_psd(params: &LaserParams, omega: f64) -> Result<f64> {
    if params.is_dark() {
        return Err(Error::DarkLaser("intracavity spectrum"));
    }
    NoiseModel::new(*params)?.intracavity_psd(omega)
}

pub fn fano_quadrature(params: &LaserParams) -> Result<f64> {
    if params.is_dark() {
        return Err(Error::DarkLaser("Fano factor"));
    }
    NoiseModel::new(*params)?.fano_quadrature()
}

pub fn fano_closed_form(params: &LaserParams) -> Result<f64> {
    if params.is_dark() {
        return Err(Error::DarkLaser("Fano factor"));
    }
    Ok(NoiseModel::new(*params)?.fano_closed_form())
}

pub fn psd_peak(params: &LaserParams) -> Result<PsdPeak> {
    NoiseModel::new(*params)?.psd_peak()
}

pub fn spectrum_sweep(params: &LaserParams, grid: &[f64], kind: SpectrumKind) -> Result<SpectrumSeries> {
    NoiseModel::new(*params)?.spectrum_sweep(grid, kind)
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

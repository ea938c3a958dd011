use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use twolevel_core::sim::{PumpMode, SimConfig};
use twolevel_core::{validate_params, LaserParams, RawParams};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "twolevel", version, about = "Photon statistics of two-level lasers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state photon number and populations.
    Steady(SteadyArgs),
    /// Photocurrent (or intracavity) spectral density over a frequency grid.
    Spectrum(SpectrumArgs),
    /// Fano factor by closed form and by quadrature.
    Fano(SteadyArgs),
    /// Jump-process simulation with trajectory export.
    Simulate(SimulateArgs),
    /// Simulation estimates against the analytic engine.
    Compare(CompareArgs),
    /// Pump (and spontaneous-decay) sweeps of m, F and the spectral peak.
    Sweep(SweepArgs),
}

/// Laser parameters. Flags override values read from `--config`.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// JSON file with any of N, alpha, gamma, J, xi and the simulation keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of active atoms [default: 1e5].
    #[arg(long = "N", allow_hyphen_values = true)]
    pub n_atoms: Option<f64>,
    /// Detection rate per photon [default: 6.32].
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Spontaneous decay rate [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Mean pump rate (required).
    #[arg(long = "J", allow_hyphen_values = true)]
    pub pump: Option<f64>,
    /// Pump noise: 1 Poissonian, 0 quiet [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Write result files and a run manifest into this directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutArgs,
    #[arg(long, default_value_t = 1e-2)]
    pub omega_min: f64,
    #[arg(long, default_value_t = 1e4)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Linear instead of logarithmic spacing.
    #[arg(long)]
    pub linear: bool,
    /// Tabulate the intracavity photon-number spectrum instead.
    #[arg(long)]
    pub intracavity: bool,
    /// Also report the frequency and height of the photocurrent maximum.
    #[arg(long)]
    pub peak: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Simulated time in units of the inverse gain [default: 1e4].
    #[arg(long)]
    pub duration: Option<f64>,
    /// Discarded initial interval [default: 10].
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Spacing of state samples [default: 0.5].
    #[arg(long)]
    pub sample_interval: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// RNG stream index under the seed.
    #[arg(long)]
    pub stream: Option<u64>,
    /// Do not record detection timestamps.
    #[arg(long)]
    pub no_detections: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PsdArgs {
    /// Counting bin width [default: min(0.1/alpha, 0.1/m̂)].
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Number of periodogram segments.
    #[arg(long, default_value_t = 100)]
    pub segments: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub psd: PsdArgs,
    /// Output directory (required).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Run the estimators and store their results.
    #[arg(long)]
    pub estimate: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub psd: PsdArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutArgs,
    #[arg(long, default_value_t = 1e-1)]
    pub j_min: f64,
    #[arg(long, default_value_t = 1e6)]
    pub j_max: f64,
    #[arg(long, default_value_t = 141)]
    pub j_points: usize,
    /// `standard` selects gamma ∈ {0, 6.32, 63.2, 632, 6325}.
    #[arg(long, conflicts_with = "gamma_list")]
    pub gamma_set: Option<GammaSet>,
    /// Comma-separated gamma values.
    #[arg(long, value_delimiter = ',')]
    pub gamma_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum GammaSet {
    Standard,
}

pub const STANDARD_GAMMAS: [f64; 5] = [0.0, 6.32, 63.2, 632.0, 6325.0];

/// Union of the parameter and simulation keys accepted in `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "N")]
    pub n_atoms: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(rename = "J")]
    pub pump: Option<f64>,
    pub xi: Option<f64>,
    pub duration: Option<f64>,
    pub burn_in: Option<f64>,
    pub sample_interval: Option<f64>,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub pump_mode: Option<PumpMode>,
    pub record_detections: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<(LaserParams, ConfigFile), CliError> {
        let file = ConfigFile::load(self.config.as_deref())?;
        let pump = self
            .pump
            .or(file.pump)
            .ok_or_else(|| CliError::Validation("J is required (--J or config)".into()))?;
        let raw = RawParams {
            n_atoms: self.n_atoms.or(file.n_atoms).unwrap_or(1e5),
            alpha: self.alpha.or(file.alpha).unwrap_or(6.32),
            gamma: self.gamma.or(file.gamma).unwrap_or(0.0),
            pump,
            xi: self.xi.or(file.xi).unwrap_or(1.0),
        };
        Ok((validate_params(raw)?, file))
    }
}

impl SimArgs {
    pub fn resolve(&self, params: &LaserParams, file: &ConfigFile) -> Result<SimConfig, CliError> {
        let pump_mode = PumpMode::for_xi(params.xi)?;
        if let Some(mode) = file.pump_mode {
            if mode != pump_mode {
                return Err(twolevel_core::Error::PumpModeMismatch {
                    mode: mode.name(),
                    xi: params.xi,
                }
                .into());
            }
        }
        let config = SimConfig {
            duration: self.duration.or(file.duration).unwrap_or(1e4),
            burn_in: self.burn_in.or(file.burn_in).unwrap_or(10.0),
            sample_interval: self.sample_interval.or(file.sample_interval).unwrap_or(0.5),
            seed: self.seed.or(file.seed).unwrap_or(0),
            stream: self.stream.or(file.stream).unwrap_or(0),
            pump_mode,
            record_detections: !self.no_detections && file.record_detections.unwrap_or(true),
        };
        config.validate()?;
        Ok(config)
    }
}

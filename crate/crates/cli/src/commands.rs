use rayon::prelude::*;
use serde::Serialize;
use twolevel_core::estimate::{default_bin_width, estimate_trajectory_psd, PsdEstimate};
use twolevel_core::noise::{linear_grid, log_grid, NoiseModel};
use twolevel_core::sim::{simulate, SimConfig, Trajectory, TrajectoryMetadata};
use twolevel_core::{
    balance_residuals, estimate_fano, estimate_mean_photon, fmt_sig, steady_state, EstimateWithError,
    LaserParams, PsdPeak, SpectrumKind, SteadyState,
};

use crate::args::{
    Cli, Command, CompareArgs, GammaSet, OutArgs, PsdArgs, SimulateArgs, SpectrumArgs, SteadyArgs,
    SweepArgs, STANDARD_GAMMAS,
};
use crate::error::CliError;
use crate::output::{to_json, OutputDir, RunManifest};

/// What a command prints, plus a failed statistical gate if any.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub gate_failure: Option<String>,
}

impl Outcome {
    fn text(stdout: String) -> Self {
        Outcome {
            stdout,
            ..Default::default()
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Steady(args) => cmd_steady(&args),
        Command::Spectrum(args) => cmd_spectrum(&args),
        Command::Fano(args) => cmd_fano(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

#[derive(Debug, Serialize)]
pub struct Residuals {
    pub pump_balance: f64,
    pub photon_balance: f64,
}

#[derive(Debug, Serialize)]
pub struct SteadyReport {
    pub params: LaserParams,
    #[serde(flatten)]
    pub steady_state: SteadyState,
    pub residuals: Residuals,
    pub saturated: bool,
}

pub fn steady_report(params: &LaserParams) -> SteadyReport {
    let ss = steady_state(params);
    let (pump_balance, photon_balance) = balance_residuals(params, &ss);
    SteadyReport {
        params: *params,
        steady_state: ss,
        residuals: Residuals {
            pump_balance,
            photon_balance,
        },
        saturated: ss.is_saturated(params),
    }
}

fn saturation_warning(params: &LaserParams) -> Vec<String> {
    let ss = steady_state(params);
    if ss.is_saturated(params) {
        vec![format!(
            "n2 = {} exceeds 99% of N = {}; the ground-state reservoir is depleted",
            ss.n2, params.n_atoms
        )]
    } else {
        Vec::new()
    }
}

fn emit_report<T: Serialize>(
    out: &OutArgs,
    name: &str,
    report: &T,
    manifest: RunManifest,
) -> Result<String, CliError> {
    let text = to_json(report);
    if let Some(dir) = &out.out_dir {
        let mut dir = OutputDir::create(dir)?;
        dir.write(name, &text)?;
        dir.finish(manifest)?;
    }
    Ok(text)
}

fn cmd_steady(args: &SteadyArgs) -> Result<Outcome, CliError> {
    let (params, _) = args.params.resolve()?;
    let report = steady_report(&params);
    let stdout = emit_report(&args.out, "steady.json", &report, RunManifest::new("steady", params))?;
    Ok(Outcome {
        stdout,
        warnings: saturation_warning(&params),
        gate_failure: None,
    })
}

#[derive(Debug, Serialize)]
pub struct FanoReport {
    pub params: LaserParams,
    pub m: f64,
    pub fano_closed_form: f64,
    pub fano_quadrature: f64,
    pub relative_difference: f64,
}

pub fn fano_report(params: &LaserParams) -> Result<FanoReport, CliError> {
    let model = NoiseModel::new(*params)?;
    let closed = model.fano_closed_form();
    let quad = model.fano_quadrature()?;
    Ok(FanoReport {
        params: *params,
        m: model.steady_state().m,
        fano_closed_form: closed,
        fano_quadrature: quad,
        relative_difference: (closed - quad).abs() / closed.abs().max(quad.abs()),
    })
}

fn cmd_fano(args: &SteadyArgs) -> Result<Outcome, CliError> {
    let (params, _) = args.params.resolve()?;
    let report = fano_report(&params)?;
    let stdout = emit_report(&args.out, "fano.json", &report, RunManifest::new("fano", params))?;
    Ok(Outcome {
        stdout,
        warnings: saturation_warning(&params),
        gate_failure: None,
    })
}

fn cmd_spectrum(args: &SpectrumArgs) -> Result<Outcome, CliError> {
    let (params, _) = args.params.resolve()?;
    let model = NoiseModel::new(params)?;
    if args.points == 0 {
        return Err(CliError::Validation("--points must be positive".into()));
    }
    if !(args.omega_max > args.omega_min && args.omega_min >= 0.0) {
        return Err(CliError::Validation("need 0 ≤ omega-min < omega-max".into()));
    }
    if !args.linear && args.omega_min == 0.0 {
        return Err(CliError::Validation("log grid needs omega-min > 0".into()));
    }
    let grid = if args.linear {
        linear_grid(args.omega_min, args.omega_max, args.points)
    } else {
        log_grid(args.omega_min, args.omega_max, args.points)
    };
    let kind = if args.intracavity {
        SpectrumKind::Intracavity
    } else {
        SpectrumKind::Photocurrent
    };
    let series = model.spectrum_sweep(&grid, kind)?;
    let peak = if args.peak { Some(model.psd_peak()?) } else { None };
    let csv = series.to_csv();

    let stdout = match &args.out.out_dir {
        Some(dir) => {
            let mut dir = OutputDir::create(dir)?;
            dir.write("spectrum.csv", &csv)?;
            if let Some(peak) = &peak {
                dir.write_json("peak.json", peak)?;
            }
            let mut manifest = RunManifest::new("spectrum", params);
            manifest.grid = Some(serde_json::json!({
                "omega_min": args.omega_min,
                "omega_max": args.omega_max,
                "points": args.points,
                "spacing": if args.linear { "linear" } else { "log" },
                "kind": kind,
            }));
            dir.finish(manifest)?;
            peak.map(|p| to_json(&p)).unwrap_or_default()
        }
        None => match peak {
            Some(p) => format!("{csv}# peak omega_star={} s_max={}\n", fmt_sig(p.omega_star), fmt_sig(p.s_max)),
            None => csv,
        },
    };
    Ok(Outcome::text(stdout))
}

#[derive(Debug, Serialize)]
pub struct PsdSummary {
    pub bin_width: f64,
    pub n_segments: usize,
    pub n_points: usize,
    /// Mean of the three lowest reported frequencies.
    pub low_frequency: EstimateWithError,
}

#[derive(Debug, Serialize)]
pub struct Estimates {
    pub mean_photon: EstimateWithError,
    pub fano: Option<EstimateWithError>,
    pub psd: Option<PsdSummary>,
}

fn run_estimators(traj: &Trajectory, psd_args: &PsdArgs) -> Result<(Estimates, Option<PsdEstimate>), CliError> {
    let mean_photon = estimate_mean_photon(traj)?;
    let fano = estimate_fano(traj).ok();
    let psd = if traj.config.record_detections && !traj.detections.is_empty() {
        let bin_width = psd_args.bin_width.unwrap_or_else(|| default_bin_width(&traj.params));
        Some(estimate_trajectory_psd(traj, bin_width, psd_args.segments)?)
    } else {
        None
    };
    let summary = psd.as_ref().map(|p| PsdSummary {
        bin_width: p.bin_width,
        n_segments: p.n_segments,
        n_points: p.points.len(),
        low_frequency: p.low_frequency_mean(3),
    });
    Ok((
        Estimates {
            mean_photon,
            fano,
            psd: summary,
        },
        psd,
    ))
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    #[serde(flatten)]
    pub metadata: TrajectoryMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Estimates>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome, CliError> {
    let (params, file) = args.params.resolve()?;
    let config = args.sim.resolve(&params, &file)?;
    let traj = simulate(&params, &config)?;

    let mut dir = OutputDir::create(&args.out_dir)?;
    dir.write("samples.csv", &traj.samples_csv())?;
    if config.record_detections {
        dir.write("detections.csv", &traj.detections_csv())?;
    }
    let estimates = if args.estimate {
        let (estimates, psd) = run_estimators(&traj, &args.psd)?;
        if let Some(psd) = psd {
            dir.write("psd.csv", &psd.to_csv())?;
        }
        Some(estimates)
    } else {
        None
    };
    let report = SimulationReport {
        metadata: traj.metadata(),
        estimates,
    };
    let text = to_json(&report);
    dir.write("metadata.json", &text)?;
    let mut manifest = RunManifest::new("simulate", params);
    manifest.config = Some(config);
    dir.finish(manifest)?;

    let mut warnings = config.warnings();
    warnings.extend(saturation_warning(&params));
    Ok(Outcome {
        stdout: text,
        warnings,
        gate_failure: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub quantity: &'static str,
    pub omega: Option<f64>,
    pub analytic: f64,
    pub estimated: f64,
    pub std_error: f64,
    pub z_score: f64,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub params: LaserParams,
    pub config: SimConfig,
    pub rows: Vec<CompareRow>,
    pub max_abs_z: f64,
    pub gate: f64,
    pub passed: bool,
}

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,omega,analytic,estimated,std_error,z_score\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.quantity,
                r.omega.map(fmt_sig).unwrap_or_default(),
                fmt_sig(r.analytic),
                fmt_sig(r.estimated),
                fmt_sig(r.std_error),
                fmt_sig(r.z_score)
            ));
        }
        out
    }
}

/// Largest |z| tolerated by `compare` before it exits with status 3.
pub const COMPARE_GATE: f64 = 5.0;

pub fn compare_report(params: &LaserParams, config: &SimConfig, psd_args: &PsdArgs) -> Result<CompareReport, CliError> {
    let model = NoiseModel::new(*params)?;
    let traj = simulate(params, config)?;
    let (estimates, psd) = run_estimators(&traj, psd_args)?;

    let row = |quantity, omega, analytic: f64, est: &EstimateWithError| CompareRow {
        quantity,
        omega,
        analytic,
        estimated: est.value,
        std_error: est.std_error,
        z_score: est.z_score(analytic),
    };
    let mut rows = vec![row("mean_photon", None, model.steady_state().m, &estimates.mean_photon)];
    if let Some(fano) = &estimates.fano {
        rows.push(row("fano", None, model.fano_closed_form(), fano));
    }
    if let Some(psd) = &psd {
        for p in &psd.points {
            let est = EstimateWithError {
                value: p.value,
                std_error: p.std_error,
                n_effective: psd.n_segments as f64,
            };
            rows.push(row("psd", Some(p.omega), model.photocurrent_psd(p.omega)?, &est));
        }
    }
    let max_abs_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    Ok(CompareReport {
        params: *params,
        config: *config,
        rows,
        max_abs_z,
        gate: COMPARE_GATE,
        passed: max_abs_z <= COMPARE_GATE,
    })
}

fn cmd_compare(args: &CompareArgs) -> Result<Outcome, CliError> {
    let (params, file) = args.params.resolve()?;
    if params.is_dark() {
        return Err(twolevel_core::Error::DarkLaser("comparison").into());
    }
    let config = args.sim.resolve(&params, &file)?;
    let report = compare_report(&params, &config, &args.psd)?;
    let text = to_json(&report);
    if let Some(dir) = &args.out.out_dir {
        let mut dir = OutputDir::create(dir)?;
        dir.write("compare.json", &text)?;
        dir.write("compare.csv", &report.to_csv())?;
        let mut manifest = RunManifest::new("compare", params);
        manifest.config = Some(config);
        dir.finish(manifest)?;
    }
    let gate_failure = (!report.passed).then(|| {
        let worst = report
            .rows
            .iter()
            .max_by(|a, b| a.z_score.abs().total_cmp(&b.z_score.abs()))
            .expect("rows");
        format!(
            "|z| = {:.2} > {} for {}{}",
            worst.z_score.abs(),
            COMPARE_GATE,
            worst.quantity,
            worst.omega.map(|w| format!(" at omega = {w}")).unwrap_or_default()
        )
    });
    Ok(Outcome {
        stdout: text,
        warnings: config.warnings(),
        gate_failure,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub pump: f64,
    pub gamma: f64,
    pub m: f64,
    pub fano: f64,
    pub peak: PsdPeak,
}

pub fn sweep_rows(template: &LaserParams, pumps: &[f64], gammas: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    let cells: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| pumps.iter().map(move |&j| (g, j)))
        .collect();
    cells
        .par_iter()
        .map(|&(gamma, pump)| {
            let params = template.with_gamma(gamma)?.with_pump(pump)?;
            let model = NoiseModel::new(params)?;
            Ok(SweepRow {
                pump,
                gamma,
                m: model.steady_state().m,
                fano: model.fano_closed_form(),
                peak: model.psd_peak()?,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("J,gamma,m,F,S_max,omega_star\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_sig(r.pump),
            fmt_sig(r.gamma),
            fmt_sig(r.m),
            fmt_sig(r.fano),
            fmt_sig(r.peak.s_max),
            fmt_sig(r.peak.omega_star)
        ));
    }
    out
}

fn cmd_sweep(args: &SweepArgs) -> Result<Outcome, CliError> {
    let (params, _) = args.params.resolve()?;
    if args.j_points == 0 {
        return Err(CliError::Validation("empty sweep: --j-points must be positive".into()));
    }
    if !(args.j_min > 0.0 && args.j_max >= args.j_min) {
        return Err(CliError::Validation("need 0 < j-min ≤ j-max".into()));
    }
    let gammas: Vec<f64> = match (&args.gamma_set, &args.gamma_list) {
        (Some(GammaSet::Standard), _) => STANDARD_GAMMAS.to_vec(),
        (None, Some(list)) => list.clone(),
        (None, None) => vec![params.gamma],
    };
    if gammas.is_empty() {
        return Err(CliError::Validation("empty sweep: no gamma values".into()));
    }
    let pumps = log_grid(args.j_min, args.j_max, args.j_points);
    let rows = sweep_rows(&params, &pumps, &gammas)?;
    let csv = sweep_csv(&rows);
    let stdout = match &args.out.out_dir {
        Some(dir) => {
            let mut dir = OutputDir::create(dir)?;
            dir.write("sweep.csv", &csv)?;
            let mut manifest = RunManifest::new("sweep", params);
            manifest.grid = Some(serde_json::json!({
                "j_min": args.j_min,
                "j_max": args.j_max,
                "j_points": args.j_points,
                "gammas": gammas,
            }));
            dir.finish(manifest)?;
            String::new()
        }
        None => csv,
    };
    Ok(Outcome::text(stdout))
}

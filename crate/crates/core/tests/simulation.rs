use twolevel_core::estimate::{estimate_trajectory_psd, poisson_stream};
use twolevel_core::noise::NoiseModel;
use twolevel_core::sim::{simulate, PumpMode, SimConfig};
use twolevel_core::{estimate_fano, estimate_mean_photon, estimate_psd, LaserParams};

fn config(duration: f64, mode: PumpMode, seed: u64, dt: f64) -> SimConfig {
    SimConfig {
        burn_in: 20.0,
        sample_interval: dt,
        ..SimConfig::new(duration, mode, seed)
    }
}

#[test]
fn mean_photon_number_matches_steady_state() {
    let p = LaserParams::new(1e5, 6.32, 0.0, 63.2, 1.0).unwrap();
    let tr = simulate(&p, &config(5000.0, PumpMode::Poissonian, 3, 0.5)).unwrap();
    let m = estimate_mean_photon(&tr).unwrap();
    println!("<m> = {} ± {}", m.value, m.std_error);
    assert!(m.z_score(10.0).abs() <= 3.0);
}

#[test]
fn regular_pump_counts_are_sub_poissonian() {
    let p = LaserParams::new(1e5, 6.32, 0.0, 632.0, 0.0).unwrap();
    let tr = simulate(&p, &config(2000.0, PumpMode::Regular, 4, 1.0)).unwrap();
    let window = 10.0;
    let start = tr.config.burn_in;
    let n = ((tr.config.duration - start) / window) as usize;
    let mut counts = vec![0.0f64; n];
    for &t in &tr.detections {
        let k = ((t - start) / window) as usize;
        if k < n {
            counts[k] += 1.0;
        }
    }
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    println!("counts: mean {mean}, var {var}");
    assert!(var < 0.1 * mean);
}

#[test]
fn calibration_stream_is_flat() {
    let stream = poisson_stream(100.0, 0.0, 4000.0, 12);
    let psd = estimate_psd(&stream, 0.0, 4000.0, 0.01, 200).unwrap();
    let outliers = psd.points.iter().filter(|p| (p.value - 1.0).abs() > 3.0 * p.std_error).count();
    assert!(outliers <= 2, "{outliers} of {}", psd.points.len());
}

#[test]
fn quiet_pump_high_power_spectrum_follows_lorentzian_dip() {
    let alpha = 6.32;
    let p = LaserParams::new(1e5, alpha, 0.0, 1e4 * alpha, 0.0).unwrap();
    let cfg = SimConfig {
        record_detections: true,
        ..config(420.0, PumpMode::Regular, 5, 0.5)
    };
    let tr = simulate(&p, &cfg).unwrap();
    let psd = estimate_trajectory_psd(&tr, 0.01, 100).unwrap();
    let mut worst: f64 = 0.0;
    let mut outliers = 0;
    for pt in &psd.points {
        let w = pt.omega;
        let limit = w * w / (alpha * alpha + w * w);
        let z = (pt.value - limit) / pt.std_error;
        worst = worst.max(z.abs());
        if z.abs() > 3.0 {
            outliers += 1;
        }
    }
    println!("{} bins, worst |z| {worst:.2}, {outliers} beyond 3σ", psd.points.len());
    assert!(outliers as f64 <= 0.02 * psd.points.len() as f64 + 1.0);
    let lowest = psd.points[0];
    assert!(lowest.value + 3.0 * lowest.std_error < 0.5, "{lowest:?}");
}

#[test]
fn moderate_pump_spectrum_against_linear_theory() {
    let p = LaserParams::new(1e5, 6.32, 0.0, 63.2, 1.0).unwrap();
    let tr = simulate(&p, &config(20000.0, PumpMode::Poissonian, 6, 0.5)).unwrap();
    let model = NoiseModel::new(p).unwrap();
    let psd = estimate_trajectory_psd(&tr, 0.1 / 11.0, 200).unwrap();
    let zs: Vec<f64> = psd
        .points
        .iter()
        .map(|pt| (pt.value - model.photocurrent_psd(pt.omega).unwrap()) / pt.std_error)
        .collect();
    let outliers = zs.iter().filter(|z| z.abs() > 3.0).count();
    let worst = zs.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    println!("{} bins, worst |z| {worst:.2}, {outliers} beyond 3σ", zs.len());
    assert!(outliers as f64 <= 0.02 * zs.len() as f64);
    assert!(worst < 6.0);
}

/// The linearized Fano factor becomes exact as the photon number grows: at
/// m = 1000 simulation and theory agree, while at m = 10 the jump process
/// sits measurably above the linear prediction.
#[test]
fn linearization_gap_closes_at_large_photon_number() {
    let gap = |pump: f64, duration: f64, seed: u64| {
        let p = LaserParams::new(1e5, 6.32, 0.0, pump, 1.0).unwrap();
        let tr = simulate(&p, &config(duration, PumpMode::Poissonian, seed, 0.2)).unwrap();
        let f = estimate_fano(&tr).unwrap();
        let linear = NoiseModel::new(p).unwrap().fano_closed_form();
        println!("J {pump}: F sim {} ± {}, linear {linear}", f.value, f.std_error);
        f.z_score(linear)
    };
    assert!(gap(6320.0, 2000.0, 7).abs() <= 3.0);
    assert!(gap(63.2, 10000.0, 8) > 5.0);
}

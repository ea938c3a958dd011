//! Statistical estimators over simulated trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{steady_state, LaserParams};
use crate::noise::NoiseModel;
use crate::sim::Trajectory;

/// Minimum number of state samples an estimate needs.
pub const MIN_SAMPLES: usize = 100;
/// Minimum number of batches in batch-means error bars.
pub const MIN_BATCHES: usize = 20;
/// Minimum number of bins per segment in the spectral estimator.
pub const MIN_SEGMENT_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    /// Equivalent number of independent samples.
    pub n_effective: f64,
}

impl EstimateWithError {
    /// `(value − reference) / std_error`; infinite when a zero-error
    /// estimate misses the reference.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.value - reference;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

/// Number of batches for batch means: each batch should span about fifty
/// correlation times of the slowest linear relaxation mode.
pub fn batch_count(traj: &Trajectory) -> usize {
    let n = traj.samples.len();
    let window = traj.config.duration - traj.config.burn_in;
    let by_correlation = match NoiseModel::new(traj.params) {
        Ok(model) => {
            let tau = 1.0 / model.relaxation().slowest_rate();
            (window / (50.0 * tau)).floor() as usize
        }
        Err(_) => 0,
    };
    // at least MIN_BATCHES, and at least ten samples per batch when possible
    by_correlation.min(n / 10).max(MIN_BATCHES).min(n)
}

struct Batches {
    /// Per-batch mean of `x`.
    means: Vec<f64>,
    /// Per-batch mean of `(x − grand_mean)²`.
    spreads: Vec<f64>,
}

fn batches(x: &[f64], n_batches: usize, center: f64) -> Batches {
    let size = x.len() / n_batches;
    let mut means = Vec::with_capacity(n_batches);
    let mut spreads = Vec::with_capacity(n_batches);
    for chunk in x.chunks_exact(size).take(n_batches) {
        let k = chunk.len() as f64;
        means.push(chunk.iter().sum::<f64>() / k);
        spreads.push(chunk.iter().map(|v| (v - center).powi(2)).sum::<f64>() / k);
    }
    Batches { means, spreads }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0)
}

fn photon_samples(traj: &Trajectory) -> Result<Vec<f64>> {
    let x: Vec<f64> = traj.photon_numbers().collect();
    if x.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: x.len(),
        });
    }
    Ok(x)
}

/// Mean intracavity photon number with a batch-means error bar.
pub fn estimate_mean_photon(traj: &Trajectory) -> Result<EstimateWithError> {
    let x = photon_samples(traj)?;
    Ok(mean_with_batches(&x, batch_count(traj)))
}

fn mean_with_batches(x: &[f64], n_batches: usize) -> EstimateWithError {
    let n = x.len() as f64;
    let value = mean(x);
    let b = batches(x, n_batches, value);
    let std_error = (covariance(&b.means, &b.means) / b.means.len() as f64).sqrt();
    let var = x.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0);
    EstimateWithError {
        value,
        std_error,
        n_effective: effective_count(var, std_error, n),
    }
}

fn effective_count(var: f64, std_error: f64, n: f64) -> f64 {
    if std_error > 0.0 {
        (var / (std_error * std_error)).clamp(1.0, n)
    } else {
        n
    }
}

/// Fano factor `var(m)/⟨m⟩` of the sampled photon number.
///
/// The error bar propagates the batch covariance of the mean and of the
/// centered second moment through the ratio to first order.
pub fn estimate_fano(traj: &Trajectory) -> Result<EstimateWithError> {
    let x = photon_samples(traj)?;
    fano_with_batches(&x, batch_count(traj))
}

fn fano_with_batches(x: &[f64], n_batches: usize) -> Result<EstimateWithError> {
    let n = x.len() as f64;
    let mu = mean(x);
    if mu == 0.0 {
        return Err(Error::DarkTrajectory);
    }
    let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
    let value = var / mu;

    let b = batches(x, n_batches, mu);
    let k = b.means.len() as f64;
    // gradient of (S − (M − mu)²)/M at M = mu
    let (g_mean, g_spread) = (-var / (mu * mu), 1.0 / mu);
    let variance = (g_mean * g_mean * covariance(&b.means, &b.means)
        + 2.0 * g_mean * g_spread * covariance(&b.means, &b.spreads)
        + g_spread * g_spread * covariance(&b.spreads, &b.spreads))
        / k;
    let std_error = variance.max(0.0).sqrt();
    let mean_se = (covariance(&b.means, &b.means) / k).sqrt();
    Ok(EstimateWithError {
        value,
        std_error,
        n_effective: effective_count(var, mean_se, n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdPoint {
    pub omega: f64,
    pub value: f64,
    pub std_error: f64,
}

/// Segment-averaged, shot-noise-normalized spectrum of a detection stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub points: Vec<PsdPoint>,
    pub bin_width: f64,
    pub n_segments: usize,
    pub segment_bins: usize,
    pub mean_count: f64,
}

impl PsdEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,value,std_error\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::fmt_sig(p.omega),
                crate::fmt_sig(p.value),
                crate::fmt_sig(p.std_error)
            ));
        }
        out
    }

    /// Average over the `n` lowest reported frequencies.
    pub fn low_frequency_mean(&self, n: usize) -> EstimateWithError {
        let pts = &self.points[..n.min(self.points.len())];
        let k = pts.len() as f64;
        EstimateWithError {
            value: pts.iter().map(|p| p.value).sum::<f64>() / k,
            std_error: pts.iter().map(|p| p.std_error.powi(2)).sum::<f64>().sqrt() / k,
            n_effective: k * self.n_segments as f64,
        }
    }

    /// Least-squares line through the `n` lowest bins evaluated at `Ω = 0`.
    pub fn zero_frequency_extrapolation(&self, n: usize) -> EstimateWithError {
        let pts = &self.points[..n.min(self.points.len())];
        if pts.len() < 2 {
            return self.low_frequency_mean(n);
        }
        let k = pts.len() as f64;
        let x_bar = pts.iter().map(|p| p.omega).sum::<f64>() / k;
        let sxx: f64 = pts.iter().map(|p| (p.omega - x_bar).powi(2)).sum();
        let weights: Vec<f64> = pts
            .iter()
            .map(|p| 1.0 / k - x_bar * (p.omega - x_bar) / sxx)
            .collect();
        EstimateWithError {
            value: weights.iter().zip(pts).map(|(w, p)| w * p.value).sum(),
            std_error: weights
                .iter()
                .zip(pts)
                .map(|(w, p)| (w * p.std_error).powi(2))
                .sum::<f64>()
                .sqrt(),
            n_effective: k * self.n_segments as f64,
        }
    }
}

/// Bin width resolving the spectral structure near `Ω ~ α` and `Ω ~ m̂`.
pub fn default_bin_width(params: &LaserParams) -> f64 {
    let ss = steady_state(params);
    (0.1 / params.alpha).min(0.1 / ss.m_hat)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Spectral density of detection-count fluctuations, normalized so that a
/// Poisson stream reads 1 at every frequency.
///
/// Counts in bins of width `bin_width` over `[window_start, window_start +
/// duration)` are split into `n_segments` equal segments; each is
/// mean-subtracted and transformed, and the periodograms are averaged.
/// Binning attenuates the excess over shot noise by `sinc²(Ω Δ/2)` while the
/// aliased shot-noise floor stays flat, so the excess is divided by that
/// factor. Frequencies above `π/(2Δ)` and the DC bin are not reported.
pub fn estimate_psd(
    detections: &[f64],
    window_start: f64,
    duration: f64,
    bin_width: f64,
    n_segments: usize,
) -> Result<PsdEstimate> {
    let binning = |reason: &str| Error::Binning {
        bin_width,
        duration,
        reason: reason.to_string(),
    };
    if !(bin_width > 0.0 && bin_width.is_finite() && duration > 0.0 && duration.is_finite()) {
        return Err(binning("bin width and duration must be positive and finite"));
    }
    if n_segments < 2 {
        return Err(binning("need at least two segments for error bars"));
    }
    let total_bins = (duration / bin_width).floor() as usize;
    if total_bins < n_segments * MIN_SEGMENT_BINS {
        return Err(binning(&format!(
            "{total_bins} bins is fewer than {MIN_SEGMENT_BINS} per segment"
        )));
    }
    let seg_len = total_bins / n_segments;
    let used = seg_len * n_segments;
    let mut counts = vec![0.0f64; used];
    let mut n_in = 0usize;
    for &t in detections {
        let offset = (t - window_start) / bin_width;
        if offset >= 0.0 && (offset as usize) < used {
            counts[offset as usize] += 1.0;
            n_in += 1;
        }
    }
    if n_in == 0 {
        return Err(Error::NoDetections);
    }
    let mean_count = n_in as f64 / used as f64;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg_len);
    let n_report = seg_len / 4;
    let segments: Vec<Vec<f64>> = counts
        .par_chunks_exact(seg_len)
        .map(|seg| {
            let m = mean(seg);
            let mut buf: Vec<Complex<f64>> = seg.iter().map(|c| Complex::new(c - m, 0.0)).collect();
            fft.process(&mut buf);
            buf[1..=n_report]
                .iter()
                .map(|x| x.norm_sqr() / (seg_len as f64 * mean_count))
                .collect()
        })
        .collect();

    let k_seg = n_segments as f64;
    let d_omega = 2.0 * std::f64::consts::PI / (seg_len as f64 * bin_width);
    let points = (0..n_report)
        .map(|i| {
            let omega = d_omega * (i + 1) as f64;
            let raw_mean = segments.iter().map(|s| s[i]).sum::<f64>() / k_seg;
            let raw_var = segments.iter().map(|s| (s[i] - raw_mean).powi(2)).sum::<f64>() / (k_seg - 1.0);
            let atten = sinc(0.5 * omega * bin_width).powi(2);
            PsdPoint {
                omega,
                value: 1.0 + (raw_mean - 1.0) / atten,
                std_error: (raw_var / k_seg).sqrt() / atten,
            }
        })
        .collect();
    Ok(PsdEstimate {
        points,
        bin_width,
        n_segments,
        segment_bins: seg_len,
        mean_count,
    })
}

/// Spectrum of a trajectory's detection stream over its measurement window.
pub fn estimate_trajectory_psd(traj: &Trajectory, bin_width: f64, n_segments: usize) -> Result<PsdEstimate> {
    let (start, end) = traj.window();
    estimate_psd(&traj.detections, start, end - start, bin_width, n_segments)
}

/// Homogeneous Poisson event times on `(start, start + duration]`, used to
/// calibrate the spectral estimator.
pub fn poisson_stream(rate: f64, start: f64, duration: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(rate).expect("positive rate");
    let mut out = Vec::with_capacity((rate * duration * 1.01) as usize + 16);
    let mut t = start;
    loop {
        t += exp.sample(&mut rng);
        if t > start + duration {
            return out;
        }
        out.push(t);
    }
}

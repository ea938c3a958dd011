//! Exact jump-process simulation of the two-level laser.
//!
//! Four event types change the state `(m, n2)`:
//!
//! | event       | rate        | effect          |
//! |-------------|-------------|-----------------|
//! | pump        | `J`         | `n2 + 1`        |
//! | stimulated  | `(m+1) n2`  | `n2 − 1, m + 1` |
//! | spontaneous | `γ n2`      | `n2 − 1`        |
//! | detection   | `α m`       | `m − 1`         |
//!
//! A Poissonian pump is one more exponential clock. A regular pump fires at
//! the fixed times `k/J`, `k = 1, 2, …`; between arrivals the stochastic
//! rates are constant, so the exponential clock is simply redrawn after each
//! arrival.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), keyed by `seed` with the
//! stream index selecting an independent keystream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{steady_state, LaserParams};

/// How pump events arrive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpMode {
    /// Exponential inter-arrival times, `xi = 1`.
    Poissonian,
    /// Deterministic arrivals every `1/J`, `xi = 0`.
    Regular,
}

impl PumpMode {
    /// The pump realizing a given `xi`; only 0 and 1 have a microscopic model.
    pub fn for_xi(xi: f64) -> Result<Self> {
        if xi == 1.0 {
            Ok(PumpMode::Poissonian)
        } else if xi == 0.0 {
            Ok(PumpMode::Regular)
        } else {
            Err(Error::FractionalPump(xi))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PumpMode::Poissonian => "poissonian",
            PumpMode::Regular => "regular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub duration: f64,
    pub burn_in: f64,
    pub sample_interval: f64,
    pub seed: u64,
    /// Independent RNG stream index under the same seed.
    #[serde(default)]
    pub stream: u64,
    pub pump_mode: PumpMode,
    pub record_detections: bool,
}

impl SimConfig {
    pub fn new(duration: f64, pump_mode: PumpMode, seed: u64) -> Self {
        SimConfig {
            duration,
            burn_in: 0.0,
            sample_interval: duration / 1000.0,
            seed,
            stream: 0,
            pump_mode,
            record_detections: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("duration", self.duration),
            ("burn_in", self.burn_in),
            ("sample_interval", self.sample_interval),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.duration <= 0.0 {
            return bad("duration must be positive".into());
        }
        if self.burn_in < 0.0 || self.burn_in >= self.duration {
            return bad("burn_in must satisfy 0 ≤ burn_in < duration".into());
        }
        if self.sample_interval <= 0.0 {
            return bad("sample_interval must be positive".into());
        }
        if self.sample_interval > self.duration - self.burn_in {
            return bad("duration too short to collect a sample past burn_in".into());
        }
        Ok(())
    }

    /// Non-fatal configuration advice.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.sample_interval > (self.duration - self.burn_in) / 100.0 {
            out.push(format!(
                "sample_interval {} yields fewer than 100 samples past burn_in",
                self.sample_interval
            ));
        }
        out
    }

    pub fn n_samples(&self) -> usize {
        ((self.duration - self.burn_in) / self.sample_interval).floor() as usize + 1
    }
}

/// Instantaneous state; `n0 = N − n2` is implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimState {
    pub m: u64,
    pub n2: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Pump,
    Stimulated,
    Spontaneous,
    Detection,
}

impl EventKind {
    fn name(self) -> &'static str {
        match self {
            EventKind::Pump => "pump",
            EventKind::Stimulated => "stimulated",
            EventKind::Spontaneous => "spontaneous",
            EventKind::Detection => "detection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRates {
    pub pump: f64,
    pub stimulated: f64,
    pub spontaneous: f64,
    pub detection: f64,
}

impl EventRates {
    pub fn total(&self) -> f64 {
        self.pump + self.stimulated + self.spontaneous + self.detection
    }

    /// Event selected by a uniform draw in `[0, total)`.
    fn pick(&self, u: f64) -> EventKind {
        let table = [
            (EventKind::Pump, self.pump),
            (EventKind::Stimulated, self.stimulated),
            (EventKind::Spontaneous, self.spontaneous),
            (EventKind::Detection, self.detection),
        ];
        let mut acc = 0.0;
        for (kind, rate) in table {
            acc += rate;
            if u < acc {
                return kind;
            }
        }
        table
            .iter()
            .rev()
            .find(|(_, r)| *r > 0.0)
            .map(|(k, _)| *k)
            .expect("positive total rate")
    }
}

/// Stochastic rates in `state`. The pump rate is zero for a regular pump,
/// whose arrivals are scheduled rather than drawn.
pub fn event_rates(state: SimState, params: &LaserParams, mode: PumpMode) -> EventRates {
    let n2 = state.n2 as f64;
    let m = state.m as f64;
    EventRates {
        pump: match mode {
            PumpMode::Poissonian => params.pump,
            PumpMode::Regular => 0.0,
        },
        stimulated: (m + 1.0) * n2,
        spontaneous: params.gamma * n2,
        detection: params.alpha * m,
    }
}

/// Applies one event. The intermediate level empties instantly, so a
/// stimulated transition returns the atom straight to the ground state.
pub fn apply_event(state: SimState, kind: EventKind, n_atoms: u64) -> Result<SimState> {
    let fault = || Error::InapplicableEvent {
        event: kind.name(),
        m: state.m,
        n2: state.n2,
    };
    match kind {
        EventKind::Pump if state.n2 >= n_atoms => Err(Error::PumpBlocked),
        EventKind::Pump => Ok(SimState {
            n2: state.n2 + 1,
            ..state
        }),
        EventKind::Stimulated => Ok(SimState {
            m: state.m + 1,
            n2: state.n2.checked_sub(1).ok_or_else(fault)?,
        }),
        EventKind::Spontaneous => Ok(SimState {
            n2: state.n2.checked_sub(1).ok_or_else(fault)?,
            ..state
        }),
        EventKind::Detection => Ok(SimState {
            m: state.m.checked_sub(1).ok_or_else(fault)?,
            ..state
        }),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub pump: u64,
    pub stimulated: u64,
    pub spontaneous: u64,
    pub detection: u64,
    /// Pump arrivals dropped because every atom was already excited.
    pub blocked_pump: u64,
}

impl EventCounts {
    fn record(&mut self, kind: EventKind) {
        match kind {
            EventKind::Pump => self.pump += 1,
            EventKind::Stimulated => self.stimulated += 1,
            EventKind::Spontaneous => self.spontaneous += 1,
            EventKind::Detection => self.detection += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.pump + self.stimulated + self.spontaneous + self.detection
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub m: u64,
    pub n2: u64,
}

/// One simulated run. Counts and detections cover the measurement window
/// `(burn_in, duration]`; `initial` is the state at `burn_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: LaserParams,
    pub config: SimConfig,
    pub samples: Vec<Sample>,
    pub detections: Vec<f64>,
    pub event_counts: EventCounts,
    pub initial: SimState,
    pub final_state: SimState,
}

/// JSON sidecar describing a trajectory without its bulk data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetadata {
    pub params: LaserParams,
    pub config: SimConfig,
    pub event_counts: EventCounts,
    pub blocked_pump: u64,
    pub initial: SimState,
    pub final_state: SimState,
    pub n_samples: usize,
    pub n_detections: usize,
}

impl Trajectory {
    pub fn window(&self) -> (f64, f64) {
        (self.config.burn_in, self.config.duration)
    }

    pub fn photon_numbers(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.m as f64)
    }

    pub fn samples_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.samples.len() + 8);
        out.push_str("t,m,n2\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", crate::fmt_sig(s.t), s.m, s.n2));
        }
        out
    }

    pub fn detections_csv(&self) -> String {
        let mut out = String::with_capacity(20 * self.detections.len() + 2);
        out.push_str("t\n");
        for t in &self.detections {
            out.push_str(&crate::fmt_sig(*t));
            out.push('\n');
        }
        out
    }

    pub fn metadata(&self) -> TrajectoryMetadata {
        TrajectoryMetadata {
            params: self.params,
            config: self.config,
            event_counts: self.event_counts,
            blocked_pump: self.event_counts.blocked_pump,
            initial: self.initial,
            final_state: self.final_state,
            n_samples: self.samples.len(),
            n_detections: self.detections.len(),
        }
    }

    /// Shifts every timestamp by `dt`.
    pub fn shifted(&self, dt: f64) -> Trajectory {
        let mut out = self.clone();
        out.config.burn_in += dt;
        out.config.duration += dt;
        for s in &mut out.samples {
            s.t += dt;
        }
        for t in &mut out.detections {
            *t += dt;
        }
        out
    }
}

/// Fraction of pump arrivals that may be blocked before the run is rejected.
pub const MAX_BLOCKED_FRACTION: f64 = 1e-3;

/// Starting state: the analytic steady state rounded to whole quanta.
pub fn initial_state(params: &LaserParams) -> SimState {
    let ss = steady_state(params);
    SimState {
        m: ss.m.round() as u64,
        n2: (ss.n2.round() as u64).min(params.n_atoms),
    }
}

pub fn rng_for(config: &SimConfig) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream);
    rng
}

pub fn simulate(params: &LaserParams, config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    let mode = PumpMode::for_xi(params.xi)?;
    if mode != config.pump_mode {
        return Err(Error::PumpModeMismatch {
            mode: config.pump_mode.name(),
            xi: params.xi,
        });
    }
    let mut rng = rng_for(config);
    let n_samples = config.n_samples();
    let mut samples = Vec::with_capacity(n_samples);
    let mut detections = Vec::new();
    let mut counts = EventCounts::default();
    let (mut attempted, mut blocked) = (0u64, 0u64);

    let mut state = initial_state(params);
    let mut initial = None;
    let mut t = 0.0;
    let mut next_arrival = 1u64;
    let arrival_time = |k: u64| {
        if params.pump > 0.0 {
            k as f64 / params.pump
        } else {
            f64::INFINITY
        }
    };

    let sample_time = |k: usize| config.burn_in + k as f64 * config.sample_interval;

    loop {
        let rates = event_rates(state, params, mode);
        let total = rates.total();
        let t_stochastic = if total > 0.0 {
            let draw: f64 = rng.sample(Exp1);
            t + draw / total
        } else {
            f64::INFINITY
        };
        let t_pump = match mode {
            PumpMode::Regular => arrival_time(next_arrival),
            PumpMode::Poissonian => f64::INFINITY,
        };
        let t_event = t_stochastic.min(t_pump);

        // The state is constant on [t, t_event).
        while samples.len() < n_samples && sample_time(samples.len()) < t_event {
            samples.push(Sample {
                t: sample_time(samples.len()),
                m: state.m,
                n2: state.n2,
            });
        }
        if t_event > config.duration {
            break;
        }
        t = t_event;
        let in_window = t > config.burn_in;
        if in_window && initial.is_none() {
            initial = Some(state);
        }

        let kind = if t_pump <= t_stochastic {
            next_arrival += 1;
            EventKind::Pump
        } else {
            rates.pick(rng.gen::<f64>() * total)
        };
        if kind == EventKind::Pump {
            attempted += 1;
        }
        match apply_event(state, kind, params.n_atoms) {
            Ok(next) => {
                state = next;
                if in_window {
                    counts.record(kind);
                    if kind == EventKind::Detection && config.record_detections {
                        detections.push(t);
                    }
                }
            }
            Err(Error::PumpBlocked) => {
                blocked += 1;
                if in_window {
                    counts.blocked_pump += 1;
                }
            }
            Err(e) => return Err(e),
        }
    }

    if blocked as f64 > MAX_BLOCKED_FRACTION * attempted as f64 {
        return Err(Error::PumpSaturated { blocked, attempted });
    }
    debug_assert_eq!(samples.len(), n_samples);
    Ok(Trajectory {
        params: *params,
        config: *config,
        samples,
        detections,
        event_counts: counts,
        initial: initial.unwrap_or(state),
        final_state: state,
    })
}

/// Runs `n` trajectories on streams `config.stream .. config.stream + n`.
/// Output order follows the stream index.
pub fn simulate_ensemble(params: &LaserParams, config: &SimConfig, n: u64) -> Result<Vec<Trajectory>> {
    (0..n)
        .into_par_iter()
        .map(|k| {
            let cfg = SimConfig {
                stream: config.stream + k,
                ..*config
            };
            simulate(params, &cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, gamma: f64, pump: f64, xi: f64) -> LaserParams {
        LaserParams::new(1e5, alpha, gamma, pump, xi).unwrap()
    }

    #[test]
    fn rate_table() {
        let p = params(6.32, 2.0, 40.0, 1.0);
        let r = event_rates(SimState { m: 0, n2: 1 }, &p, PumpMode::Poissonian);
        assert_eq!(r.stimulated, 1.0);
        let r = event_rates(SimState { m: 0, n2: 0 }, &p, PumpMode::Poissonian);
        assert_eq!((r.pump, r.stimulated, r.spontaneous, r.detection), (40.0, 0.0, 0.0, 0.0));
        let r = event_rates(SimState { m: 5, n2: 3 }, &p, PumpMode::Poissonian);
        assert_eq!((r.pump, r.stimulated, r.spontaneous), (40.0, 18.0, 6.0));
        assert!((r.detection - 31.6).abs() < 1e-12);
        let r = event_rates(SimState { m: 5, n2: 3 }, &p, PumpMode::Regular);
        assert_eq!(r.pump, 0.0);
    }

    #[test]
    fn event_stencils() {
        let s = apply_event(SimState { m: 0, n2: 1 }, EventKind::Stimulated, 10).unwrap();
        assert_eq!(s, SimState { m: 1, n2: 0 });
        let s = apply_event(SimState { m: 3, n2: 0 }, EventKind::Detection, 10).unwrap();
        assert_eq!(s, SimState { m: 2, n2: 0 });
        let s = apply_event(SimState { m: 3, n2: 2 }, EventKind::Spontaneous, 10).unwrap();
        assert_eq!(s, SimState { m: 3, n2: 1 });
        assert_eq!(
            apply_event(SimState { m: 0, n2: 10 }, EventKind::Pump, 10),
            Err(Error::PumpBlocked)
        );
        assert!(matches!(
            apply_event(SimState { m: 0, n2: 0 }, EventKind::Detection, 10),
            Err(Error::InapplicableEvent { event: "detection", .. })
        ));
        assert!(apply_event(SimState { m: 0, n2: 0 }, EventKind::Stimulated, 10).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(10.0, PumpMode::Poissonian, 1);
        assert!(ok.validate().is_ok());
        assert!(ok.warnings().is_empty());
        let late = SimConfig { burn_in: 10.0, ..ok };
        assert!(late.validate().is_err());
        let coarse = SimConfig {
            sample_interval: 20.0,
            ..ok
        };
        assert!(coarse.validate().is_err());
        let sparse = SimConfig {
            sample_interval: 1.0,
            ..ok
        };
        assert!(sparse.validate().is_ok());
        assert_eq!(sparse.warnings().len(), 1);
    }

    #[test]
    fn pump_mode_must_match_xi() {
        assert_eq!(PumpMode::for_xi(0.5), Err(Error::FractionalPump(0.5)));
        let p = params(6.32, 0.0, 63.2, 1.0);
        let cfg = SimConfig::new(1.0, PumpMode::Regular, 1);
        assert!(matches!(simulate(&p, &cfg), Err(Error::PumpModeMismatch { .. })));
    }

    #[test]
    fn dark_laser_stays_dark() {
        for (xi, mode) in [(1.0, PumpMode::Poissonian), (0.0, PumpMode::Regular)] {
            let p = params(6.32, 1.0, 0.0, xi);
            let tr = simulate(&p, &SimConfig::new(100.0, mode, 3)).unwrap();
            assert!(tr.samples.iter().all(|s| s.m == 0 && s.n2 == 0));
            assert!(tr.detections.is_empty());
            assert_eq!(tr.event_counts.total(), 0);
            assert_eq!(tr.samples.len(), 1001);
        }
    }

    #[test]
    fn regular_pump_schedule() {
        let p = params(6.32, 0.0, 63.2, 0.0);
        let duration = 123.4;
        let tr = simulate(&p, &SimConfig::new(duration, PumpMode::Regular, 9)).unwrap();
        let expected = (duration * 63.2f64).floor() as i64;
        assert!((tr.event_counts.pump as i64 - expected).abs() <= 1);
    }

    #[test]
    fn bookkeeping_and_window() {
        let p = params(6.32, 3.0, 63.2, 1.0);
        let cfg = SimConfig {
            burn_in: 5.0,
            ..SimConfig::new(200.0, PumpMode::Poissonian, 11)
        };
        let tr = simulate(&p, &cfg).unwrap();
        let c = tr.event_counts;
        assert_eq!(c.detection as usize, tr.detections.len());
        let dm = tr.final_state.m as i64 - tr.initial.m as i64;
        assert_eq!(c.stimulated as i64 - c.detection as i64, dm);
        let dn2 = tr.final_state.n2 as i64 - tr.initial.n2 as i64;
        assert_eq!(c.pump as i64 - c.stimulated as i64 - c.spontaneous as i64, dn2);
        assert!(tr.detections.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.detections.iter().all(|&t| t > 5.0 && t <= 200.0));
        assert_eq!(tr.samples.first().unwrap().t, 5.0);
        assert!(tr.samples.last().unwrap().t <= 200.0);
        assert_eq!(tr.samples.len(), cfg.n_samples());
    }

    #[test]
    fn reproducible_and_stream_dependent() {
        let p = params(6.32, 0.0, 63.2, 1.0);
        let cfg = SimConfig::new(50.0, PumpMode::Poissonian, 42);
        let a = simulate(&p, &cfg).unwrap();
        let b = simulate(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples_csv(), b.samples_csv());
        let other = simulate(&p, &SimConfig { stream: 1, ..cfg }).unwrap();
        assert_ne!(a.detections, other.detections);
        let ens = simulate_ensemble(&p, &cfg, 3).unwrap();
        assert_eq!(ens[0], a);
        assert_eq!(ens[1], other);
    }

    #[test]
    fn saturated_reservoir_is_rejected() {
        let p = LaserParams::new(3.0, 1000.0, 0.0, 100.0, 1.0).unwrap();
        let err = simulate(&p, &SimConfig::new(10.0, PumpMode::Poissonian, 1)).unwrap_err();
        assert!(matches!(err, Error::PumpSaturated { .. }), "{err:?}");
    }

    #[test]
    fn csv_headers() {
        let p = params(6.32, 0.0, 63.2, 1.0);
        let tr = simulate(&p, &SimConfig::new(1.0, PumpMode::Poissonian, 2)).unwrap();
        assert!(tr.samples_csv().starts_with("t,m,n2\n0,"));
        assert!(tr.detections_csv().starts_with("t\n"));
        let meta = serde_json::to_value(tr.metadata()).unwrap();
        assert_eq!(meta["config"]["pump_mode"], "poissonian");
        assert_eq!(meta["params"]["alpha"], 6.32);
    }
}

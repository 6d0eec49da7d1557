//! Photon propagation and detection.
//!
//! Each emitted pair is resolved into a pair of analyzer ports by the Born
//! rule, carried along its arm to a detector, thinned by the detector
//! efficiency and smeared by Gaussian timing jitter. Dark counts are merged
//! in afterwards. Time is kept in unsigned integer picoseconds.
//!
//! Detector labels follow the port convention: `B`/`B'` are the transmitted
//! and reflected signal outputs, `A`/`A'` the transmitted and reflected idler
//! outputs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::experiment::BenchConfig;
use crate::optics::{beam_block, interferometer_phase, mirror_train, PolarizationOperator};
use crate::photon_source::poisson_times;
use crate::quantum_state::{Port, TwoPhotonState};
use crate::seeding::{stream_rng, Stream};
use crate::{Error, Result, SPEED_OF_LIGHT};

const PS_PER_S: f64 = 1e12;

/// Optical and electrical path of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmGeometry {
    /// Free-space distance from the crystal to the fiber couplers, meters.
    pub base_path_m: f64,
    /// Additional free-space detour (mirror delay line), meters.
    pub extra_free_space_m: f64,
    /// Fiber from coupler to detector, meters.
    pub fiber_length_m: f64,
    /// Speed of light in the fiber as a fraction of `c`.
    pub fiber_speed_fraction: f64,
    /// Extra cable delay between detector and counter, picoseconds.
    pub electrical_delay_ps: u64,
    /// Fraction of photons reaching the collection optics (beam-spread loss).
    pub collection_efficiency: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        ArmGeometry {
            base_path_m: 1.0,
            extra_free_space_m: 0.0,
            fiber_length_m: 1.0,
            fiber_speed_fraction: 2.0 / 3.0,
            electrical_delay_ps: 0,
            collection_efficiency: 1.0,
        }
    }
}

impl ArmGeometry {
    pub fn validate(&self, section: &str) -> Result<()> {
        for (name, v) in [
            ("base_path_m", self.base_path_m),
            ("extra_free_space_m", self.extra_free_space_m),
            ("fiber_length_m", self.fiber_length_m),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{section}.{name}"), "must be a finite length >= 0"));
            }
        }
        if !(self.fiber_speed_fraction > 0.0 && self.fiber_speed_fraction <= 1.0) {
            return Err(Error::validation(format!("{section}.fiber_speed_fraction"), "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.collection_efficiency) {
            return Err(Error::validation(format!("{section}.collection_efficiency"), "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Optical propagation time in picoseconds (not rounded).
    pub fn optical_delay_ps(&self) -> f64 {
        let free = (self.base_path_m + self.extra_free_space_m) / SPEED_OF_LIGHT;
        let fiber = self.fiber_length_m / (self.fiber_speed_fraction * SPEED_OF_LIGHT);
        (free + fiber) * PS_PER_S
    }
}

/// Emission time plus optical propagation, rounded to the nearest tick.
pub fn arrival_time(emission_ps: u64, arm: &ArmGeometry) -> u64 {
    emission_ps + arm.optical_delay_ps().round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Standard deviation of Gaussian timing jitter, picoseconds.
    pub jitter_sigma_ps: f64,
    pub dark_rate_hz: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            efficiency: 0.30,
            jitter_sigma_ps: 350.0,
            dark_rate_hz: 100.0,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self, section: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::validation(format!("{section}.efficiency"), "must lie in [0, 1]"));
        }
        if !(self.jitter_sigma_ps >= 0.0) || !self.jitter_sigma_ps.is_finite() {
            return Err(Error::validation(format!("{section}.jitter_sigma_ps"), "must be >= 0"));
        }
        if !(self.dark_rate_hz >= 0.0) || !self.dark_rate_hz.is_finite() {
            return Err(Error::validation(format!("{section}.dark_rate_hz"), "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Detector {
    A,
    APrime,
    B,
    BPrime,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::A, Detector::APrime, Detector::B, Detector::BPrime];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Label used in files: `A`, `Ap`, `B`, `Bp`.
    pub fn label(self) -> &'static str {
        match self {
            Detector::A => "A",
            Detector::APrime => "Ap",
            Detector::B => "B",
            Detector::BPrime => "Bp",
        }
    }

    pub fn from_label(label: &str) -> Option<Detector> {
        Detector::ALL.into_iter().find(|d| d.label() == label)
    }

    pub fn signal(port: Port) -> Detector {
        match port {
            Port::Transmitted => Detector::B,
            Port::Reflected => Detector::BPrime,
        }
    }

    pub fn idler(port: Port) -> Detector {
        match port {
            Port::Transmitted => Detector::A,
            Port::Reflected => Detector::APrime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhotonEvent {
    pub detector: Detector,
    pub time_ps: u64,
}

/// Draws `(signal_port, idler_port)` with Born-rule probabilities.
pub fn sample_ports<R: Rng + ?Sized>(
    state: &TwoPhotonState,
    signal_angle: f64,
    idler_angle: f64,
    rng: &mut R,
) -> Result<(Port, Port)> {
    let sampler = PortSampler::new(state.port_probabilities(signal_angle, idler_angle), true)?;
    Ok(sampler.sample(rng).expect("normalized sampler never blocks"))
}

/// Inverse-CDF sampler over the four port pairs plus an optional "absorbed"
/// outcome holding whatever probability a beam block removed.
#[derive(Debug, Clone)]
pub struct PortSampler {
    cumulative: [f64; 4],
}

const PORT_PAIRS: [(Port, Port); 4] = [
    (Port::Transmitted, Port::Transmitted),
    (Port::Transmitted, Port::Reflected),
    (Port::Reflected, Port::Transmitted),
    (Port::Reflected, Port::Reflected),
];

impl PortSampler {
    /// `probs` ordered `TT, TR, RT, RR`. With `normalized`, they must sum to 1
    /// within 1e-8; otherwise to at most 1 + 1e-8.
    pub fn new(probs: [f64; 4], normalized: bool) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        let ok = if normalized {
            (total - 1.0).abs() <= 1e-8
        } else {
            total <= 1.0 + 1e-8
        };
        if !ok || probs.iter().any(|p| !(p >= &0.0)) {
            return Err(Error::Consistency(format!(
                "port probabilities {probs:?} sum to {total}"
            )));
        }
        let mut cumulative = [0.0; 4];
        let mut acc = 0.0;
        for (c, p) in cumulative.iter_mut().zip(probs) {
            acc += p;
            *c = acc;
        }
        if normalized {
            cumulative[3] = 1.0;
        }
        Ok(PortSampler { cumulative })
    }

    /// `None` when the pair is absorbed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(Port, Port)> {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .map(|k| PORT_PAIRS[k])
    }
}

/// Efficiency thinning and jitter for one photon. Two draws (uniform, normal)
/// are consumed regardless of the outcome.
pub fn detect<R: Rng + ?Sized>(
    detector: Detector,
    arrival_ps: u64,
    spec: &DetectorSpec,
    electrical_delay_ps: u64,
    rng: &mut R,
) -> Option<PhotonEvent> {
    let u: f64 = rng.random();
    let z: f64 = rng.sample(StandardNormal);
    if u >= spec.efficiency {
        return None;
    }
    let jitter = (z * spec.jitter_sigma_ps).round() as i64;
    let t = arrival_ps as i64 + jitter + electrical_delay_ps as i64;
    Some(PhotonEvent {
        detector,
        time_ps: t.max(0) as u64,
    })
}

/// Background counts: Poisson process at the dark rate over `duration_s`.
pub fn dark_events(
    detector: Detector,
    spec: &DetectorSpec,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<PhotonEvent>> {
    let times = poisson_times(
        spec.dark_rate_hz,
        duration_s,
        seed,
        Stream::Dark(detector.index() as u8),
    )?;
    Ok(times
        .into_iter()
        .map(|time_ps| PhotonEvent { detector, time_ps })
        .collect())
}

/// Four time-sorted detector streams.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventStreams {
    streams: [Vec<PhotonEvent>; 4],
}

impl EventStreams {
    /// Sorts each stream by time; ties keep insertion order.
    pub fn from_unsorted(mut streams: [Vec<PhotonEvent>; 4]) -> Self {
        for s in streams.iter_mut() {
            s.sort_by_key(|e| e.time_ps);
        }
        EventStreams { streams }
    }

    pub fn get(&self, detector: Detector) -> &[PhotonEvent] {
        &self.streams[detector.index()]
    }

    pub fn total(&self) -> usize {
        self.streams.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// All events ordered by time, then detector.
    pub fn merged(&self) -> Vec<PhotonEvent> {
        let mut all: Vec<PhotonEvent> = self.streams.iter().flatten().copied().collect();
        all.sort_by_key(|e| (e.time_ps, e.detector));
        all
    }
}

/// Everything one interval produced.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub streams: EventStreams,
    /// Port pair of every emitted pair in emission order; `None` if absorbed.
    pub outcomes: Vec<Option<(Port, Port)>>,
}

/// Simulates one counting interval of the bench at interferometer phase
/// `delta_phi`.
///
/// `state` is the pair state leaving the source (after any joint rotation).
/// Stages draw from independent streams (see [`crate::seeding`]), so the port
/// sequence for a given seed depends only on the state and analyzer settings,
/// never on delays, efficiencies or dark counts.
pub fn run_interval(
    state: &TwoPhotonState,
    bench: &BenchConfig,
    delta_phi: f64,
    interval_s: f64,
    seed: u64,
) -> Result<IntervalRecord> {
    if !(interval_s > 0.0) {
        return Err(Error::domain("interval must be positive"));
    }
    let sampler = analyzer_sampler(state, bench, delta_phi)?;
    let times = poisson_times(bench.source.pair_rate_hz, interval_s, seed, Stream::Emission)?;

    let mut outcome_rng = stream_rng(seed, Stream::Outcome);
    let mut detect_rng = stream_rng(seed, Stream::Detection);

    let signal_delay = bench.signal_arm.optical_delay_ps().round() as u64;
    let idler_delay = bench.idler_arm.optical_delay_ps().round() as u64;
    let effective = |d: Detector| {
        let arm = match d {
            Detector::A | Detector::APrime => &bench.idler_arm,
            Detector::B | Detector::BPrime => &bench.signal_arm,
        };
        let mut spec = bench.detectors[d.index()];
        spec.efficiency *= arm.collection_efficiency;
        spec
    };
    let specs = Detector::ALL.map(effective);

    let mut raw: [Vec<PhotonEvent>; 4] = Default::default();
    let mut outcomes = Vec::with_capacity(times.len());
    for &t in &times {
        let outcome = sampler.sample(&mut outcome_rng);
        outcomes.push(outcome);
        let (sig_port, idl_port) = outcome.unwrap_or((Port::Transmitted, Port::Transmitted));
        let sig = Detector::signal(sig_port);
        let idl = Detector::idler(idl_port);
        let s = detect(
            sig,
            t + signal_delay,
            &specs[sig.index()],
            bench.signal_arm.electrical_delay_ps,
            &mut detect_rng,
        );
        let i = detect(
            idl,
            t + idler_delay,
            &specs[idl.index()],
            bench.idler_arm.electrical_delay_ps,
            &mut detect_rng,
        );
        if outcome.is_some() {
            raw[sig.index()].extend(s);
            raw[idl.index()].extend(i);
        }
    }

    for d in Detector::ALL {
        let electrical = match d {
            Detector::A | Detector::APrime => bench.idler_arm.electrical_delay_ps,
            Detector::B | Detector::BPrime => bench.signal_arm.electrical_delay_ps,
        };
        let dark = dark_events(d, &bench.detectors[d.index()], interval_s, seed)?;
        raw[d.index()].extend(dark.into_iter().map(|mut e| {
            e.time_ps += electrical;
            e
        }));
    }

    Ok(IntervalRecord {
        streams: EventStreams::from_unsorted(raw),
        outcomes,
    })
}

/// Port sampler for the bench's analyzers after the interferometer phase,
/// optional beam block and idler mirrors.
fn analyzer_sampler(state: &TwoPhotonState, bench: &BenchConfig, delta_phi: f64) -> Result<PortSampler> {
    let mirrors: Vec<f64> = bench.mirror_deltas_deg.iter().map(|d| d.to_radians()).collect();
    let after_phase = state.evolve(&interferometer_phase(delta_phi), &mirror_train(&mirrors))?;
    let (survival, analyzed) = match bench.beam_block {
        None => (1.0, Some(after_phase)),
        Some(path) => {
            let t = after_phase.apply_local(&beam_block(path), &PolarizationOperator::identity())?;
            (t.survival, t.state)
        }
    };
    let probs = match analyzed {
        Some(rho) => rho
            .port_probabilities(bench.signal_hwp_deg.to_radians(), bench.idler_hwp_deg.to_radians())
            .map(|p| p * survival),
        None => [0.0; 4],
    };
    PortSampler::new(probs, bench.beam_block.is_none())
}

//! Coincidence counting between detector streams.
//!
//! The gate has full width `window_ps` centered on each event: two events
//! pair iff `|t_X − t_Y| ≤ window/2` after per-detector compensation (closed
//! interval). Pairing is greedy earliest-first on the time-sorted streams and
//! every event joins at most one pair, as a hardware gate would. With this
//! gate the accidental rate between uncorrelated streams is `R_X·R_Y·τ_c`; the
//! same count with a `±τ_c` gate would be `2·R_X·R_Y·τ_c`.

use serde::{Deserialize, Serialize};

use crate::event_timeline::{Detector, EventStreams, PhotonEvent};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceSpec {
    /// Full width τ_c of the coincidence gate, picoseconds.
    pub window_ps: u64,
    /// Delay added to each detector's timestamps before matching, indexed by
    /// [`Detector::index`].
    pub compensation_ps: [i64; 4],
}

impl Default for CoincidenceSpec {
    fn default() -> Self {
        CoincidenceSpec {
            window_ps: 8000,
            compensation_ps: [0; 4],
        }
    }
}

impl CoincidenceSpec {
    pub fn new(window_ps: u64) -> Result<Self> {
        let spec = CoincidenceSpec {
            window_ps,
            ..Default::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_compensation(mut self, detector: Detector, delay_ps: i64) -> Self {
        self.compensation_ps[detector.index()] = delay_ps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_ps == 0 {
            return Err(Error::validation("coincidence.window_ps", "must be > 0"));
        }
        Ok(())
    }

    pub fn window_s(&self) -> f64 {
        self.window_ps as f64 * 1e-12
    }

    fn shifted(&self, e: &PhotonEvent) -> i64 {
        e.time_ps as i64 + self.compensation_ps[e.detector.index()]
    }
}

/// Coincidence and singles counts for one interval.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CountTable {
    pub n_ab: u64,
    pub n_apb: u64,
    pub n_abp: u64,
    pub n_apbp: u64,
    /// Singles indexed by [`Detector::index`]: `A, A', B, B'`.
    pub singles: [u64; 4],
    pub interval_s: f64,
}

impl CountTable {
    pub fn singles(&self, d: Detector) -> u64 {
        self.singles[d.index()]
    }

    /// Coincidences between idler detector `idler` and signal detector `signal`.
    pub fn coincidences(&self, idler: Detector, signal: Detector) -> u64 {
        match (idler, signal) {
            (Detector::A, Detector::B) => self.n_ab,
            (Detector::APrime, Detector::B) => self.n_apb,
            (Detector::A, Detector::BPrime) => self.n_abp,
            (Detector::APrime, Detector::BPrime) => self.n_apbp,
            _ => panic!("coincidences pair one idler detector with one signal detector"),
        }
    }

    pub fn total_coincidences(&self) -> u64 {
        self.n_ab + self.n_apb + self.n_abp + self.n_apbp
    }
}

fn is_sorted(stream: &[PhotonEvent]) -> bool {
    stream.windows(2).all(|w| w[0].time_ps <= w[1].time_ps)
}

/// Greedy two-pointer pairing of two time-sorted streams.
pub fn count_pairs(x: &[PhotonEvent], y: &[PhotonEvent], spec: &CoincidenceSpec) -> Result<u64> {
    spec.validate()?;
    if !is_sorted(x) || !is_sorted(y) {
        return Err(Error::domain("coincidence input streams must be sorted by time"));
    }
    let (mut i, mut j, mut count) = (0, 0, 0);
    let window = spec.window_ps as i128;
    while i < x.len() && j < y.len() {
        let tx = spec.shifted(&x[i]) as i128;
        let ty = spec.shifted(&y[j]) as i128;
        if 2 * (tx - ty).abs() <= window {
            count += 1;
            i += 1;
            j += 1;
        } else if tx < ty {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(count)
}

/// Counts the four idler/signal detector combinations and the singles.
pub fn count_table(streams: &EventStreams, spec: &CoincidenceSpec, interval_s: f64) -> Result<CountTable> {
    use Detector::*;
    let pair = |a, b| count_pairs(streams.get(a), streams.get(b), spec);
    Ok(CountTable {
        n_ab: pair(A, B)?,
        n_apb: pair(APrime, B)?,
        n_abp: pair(A, BPrime)?,
        n_apbp: pair(APrime, BPrime)?,
        singles: Detector::ALL.map(|d| streams.get(d).len() as u64),
        interval_s,
    })
}

/// Expected accidental coincidence rate between uncorrelated streams, Hz.
pub fn accidental_rate(rate_x_hz: f64, rate_y_hz: f64, spec: &CoincidenceSpec) -> f64 {
    rate_x_hz * rate_y_hz * spec.window_s()
}

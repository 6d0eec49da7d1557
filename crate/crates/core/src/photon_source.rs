//! Downconversion source: initial polarization state and pair emission times.

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::optics::half_wave_plate;
use crate::quantum_state::TwoPhotonState;
use crate::seeding::{stream_rng, Stream};
use crate::{Complex, Error, Result};

/// Largest expected number of pairs a single emission call may generate.
pub const MAX_EXPECTED_PAIRS: f64 = 1e9;

const PS_PER_S: f64 = 1e12;

/// Polarization state produced by the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    /// `(|HH⟩ + e^{iα}|VV⟩)/√2` with HH–VV coherence scaled by `coherence`.
    Entangled { alpha: f64, coherence: f64 },
    /// `½|+45,+45⟩⟨·| + ½|−45,−45⟩⟨·|`.
    MixedDiagonal,
    /// `½|HH⟩⟨HH| + ½|VV⟩⟨VV|`.
    MixedHv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// Pairs per second.
    pub pair_rate: f64,
    /// Seconds.
    pub duration: f64,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate > 0.0) || !self.pair_rate.is_finite() {
            return Err(Error::validation("source.pair_rate_hz", "must be positive"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::validation("scan.dwell_s", "must be positive"));
        }
        if let SourceKind::Entangled { alpha, coherence } = self.kind {
            if !(0.0..=1.0).contains(&coherence) {
                return Err(Error::validation("source.coherence", "must lie in [0, 1]"));
            }
            if !alpha.is_finite() {
                return Err(Error::validation("source.alpha_deg", "must be finite"));
            }
        }
        Ok(())
    }
}

pub fn prepare_state(kind: &SourceKind) -> Result<TwoPhotonState> {
    match *kind {
        SourceKind::Entangled { alpha, coherence } => TwoPhotonState::bell(alpha).dephase(coherence),
        SourceKind::MixedDiagonal => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let plus = [Complex::new(s, 0.0), Complex::new(s, 0.0)];
            let minus = [Complex::new(s, 0.0), Complex::new(-s, 0.0)];
            let pp = TwoPhotonState::product(plus, plus)?;
            let mm = TwoPhotonState::product(minus, minus)?;
            TwoPhotonState::mixture(&[(0.5, &pp), (0.5, &mm)])
        }
        SourceKind::MixedHv => TwoPhotonState::bell(0.0).dephase(0.0),
    }
}

/// Rotates both photons with identical half-wave plates at `theta` radians.
pub fn joint_hwp_rotation(state: &TwoPhotonState, theta: f64) -> Result<TwoPhotonState> {
    let u = half_wave_plate(theta);
    state.evolve(&u, &u)
}

/// One downconversion event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEmission<'a> {
    /// Picoseconds since the start of the run.
    pub time_ps: u64,
    pub state: &'a TwoPhotonState,
}

/// Emission times of one run together with the state every pair is drawn
/// from. Stationary sources share a single prepared state.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionRun {
    pub prepared_state: TwoPhotonState,
    pub times_ps: Vec<u64>,
}

impl EmissionRun {
    pub fn len(&self) -> usize {
        self.times_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PairEmission<'_>> {
        self.times_ps.iter().map(move |&time_ps| PairEmission {
            time_ps,
            state: &self.prepared_state,
        })
    }
}

/// Homogeneous Poisson process of pair creation over `spec.duration`.
pub fn emit_pairs(spec: &SourceSpec, seed: u64) -> Result<EmissionRun> {
    spec.validate()?;
    let times_ps = poisson_times(spec.pair_rate, spec.duration, seed, Stream::Emission)?;
    Ok(EmissionRun {
        prepared_state: prepare_state(&spec.kind)?,
        times_ps,
    })
}

/// Strictly increasing picosecond timestamps of a Poisson process; ties after
/// rounding are pushed forward by one tick.
pub(crate) fn poisson_times(rate: f64, duration: f64, seed: u64, stream: Stream) -> Result<Vec<u64>> {
    let expected = rate * duration;
    if expected > MAX_EXPECTED_PAIRS {
        return Err(Error::Resource(format!(
            "rate × duration = {expected:.3e} exceeds the limit of {MAX_EXPECTED_PAIRS:.0e} events"
        )));
    }
    if rate <= 0.0 {
        return Ok(Vec::new());
    }
    let exp = Exp::new(rate).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = stream_rng(seed, stream);
    let mut times = Vec::with_capacity((expected + 4.0 * expected.sqrt() + 8.0) as usize);
    let mut t = 0.0;
    let mut last: Option<u64> = None;
    loop {
        t += exp.sample(&mut rng);
        if t >= duration {
            break;
        }
        let mut tick = (t * PS_PER_S).round() as u64;
        if let Some(prev) = last {
            if tick <= prev {
                tick = prev + 1;
            }
        }
        times.push(tick);
        last = Some(tick);
    }
    Ok(times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_state::{MeasurementSetting, Port};
    use crate::Matrix4c;
    use std::f64::consts::FRAC_PI_8;

    fn spec(rate: f64, duration: f64) -> SourceSpec {
        SourceSpec {
            kind: SourceKind::Entangled {
                alpha: 0.0,
                coherence: 1.0,
            },
            pair_rate: rate,
            duration,
        }
    }

    #[test]
    fn entangled_source_is_bell_state() {
        let rho = prepare_state(&SourceKind::Entangled {
            alpha: 0.0,
            coherence: 1.0,
        })
        .unwrap();
        assert!(rho.distance(&TwoPhotonState::bell(0.0)) < 1e-15);
    }

    #[test]
    fn mixed_hv_is_diagonal() {
        let rho = prepare_state(&SourceKind::MixedHv).unwrap();
        let mut expected = Matrix4c::zeros();
        expected[(0, 0)] = Complex::new(0.5, 0.0);
        expected[(3, 3)] = Complex::new(0.5, 0.0);
        assert!((rho.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn mixed_diagonal_matches_expanded_projectors() {
        // |±,±⟩ = ½(|HH⟩ ± |HV⟩ ± |VH⟩ + |VV⟩); each outer product has entries
        // ¼·sᵢsⱼ. Averaging the two kills every entry whose sign pattern differs.
        let plus = [1.0, 1.0, 1.0, 1.0];
        let minus = [1.0, -1.0, -1.0, 1.0];
        let rho = prepare_state(&SourceKind::MixedDiagonal).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let e = 0.5 * 0.25 * plus[r] * plus[c] + 0.5 * 0.25 * minus[r] * minus[c];
                assert!((rho.element(r, c) - Complex::new(e, 0.0)).norm() < 1e-15, "({r},{c})");
            }
        }
    }

    #[test]
    fn joint_rotation_of_mixed_hv_gives_mixed_diagonal() {
        let hv = prepare_state(&SourceKind::MixedHv).unwrap();
        let rotated = joint_hwp_rotation(&hv, FRAC_PI_8).unwrap();
        let diag = prepare_state(&SourceKind::MixedDiagonal).unwrap();
        assert!(rotated.distance(&diag) < 1e-14);
    }

    #[test]
    fn bell_state_is_rotation_invariant() {
        let bell = TwoPhotonState::bell(0.0);
        for deg in [0.0_f64, 10.0, 17.0, 20.0, 30.0] {
            let rot = joint_hwp_rotation(&bell, deg.to_radians()).unwrap();
            for a in [0.0_f64, 11.0, 22.5, 40.0] {
                for b in [0.0_f64, 22.5, 33.0] {
                    for ps in Port::BOTH {
                        for pi in Port::BOTH {
                            let s = MeasurementSetting::from_degrees(a, ps);
                            let i = MeasurementSetting::from_degrees(b, pi);
                            let d = rot.joint_probability(s, i) - bell.joint_probability(s, i);
                            assert!(d.abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_rotation_conjugates_with_sign_flips() {
        // HWP at 0 is diag(1,−1); HV-diagonal states are unchanged.
        let hv = prepare_state(&SourceKind::MixedHv).unwrap();
        assert!(joint_hwp_rotation(&hv, 0.0).unwrap().distance(&hv) < 1e-15);
        let bell = TwoPhotonState::bell(0.3);
        assert!(joint_hwp_rotation(&bell, 0.0).unwrap().distance(&bell) < 1e-15);
    }

    #[test]
    fn emission_is_deterministic_and_sorted() {
        let a = emit_pairs(&spec(1000.0, 5.0), 42).unwrap();
        let b = emit_pairs(&spec(1000.0, 5.0), 42).unwrap();
        assert_eq!(a, b);
        assert!(a.times_ps.windows(2).all(|w| w[0] < w[1]));
        assert!(a.times_ps.last().copied().unwrap() < 5_000_000_000_000);
        let c = emit_pairs(&spec(1000.0, 5.0), 43).unwrap();
        assert_ne!(a.times_ps, c.times_ps);
    }

    #[test]
    fn tiny_duration_gives_empty_process() {
        let run = emit_pairs(&spec(1.0, 1e-12), 9).unwrap();
        assert!(run.is_empty());
    }

    #[test]
    fn guard_against_huge_runs() {
        assert!(matches!(emit_pairs(&spec(1e9, 2.0), 1), Err(Error::Resource(_))));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(emit_pairs(&spec(0.0, 1.0), 1).is_err());
        assert!(emit_pairs(&spec(1.0, 0.0), 1).is_err());
        let bad = SourceSpec {
            kind: SourceKind::Entangled {
                alpha: 0.0,
                coherence: 1.5,
            },
            ..spec(1.0, 1.0)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn high_rate_ties_are_broken() {
        // 1e9 pairs/s gives a mean gap of one tick; timestamps must still be
        // strictly increasing.
        let run = emit_pairs(&spec(1e9, 1e-5), 3).unwrap();
        assert!(run.times_ps.windows(2).all(|w| w[0] < w[1]));
    }
}

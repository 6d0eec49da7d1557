//! Reference implementations used only by tests.

#![allow(dead_code)]

use eraser_core::coincidence::CoincidenceSpec;
use eraser_core::event_timeline::{Detector, PhotonEvent};
use eraser_core::quantum_state::{MeasurementSetting, Port, TwoPhotonState};
use eraser_core::{Complex, Matrix2c, Matrix4c};
use rand::Rng;

/// Projector onto linear polarization at `beta` radians.
pub fn linear_projector(beta: f64) -> Matrix2c {
    let (s, c) = beta.sin_cos();
    Matrix2c::new(
        Complex::new(c * c, 0.0),
        Complex::new(c * s, 0.0),
        Complex::new(c * s, 0.0),
        Complex::new(s * s, 0.0),
    )
}

/// Polarization angle selected by an analyzer plate at `theta` and a port:
/// the transmitted port passes `90° − 2θ`, the reflected port the orthogonal one.
pub fn selected_angle(setting: MeasurementSetting) -> f64 {
    let t = std::f64::consts::FRAC_PI_2 - 2.0 * setting.hwp_angle();
    match setting.port() {
        Port::Transmitted => t,
        Port::Reflected => t + std::f64::consts::FRAC_PI_2,
    }
}

/// Explicit 4×4 Kronecker product, written out index by index.
pub fn kron(a: &Matrix2c, b: &Matrix2c) -> Matrix4c {
    let mut out = Matrix4c::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `tr(ρ · P_s ⊗ P_i)` summed element by element.
pub fn naive_probability(rho: &TwoPhotonState, signal: MeasurementSetting, idler: MeasurementSetting) -> f64 {
    let p = kron(&linear_projector(selected_angle(signal)), &linear_projector(selected_angle(idler)));
    let mut tr = Complex::new(0.0, 0.0);
    for i in 0..4 {
        for k in 0..4 {
            tr += rho.element(i, k) * p[(k, i)];
        }
    }
    tr.re
}

pub fn random_pure<R: Rng>(rng: &mut R) -> TwoPhotonState {
    let amps: [Complex; 4] = std::array::from_fn(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    TwoPhotonState::from_pure(amps).unwrap_or_else(|_| TwoPhotonState::bell(0.0))
}

/// Mixture of up to four random pure states.
pub fn random_state<R: Rng>(rng: &mut R) -> TwoPhotonState {
    let n = rng.random_range(1..=4);
    let states: Vec<TwoPhotonState> = (0..n).map(|_| random_pure(rng)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let parts: Vec<(f64, &TwoPhotonState)> = weights.iter().map(|w| w / total).zip(states.iter()).collect();
    TwoPhotonState::mixture(&parts).unwrap()
}

/// Maximum bipartite matching (Kuhn's augmenting paths) between two event
/// lists, where an edge joins events within the coincidence gate.
pub fn max_matching(x: &[PhotonEvent], y: &[PhotonEvent], spec: &CoincidenceSpec) -> usize {
    let shifted = |e: &PhotonEvent| e.time_ps as i64 + spec.compensation_ps[e.detector.index()];
    let adj: Vec<Vec<usize>> = x
        .iter()
        .map(|a| {
            (0..y.len())
                .filter(|&j| 2 * (shifted(a) - shifted(&y[j])).abs() <= spec.window_ps as i64)
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; y.len()];
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut count = 0;
    for u in 0..x.len() {
        let mut seen = vec![false; y.len()];
        if augment(u, &adj, &mut seen, &mut owner) {
            count += 1;
        }
    }
    count
}

pub fn random_stream<R: Rng>(rng: &mut R, d: Detector, n: usize, span_ps: u64) -> Vec<PhotonEvent> {
    let mut t: Vec<u64> = (0..n).map(|_| rng.random_range(0..span_ps)).collect();
    t.sort_unstable();
    t.into_iter().map(|time_ps| PhotonEvent { detector: d, time_ps }).collect()
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

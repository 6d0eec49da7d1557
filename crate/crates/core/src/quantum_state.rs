//! Two-photon polarization states.
//!
//! States are density matrices over the ordered basis `|HH⟩, |HV⟩, |VH⟩, |VV⟩`
//! where the first factor is always the signal photon and the second the
//! idler. Index `2 * s + i` addresses signal polarization `s` and idler
//! polarization `i` (0 = H, 1 = V). Pure states are accepted only through
//! [`TwoPhotonState::from_pure`]; every other path works on mixed states.

use std::f64::consts::PI;

use nalgebra::Vector4;

use crate::optics::{analyzer_projector, PolarizationOperator};
use crate::{Complex, Error, Matrix2c, Matrix4c, Result};

/// Tolerance for states built directly from amplitudes or matrices.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance for states produced by transformations.
pub const TRANSFORM_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

/// Output port of the polarizing beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    Transmitted,
    Reflected,
}

impl Port {
    pub const BOTH: [Port; 2] = [Port::Transmitted, Port::Reflected];
}

/// Which photon of the pair to keep in a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Signal,
    Idler,
}

/// One polarization analyzer outcome: a half-wave plate angle followed by a
/// polarizing beamsplitter port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSetting {
    hwp_angle: f64,
    port: Port,
}

impl MeasurementSetting {
    /// `hwp_angle` in radians; it is reduced to `[0, π)`.
    pub fn new(hwp_angle: f64, port: Port) -> Self {
        let mut angle = hwp_angle.rem_euclid(PI);
        if angle >= PI {
            angle = 0.0;
        }
        MeasurementSetting {
            hwp_angle: angle,
            port,
        }
    }

    pub fn from_degrees(hwp_angle_deg: f64, port: Port) -> Self {
        Self::new(hwp_angle_deg.to_radians(), port)
    }

    pub fn hwp_angle(&self) -> f64 {
        self.hwp_angle
    }

    pub fn port(&self) -> Port {
        self.port
    }
}

/// Density matrix of a signal/idler polarization pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    matrix: Matrix4c,
}

/// Result of applying local operators that may include projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    /// Probability that the pair passes all projectors (1 for unitaries).
    pub survival: f64,
    /// Renormalized state, `None` when nothing survives.
    pub state: Option<TwoPhotonState>,
}

impl TwoPhotonState {
    /// Builds a state from a density matrix, checking Hermiticity, unit trace
    /// and positivity at [`CONSTRUCTION_TOL`].
    pub fn from_density(matrix: Matrix4c) -> Result<Self> {
        validate_density(&matrix, CONSTRUCTION_TOL)?;
        Ok(TwoPhotonState { matrix })
    }

    /// Normalized projector onto the given amplitude vector
    /// `(c_HH, c_HV, c_VH, c_VV)`.
    pub fn from_pure(amplitudes: [Complex; 4]) -> Result<Self> {
        let psi = Vector4::from(amplitudes);
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("pure state amplitudes must have a finite, nonzero norm"));
        }
        let psi = psi.unscale(norm);
        Self::from_density(psi * psi.adjoint())
    }

    /// `(|HH⟩ + e^{iα}|VV⟩)/√2`.
    pub fn bell(alpha: f64) -> Self {
        let h = Complex::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let zero = Complex::new(0.0, 0.0);
        Self::from_pure([h, zero, zero, h * Complex::from_polar(1.0, alpha)])
            .expect("Bell state is normalizable")
    }

    /// Product state of two single-photon pure polarizations.
    pub fn product(signal: [Complex; 2], idler: [Complex; 2]) -> Result<Self> {
        Self::from_pure([
            signal[0] * idler[0],
            signal[0] * idler[1],
            signal[1] * idler[0],
            signal[1] * idler[1],
        ])
    }

    /// Convex combination `Σ wₖ ρₖ`; weights are normalized.
    pub fn mixture(components: &[(f64, &TwoPhotonState)]) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.iter().any(|(w, _)| *w < 0.0) || !(total > 0.0) {
            return Err(Error::domain("mixture weights must be nonnegative with positive sum"));
        }
        let mut matrix = Matrix4c::zeros();
        for (w, state) in components {
            matrix += state.matrix.scale(*w / total);
        }
        validated(matrix)
    }

    pub fn matrix(&self) -> &Matrix4c {
        &self.matrix
    }

    /// Entry `⟨row|ρ|col⟩`.
    pub fn element(&self, row: usize, col: usize) -> Complex {
        self.matrix[(row, col)]
    }

    /// Frobenius distance between two density matrices.
    pub fn distance(&self, other: &TwoPhotonState) -> f64 {
        (self.matrix - other.matrix).norm()
    }

    /// Applies `(U_s ⊗ U_i) ρ (U_s ⊗ U_i)†`.
    ///
    /// Unitary inputs preserve the trace; when either operator is a projector
    /// the trace of the result is returned as the survival probability and the
    /// state is renormalized.
    pub fn apply_local(
        &self,
        signal: &PolarizationOperator,
        idler: &PolarizationOperator,
    ) -> Result<Transmission> {
        let transformed = self.transform_unnormalized(signal, idler);
        let survival = transformed.trace().re;
        if signal.is_unitary() && idler.is_unitary() {
            let matrix = hermitize(transformed);
            return Ok(Transmission {
                survival: 1.0,
                state: Some(validated(matrix)?),
            });
        }
        if survival <= TRANSFORM_TOL {
            return Ok(Transmission {
                survival: survival.max(0.0),
                state: None,
            });
        }
        let matrix = hermitize(transformed.unscale(survival));
        Ok(Transmission {
            survival,
            state: Some(validated(matrix)?),
        })
    }

    /// Applies unitary local operators; projectors are rejected.
    pub fn evolve(&self, signal: &PolarizationOperator, idler: &PolarizationOperator) -> Result<Self> {
        if !signal.is_unitary() || !idler.is_unitary() {
            return Err(Error::domain("evolve accepts unitary operators only"));
        }
        let t = self.apply_local(signal, idler)?;
        Ok(t.state.expect("unitary evolution preserves the trace"))
    }

    pub(crate) fn transform_unnormalized(
        &self,
        signal: &PolarizationOperator,
        idler: &PolarizationOperator,
    ) -> Matrix4c {
        let op = local_operator(signal.matrix(), idler.matrix());
        op * self.matrix * op.adjoint()
    }

    /// Reduced single-photon state of the kept subsystem.
    pub fn partial_trace(&self, keep: Subsystem) -> SinglePhotonState {
        let m = &self.matrix;
        let mut reduced = Matrix2c::zeros();
        for a in 0..2 {
            for b in 0..2 {
                reduced[(a, b)] = match keep {
                    Subsystem::Signal => m[(2 * a, 2 * b)] + m[(2 * a + 1, 2 * b + 1)],
                    Subsystem::Idler => m[(a, b)] + m[(2 + a, 2 + b)],
                };
            }
        }
        SinglePhotonState { matrix: reduced }
    }

    /// Born-rule probability `tr(ρ · P_s ⊗ P_i)` for one pair of analyzer
    /// outcomes.
    pub fn joint_probability(&self, signal: MeasurementSetting, idler: MeasurementSetting) -> f64 {
        let op = local_operator(
            analyzer_projector(signal).matrix(),
            analyzer_projector(idler).matrix(),
        );
        born(&self.matrix, &op)
    }

    /// Probabilities of the four port pairs `(s, i)` for fixed analyzer angles,
    /// ordered `TT, TR, RT, RR` (signal port first).
    pub fn port_probabilities(&self, signal_angle: f64, idler_angle: f64) -> [f64; 4] {
        port_probabilities(&self.matrix, signal_angle, idler_angle)
    }

    /// Scales the `HH`–`VV` coherences by `coherence`, leaving populations
    /// untouched.
    pub fn dephase(&self, coherence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&coherence) {
            return Err(Error::domain(format!("coherence {coherence} outside [0, 1]")));
        }
        let mut matrix = self.matrix;
        matrix[(0, 3)] *= coherence;
        matrix[(3, 0)] *= coherence;
        validated(matrix)
    }

    /// Hermiticity, unit trace and positivity at the given tolerance.
    pub fn check(&self, tol: f64) -> Result<()> {
        validate_density(&self.matrix, tol)
    }
}

/// Reduced density matrix of one photon.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhotonState {
    matrix: Matrix2c,
}

impl SinglePhotonState {
    pub fn matrix(&self) -> &Matrix2c {
        &self.matrix
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let m = &self.matrix;
        if (m - m.adjoint()).norm() > tol {
            return Err(Error::Consistency("reduced state is not Hermitian".into()));
        }
        if (m.trace().re - 1.0).abs() > tol || m.trace().im.abs() > tol {
            return Err(Error::Consistency("reduced state trace differs from 1".into()));
        }
        let eig = m.symmetric_eigenvalues();
        if eig.iter().any(|&e| e < -PSD_TOL) {
            return Err(Error::Consistency("reduced state has a negative eigenvalue".into()));
        }
        Ok(())
    }
}

/// `signal ⊗ idler` with the signal as the major index.
pub(crate) fn local_operator(signal: &Matrix2c, idler: &Matrix2c) -> Matrix4c {
    let k = signal.kronecker(idler);
    Matrix4c::from_fn(|r, c| k[(r, c)])
}

pub(crate) fn born(rho: &Matrix4c, op: &Matrix4c) -> f64 {
    (rho * op).trace().re
}

/// Port-pair probabilities of a possibly unnormalized matrix.
pub(crate) fn port_probabilities(rho: &Matrix4c, signal_angle: f64, idler_angle: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut k = 0;
    for s in Port::BOTH {
        let ps = analyzer_projector(MeasurementSetting::new(signal_angle, s));
        for i in Port::BOTH {
            let pi = analyzer_projector(MeasurementSetting::new(idler_angle, i));
            out[k] = born(rho, &local_operator(ps.matrix(), pi.matrix())).max(0.0);
            k += 1;
        }
    }
    out
}

fn hermitize(m: Matrix4c) -> Matrix4c {
    (m + m.adjoint()).scale(0.5)
}

fn validated(matrix: Matrix4c) -> Result<TwoPhotonState> {
    validate_density(&matrix, TRANSFORM_TOL)?;
    Ok(TwoPhotonState { matrix })
}

fn validate_density(m: &Matrix4c, tol: f64) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::domain("density matrix has non-finite entries"));
    }
    let asym = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > tol {
        return Err(Error::domain(format!("density matrix not Hermitian (deviation {asym:.3e})")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::domain(format!("density matrix trace {tr} differs from 1")));
    }
    let min_eig = m
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOL {
        return Err(Error::domain(format!("density matrix not positive (eigenvalue {min_eig:.3e})")));
    }
    Ok(())
}

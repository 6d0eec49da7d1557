//! Jones-calculus optical elements.
//!
//! All matrices act on one photon's polarization in the `(H, V)` basis.
//!
//! Conventions:
//!
//! * The polarizing beamsplitter transmits `V` and reflects `H`.
//! * Analyzer angles ([`MeasurementSetting`]) are read facing the source, so
//!   the analyzer plate's Jones matrix is `half_wave_plate(-angle)`. With this
//!   reading the transmitted port at 22.5° selects `|+45°⟩` and at 0° selects
//!   `|V⟩`.
//! * Mirror s/p axes are aligned with H/V.
//! * The two-prism interferometer is a single diagonal phase on the signal.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::quantum_state::{MeasurementSetting, Port};
use crate::{Complex, Error, Matrix2c, Result};

const OPERATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Unitary,
    Projector,
}

/// 2×2 polarization operator, either unitary or an orthogonal projector.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationOperator {
    matrix: Matrix2c,
    kind: OperatorKind,
}

impl PolarizationOperator {
    /// Checks `U†U = I` or `P² = P = P†` depending on `kind`.
    pub fn new(matrix: Matrix2c, kind: OperatorKind) -> Result<Self> {
        let deviation = match kind {
            OperatorKind::Unitary => (matrix.adjoint() * matrix - Matrix2c::identity()).norm(),
            OperatorKind::Projector => {
                (matrix * matrix - matrix).norm().max((matrix - matrix.adjoint()).norm())
            }
        };
        if !(deviation <= OPERATOR_TOL) {
            return Err(Error::domain(format!(
                "matrix is not a valid {kind:?} operator (deviation {deviation:.3e})"
            )));
        }
        Ok(PolarizationOperator { matrix, kind })
    }

    /// Accepts a dynamically sized matrix; anything but 2×2 is a domain error.
    pub fn from_dynamic(matrix: &DMatrix<Complex>, kind: OperatorKind) -> Result<Self> {
        if matrix.shape() != (2, 2) {
            let (r, c) = matrix.shape();
            return Err(Error::domain(format!("polarization operator must be 2x2, got {r}x{c}")));
        }
        Self::new(Matrix2c::from_fn(|r, c| matrix[(r, c)]), kind)
    }

    pub fn identity() -> Self {
        PolarizationOperator {
            matrix: Matrix2c::identity(),
            kind: OperatorKind::Unitary,
        }
    }

    pub fn matrix(&self) -> &Matrix2c {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn is_unitary(&self) -> bool {
        self.kind == OperatorKind::Unitary
    }

    /// `next · self`: apply `self` first.
    pub fn then(&self, next: &PolarizationOperator) -> Result<Self> {
        let matrix = next.matrix * self.matrix;
        match (self.kind, next.kind) {
            (OperatorKind::Unitary, OperatorKind::Unitary) => Ok(PolarizationOperator {
                matrix,
                kind: OperatorKind::Unitary,
            }),
            _ => Self::new(matrix, OperatorKind::Projector),
        }
    }

    /// Probability that a pure polarization `(c_H, c_V)` passes (projectors)
    /// or `⟨ψ|M†M|ψ⟩` in general.
    pub fn transmission(&self, psi: [Complex; 2]) -> f64 {
        let v = nalgebra::Vector2::new(psi[0], psi[1]);
        let out = self.matrix * v;
        out.norm_squared() / v.norm_squared()
    }
}

fn real(x: f64) -> Complex {
    Complex::new(x, 0.0)
}

fn diagonal(a: Complex, b: Complex) -> Matrix2c {
    Matrix2c::new(a, real(0.0), real(0.0), b)
}

/// Half-wave plate with its fast axis at `theta` radians:
/// `[[cos2θ, sin2θ], [sin2θ, −cos2θ]]`. Maps `|H⟩` to `|+45°⟩` at 22.5°.
pub fn half_wave_plate(theta: f64) -> PolarizationOperator {
    let (s, c) = (2.0 * theta).sin_cos();
    PolarizationOperator {
        matrix: Matrix2c::new(real(c), real(s), real(s), real(-c)),
        kind: OperatorKind::Unitary,
    }
}

/// Relative phase between the two interferometer paths, `diag(1, e^{iΔφ})`.
pub fn interferometer_phase(delta_phi: f64) -> PolarizationOperator {
    PolarizationOperator {
        matrix: diagonal(real(1.0), Complex::from_polar(1.0, delta_phi)),
        kind: OperatorKind::Unitary,
    }
}

/// PBS port projector: transmitted → `|V⟩⟨V|`, reflected → `|H⟩⟨H|`.
pub fn pbs_projector(port: Port) -> PolarizationOperator {
    let matrix = match port {
        Port::Transmitted => diagonal(real(0.0), real(1.0)),
        Port::Reflected => diagonal(real(1.0), real(0.0)),
    };
    PolarizationOperator {
        matrix,
        kind: OperatorKind::Projector,
    }
}

/// Projector for one analyzer outcome: `U† P_port U` with the analyzer plate
/// `U = half_wave_plate(-angle)`.
pub fn analyzer_projector(setting: MeasurementSetting) -> PolarizationOperator {
    let u = half_wave_plate(-setting.hwp_angle());
    let p = pbs_projector(setting.port());
    let matrix = u.matrix.adjoint() * p.matrix * u.matrix;
    PolarizationOperator {
        matrix: (matrix + matrix.adjoint()).scale(0.5),
        kind: OperatorKind::Projector,
    }
}

/// Mirror adding phase `delta` to the p (V) component relative to s (H).
pub fn mirror(delta: f64) -> PolarizationOperator {
    interferometer_phase(delta)
}

/// Composition of mirrors in order of traversal.
pub fn mirror_train(deltas: &[f64]) -> PolarizationOperator {
    mirror(deltas.iter().sum())
}

/// Which interferometer path a beam block obstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockedPath {
    HPath,
    VPath,
}

/// Projector onto the polarization of the unblocked path.
pub fn beam_block(path: BlockedPath) -> PolarizationOperator {
    match path {
        BlockedPath::VPath => pbs_projector(Port::Reflected),
        BlockedPath::HPath => pbs_projector(Port::Transmitted),
    }
}

/// Linear map from actuator position to interferometer phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorCalibration {
    radians_per_micron: f64,
    origin_offset: f64,
}

impl ActuatorCalibration {
    pub fn new(radians_per_micron: f64, origin_offset: f64) -> Result<Self> {
        if !(radians_per_micron > 0.0) || !radians_per_micron.is_finite() {
            return Err(Error::validation(
                "scan.radians_per_micron",
                format!("must be positive and finite, got {radians_per_micron}"),
            ));
        }
        if !origin_offset.is_finite() {
            return Err(Error::validation("scan.origin_offset_rad", "must be finite"));
        }
        Ok(ActuatorCalibration {
            radians_per_micron,
            origin_offset,
        })
    }

    pub fn radians_per_micron(&self) -> f64 {
        self.radians_per_micron
    }

    pub fn origin_offset(&self) -> f64 {
        self.origin_offset
    }

    /// Actuator travel for one full fringe.
    pub fn fringe_period_um(&self) -> f64 {
        2.0 * PI / self.radians_per_micron
    }
}

impl Default for ActuatorCalibration {
    /// One fringe per 4.4 µm, i.e. ten 0.44 µm steps.
    fn default() -> Self {
        ActuatorCalibration {
            radians_per_micron: 2.0 * PI / 4.4,
            origin_offset: 0.0,
        }
    }
}

pub fn actuator_to_phase(position_um: f64, cal: &ActuatorCalibration) -> f64 {
    cal.origin_offset + cal.radians_per_micron * position_um
}

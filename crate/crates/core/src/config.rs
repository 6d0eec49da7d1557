//! TOML bench configuration and run manifests.
//!
//! A bench file has the sections `source`, `arms.signal`, `arms.idler`,
//! `detectors.{A,Ap,B,Bp}`, `analyzers`, `coincidence` and `scan`. Only
//! `source.kind` is required; everything else falls back to the defaults
//! below. Unknown keys are rejected.
//!
//! | key | default |
//! |-----|---------|
//! | `source.coherence` | 0.73 |
//! | `source.alpha_deg` | 0 |
//! | `source.pair_rate_hz` | 20000 |
//! | `arms.*.base_path_m` | 1.0 |
//! | `arms.*.fiber_length_m` | 1.0 |
//! | `arms.*.fiber_speed_fraction` | 2/3 |
//! | `detectors.*.efficiency` | 0.30 |
//! | `detectors.*.jitter_sigma_ps` | 350 |
//! | `detectors.*.dark_rate_hz` | 100 |
//! | `analyzers.signal_hwp_deg`, `idler_hwp_deg` | 22.5 |
//! | `coincidence.window_ps` | 8000 |
//! | `scan.step_um` | 0.44 |
//! | `scan.n_steps` | 40 |
//! | `scan.dwell_s` | 5 |
//! | `scan.radians_per_micron` | 2π/4.4 |
//! | `scan.seed` | 0 |
//!
//! Pair rates, dark rates and jitter are simulation choices, not measured
//! values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coincidence::CoincidenceSpec;
use crate::event_timeline::{ArmGeometry, DetectorSpec};
use crate::experiment::{BenchConfig, ScanSchedule, SourceChoice, SourceSettings};
use crate::optics::{ActuatorCalibration, BlockedPath};
use crate::{Error, Result};

/// Manifest format understood by this version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SourceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<SourceChoice>,
    alpha_deg: Option<f64>,
    coherence: Option<f64>,
    pair_rate_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rotation_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ArmsSection {
    signal: ArmGeometry,
    idler: ArmGeometry,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DetectorsSection {
    #[serde(rename = "A")]
    a: DetectorSpec,
    #[serde(rename = "Ap")]
    a_prime: DetectorSpec,
    #[serde(rename = "B")]
    b: DetectorSpec,
    #[serde(rename = "Bp")]
    b_prime: DetectorSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AnalyzersSection {
    signal_hwp_deg: f64,
    idler_hwp_deg: f64,
    mirror_deltas_deg: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam_block: Option<BlockedPath>,
}

impl Default for AnalyzersSection {
    fn default() -> Self {
        let b = BenchConfig::default();
        AnalyzersSection {
            signal_hwp_deg: b.signal_hwp_deg,
            idler_hwp_deg: b.idler_hwp_deg,
            mirror_deltas_deg: b.mirror_deltas_deg,
            beam_block: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Compensation {
    #[serde(rename = "A")]
    a: i64,
    #[serde(rename = "Ap")]
    a_prime: i64,
    #[serde(rename = "B")]
    b: i64,
    #[serde(rename = "Bp")]
    b_prime: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CoincidenceSection {
    window_ps: u64,
    compensation_ps: Compensation,
}

impl Default for CoincidenceSection {
    fn default() -> Self {
        CoincidenceSection {
            window_ps: CoincidenceSpec::default().window_ps,
            compensation_ps: Compensation::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScanSection {
    start_um: f64,
    step_um: f64,
    n_steps: usize,
    dwell_s: f64,
    radians_per_micron: f64,
    origin_offset_rad: f64,
    seed: u64,
}

impl Default for ScanSection {
    fn default() -> Self {
        let s = ScanSchedule::default();
        let c = ActuatorCalibration::default();
        ScanSection {
            start_um: s.start_um,
            step_um: s.step_um,
            n_steps: s.n_steps,
            dwell_s: s.dwell_s,
            radians_per_micron: c.radians_per_micron(),
            origin_offset_rad: c.origin_offset(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    source: SourceSection,
    arms: ArmsSection,
    detectors: DetectorsSection,
    analyzers: AnalyzersSection,
    coincidence: CoincidenceSection,
    scan: ScanSection,
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(text: &str, err: toml::de::Error) -> Error {
    let (line, column) = err.span().map_or((0, 0), |s| line_column(text, s.start));
    Error::Parse {
        line,
        column,
        message: err.message().to_string(),
    }
}

/// Parses and validates a bench configuration.
pub fn parse_config(text: &str) -> Result<BenchConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    let kind = file
        .source
        .kind
        .ok_or_else(|| Error::validation("source.kind", "required: entangled, mixed_diagonal or mixed_hv"))?;
    let defaults = SourceSettings::new(kind);
    let src = &file.source;
    let c = &file.coincidence.compensation_ps;
    let calibration = ActuatorCalibration::new(file.scan.radians_per_micron, file.scan.origin_offset_rad)?;
    let config = BenchConfig {
        source: SourceSettings {
            choice: kind,
            alpha_deg: src.alpha_deg.unwrap_or(defaults.alpha_deg),
            coherence: src.coherence.unwrap_or(defaults.coherence),
            pair_rate_hz: src.pair_rate_hz.unwrap_or(defaults.pair_rate_hz),
            rotation_deg: src.rotation_deg,
        },
        signal_arm: file.arms.signal,
        idler_arm: file.arms.idler,
        detectors: [
            file.detectors.a,
            file.detectors.a_prime,
            file.detectors.b,
            file.detectors.b_prime,
        ],
        signal_hwp_deg: file.analyzers.signal_hwp_deg,
        idler_hwp_deg: file.analyzers.idler_hwp_deg,
        mirror_deltas_deg: file.analyzers.mirror_deltas_deg,
        beam_block: file.analyzers.beam_block,
        coincidence: CoincidenceSpec {
            window_ps: file.coincidence.window_ps,
            compensation_ps: [c.a, c.a_prime, c.b, c.b_prime],
        },
        scan: ScanSchedule {
            start_um: file.scan.start_um,
            step_um: file.scan.step_um,
            n_steps: file.scan.n_steps,
            dwell_s: file.scan.dwell_s,
        },
        calibration,
        master_seed: file.scan.seed,
    };
    config.validate()?;
    Ok(config)
}

/// Writes every field explicitly, so the output documents the full bench.
/// Seeds and delays above `i64::MAX` cannot be written as TOML integers.
pub fn serialize_config(config: &BenchConfig) -> Result<String> {
    let [ca, cap, cb, cbp] = config.coincidence.compensation_ps;
    let [da, dap, db, dbp] = config.detectors;
    let file = ConfigFile {
        source: SourceSection {
            kind: Some(config.source.choice),
            alpha_deg: Some(config.source.alpha_deg),
            coherence: Some(config.source.coherence),
            pair_rate_hz: Some(config.source.pair_rate_hz),
            rotation_deg: config.source.rotation_deg,
        },
        arms: ArmsSection {
            signal: config.signal_arm,
            idler: config.idler_arm,
        },
        detectors: DetectorsSection {
            a: da,
            a_prime: dap,
            b: db,
            b_prime: dbp,
        },
        analyzers: AnalyzersSection {
            signal_hwp_deg: config.signal_hwp_deg,
            idler_hwp_deg: config.idler_hwp_deg,
            mirror_deltas_deg: config.mirror_deltas_deg.clone(),
            beam_block: config.beam_block,
        },
        coincidence: CoincidenceSection {
            window_ps: config.coincidence.window_ps,
            compensation_ps: Compensation {
                a: ca,
                a_prime: cap,
                b: cb,
                b_prime: cbp,
            },
        },
        scan: ScanSection {
            start_um: config.scan.start_um,
            step_um: config.scan.step_um,
            n_steps: config.scan.n_steps,
            dwell_s: config.scan.dwell_s,
            radians_per_micron: config.calibration.radians_per_micron(),
            origin_offset_rad: config.calibration.origin_offset(),
            seed: config.master_seed,
        },
    };
    toml::to_string(&file).map_err(|e| Error::validation("config", e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fringe,
    DelayCompare,
    Chsh,
    BeamBlock,
    Rotation,
    Overshoot,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Fringe => "fringe",
            ExperimentKind::DelayCompare => "delay_compare",
            ExperimentKind::Chsh => "chsh",
            ExperimentKind::BeamBlock => "beam_block",
            ExperimentKind::Rotation => "rotation",
            ExperimentKind::Overshoot => "overshoot",
        }
    }
}

fn default_rotation_angles() -> Vec<f64> {
    vec![0.0, 10.0, 20.0, 30.0]
}

fn default_overshoot() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One batch run: which experiment, on which bench, written where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub experiment: ExperimentKind,
    /// Bench file; relative paths are resolved against the manifest's directory.
    pub config_path: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Overrides `scan.seed` of the bench file when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    /// Joint rotation angles for `rotation`, degrees.
    #[serde(default = "default_rotation_angles")]
    pub rotation_angles_deg: Vec<f64>,
    /// Idler plate error for `overshoot`, degrees.
    #[serde(default = "default_overshoot")]
    pub overshoot_deg: f64,
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: RunManifest = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::validation(
                "format_version",
                format!("unsupported version {} (expected {FORMAT_VERSION})", m.format_version),
            ));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut m = Self::parse(&std::fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            if m.config_path.is_relative() {
                m.config_path = dir.join(&m.config_path);
            }
            if m.output_dir.is_relative() {
                m.output_dir = dir.join(&m.output_dir);
            }
        }
        Ok(m)
    }
}

pub fn load_config(path: &Path) -> Result<BenchConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

//! Named experiments on a bench configuration.
//!
//! Every experiment is a deterministic function of its [`BenchConfig`]
//! (including `master_seed`). Scan point `k` always draws from
//! `derive_seed(master_seed, k)`, so points can run in parallel and in any
//! order without changing the output.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{distinguishability, fit_fringe_with_period, fringe_points, CountColumn, FringeFit};
use crate::coincidence::{count_table, CoincidenceSpec, CountTable};
use crate::event_timeline::{run_interval, ArmGeometry, Detector, DetectorSpec};
use crate::optics::{actuator_to_phase, ActuatorCalibration, BlockedPath};
use crate::photon_source::{joint_hwp_rotation, prepare_state, SourceKind};
use crate::quantum_state::{Port, TwoPhotonState};
use crate::seeding::derive_seed;
use crate::{Error, Result};

/// Analyzer angle that maps the HV basis onto ±45°.
pub const ERASURE_HWP_DEG: f64 = 22.5;
/// Analyzer angle that measures in the HV (which-way) basis.
pub const WHICH_WAY_HWP_DEG: f64 = 0.0;
/// Idler collection loss caused by beam spreading along the mirror detour.
pub const DETOUR_COLLECTION_EFFICIENCY: f64 = 1.0 / 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceChoice {
    Entangled,
    MixedDiagonal,
    MixedHv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSettings {
    pub choice: SourceChoice,
    /// Relative phase of the `VV` component, degrees (entangled only).
    pub alpha_deg: f64,
    /// HH–VV coherence (entangled only).
    pub coherence: f64,
    pub pair_rate_hz: f64,
    /// Joint half-wave-plate rotation right after the crystal, degrees.
    pub rotation_deg: Option<f64>,
}

impl SourceSettings {
    pub fn new(choice: SourceChoice) -> Self {
        SourceSettings {
            choice,
            alpha_deg: 0.0,
            coherence: 0.73,
            pair_rate_hz: 20_000.0,
            rotation_deg: None,
        }
    }

    pub fn kind(&self) -> SourceKind {
        match self.choice {
            SourceChoice::Entangled => SourceKind::Entangled {
                alpha: self.alpha_deg.to_radians(),
                coherence: self.coherence,
            },
            SourceChoice::MixedDiagonal => SourceKind::MixedDiagonal,
            SourceChoice::MixedHv => SourceKind::MixedHv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSchedule {
    pub start_um: f64,
    pub step_um: f64,
    pub n_steps: usize,
    pub dwell_s: f64,
}

impl Default for ScanSchedule {
    fn default() -> Self {
        ScanSchedule {
            start_um: 0.0,
            step_um: 0.44,
            n_steps: 40,
            dwell_s: 5.0,
        }
    }
}

impl ScanSchedule {
    pub fn position(&self, step: usize) -> f64 {
        self.start_um + step as f64 * self.step_um
    }
}

/// Complete description of one experimental arrangement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub source: SourceSettings,
    pub signal_arm: ArmGeometry,
    pub idler_arm: ArmGeometry,
    /// Indexed by [`Detector::index`]: `A, A', B, B'`.
    pub detectors: [DetectorSpec; 4],
    pub signal_hwp_deg: f64,
    pub idler_hwp_deg: f64,
    /// s–p phase of each mirror in the idler detour, degrees.
    pub mirror_deltas_deg: Vec<f64>,
    pub beam_block: Option<BlockedPath>,
    pub coincidence: CoincidenceSpec,
    pub scan: ScanSchedule,
    pub calibration: ActuatorCalibration,
    pub master_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self::new(SourceChoice::Entangled)
    }
}

impl BenchConfig {
    /// Erasure arrangement with default hardware parameters.
    pub fn new(choice: SourceChoice) -> Self {
        BenchConfig {
            source: SourceSettings::new(choice),
            signal_arm: ArmGeometry::default(),
            idler_arm: ArmGeometry::default(),
            detectors: [DetectorSpec::default(); 4],
            signal_hwp_deg: ERASURE_HWP_DEG,
            idler_hwp_deg: ERASURE_HWP_DEG,
            mirror_deltas_deg: Vec::new(),
            beam_block: None,
            coincidence: CoincidenceSpec::default(),
            scan: ScanSchedule::default(),
            calibration: ActuatorCalibration::default(),
            master_seed: 0,
        }
    }

    pub fn with_analyzers(mut self, signal_deg: f64, idler_deg: f64) -> Self {
        self.signal_hwp_deg = signal_deg;
        self.idler_hwp_deg = idler_deg;
        self
    }

    pub fn erasure(self) -> Self {
        self.with_analyzers(ERASURE_HWP_DEG, ERASURE_HWP_DEG)
    }

    pub fn which_way(self) -> Self {
        self.with_analyzers(ERASURE_HWP_DEG, WHICH_WAY_HWP_DEG)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        if !(s.pair_rate_hz >= 0.0) || !s.pair_rate_hz.is_finite() {
            return Err(Error::validation("source.pair_rate_hz", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&s.coherence) {
            return Err(Error::validation("source.coherence", "must lie in [0, 1]"));
        }
        if !s.alpha_deg.is_finite() {
            return Err(Error::validation("source.alpha_deg", "must be finite"));
        }
        if let Some(r) = s.rotation_deg {
            if !r.is_finite() {
                return Err(Error::validation("source.rotation_deg", "must be finite"));
            }
        }
        self.signal_arm.validate("arms.signal")?;
        self.idler_arm.validate("arms.idler")?;
        for d in Detector::ALL {
            self.detectors[d.index()].validate(&format!("detectors.{}", d.label()))?;
        }
        for (name, v) in [
            ("analyzers.signal_hwp_deg", self.signal_hwp_deg),
            ("analyzers.idler_hwp_deg", self.idler_hwp_deg),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(name, "must be finite"));
            }
        }
        if self.mirror_deltas_deg.iter().any(|d| !d.is_finite()) {
            return Err(Error::validation("analyzers.mirror_deltas_deg", "must be finite"));
        }
        self.coincidence.validate()?;
        let sc = &self.scan;
        if sc.n_steps < 1 {
            return Err(Error::validation("scan.n_steps", "must be >= 1"));
        }
        if !(sc.dwell_s > 0.0) || !sc.dwell_s.is_finite() {
            return Err(Error::validation("scan.dwell_s", "must be > 0"));
        }
        if sc.step_um == 0.0 || !sc.step_um.is_finite() {
            return Err(Error::validation("scan.step_um", "must be nonzero and finite"));
        }
        if !sc.start_um.is_finite() {
            return Err(Error::validation("scan.start_um", "must be finite"));
        }
        ActuatorCalibration::new(
            self.calibration.radians_per_micron(),
            self.calibration.origin_offset(),
        )?;
        Ok(())
    }

    /// Pair state leaving the source, including any joint rotation.
    pub fn source_state(&self) -> Result<TwoPhotonState> {
        let state = prepare_state(&self.source.kind())?;
        match self.source.rotation_deg {
            Some(deg) => joint_hwp_rotation(&state, deg.to_radians()),
            None => Ok(state),
        }
    }

    pub fn fringe_period_um(&self) -> f64 {
        self.calibration.fringe_period_um()
    }
}

/// One actuator position of a fringe scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub actuator_um: f64,
    pub delta_phi_rad: f64,
    pub counts: CountTable,
}

/// Sampled `(signal, idler)` ports of one interval in emission order; `None`
/// marks an absorbed pair.
pub type PortPairs = Vec<Option<(Port, Port)>>;

/// Scan rows plus the sampled port pairs of every point (emission order).
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTrace {
    pub rows: Vec<ScanRow>,
    pub outcomes: Vec<PortPairs>,
}

fn scan_point(config: &BenchConfig, state: &TwoPhotonState, step: usize) -> Result<(ScanRow, PortPairs)> {
    let x = config.scan.position(step);
    let dphi = actuator_to_phase(x, &config.calibration);
    let dwell = config.scan.dwell_s;
    let record = run_interval(state, config, dphi, dwell, derive_seed(config.master_seed, step as u64))?;
    let counts = count_table(&record.streams, &config.coincidence, dwell)?;
    Ok((
        ScanRow {
            actuator_um: x,
            delta_phi_rad: dphi,
            counts,
        },
        record.outcomes,
    ))
}

pub fn run_fringe_scan(config: &BenchConfig) -> Result<Vec<ScanRow>> {
    config.validate()?;
    let state = config.source_state()?;
    (0..config.scan.n_steps)
        .into_par_iter()
        .map(|k| scan_point(config, &state, k).map(|(row, _)| row))
        .collect()
}

/// Like [`run_fringe_scan`] but keeps the sampled port pairs.
pub fn run_fringe_scan_traced(config: &BenchConfig) -> Result<ScanTrace> {
    config.validate()?;
    let state = config.source_state()?;
    let points: Vec<_> = (0..config.scan.n_steps)
        .into_par_iter()
        .map(|k| scan_point(config, &state, k))
        .collect::<Result<_>>()?;
    let (rows, outcomes) = points.into_iter().unzip();
    Ok(ScanTrace { rows, outcomes })
}

/// Fixed-period fit of one count column, using the calibration's period.
pub fn fit_scan(config: &BenchConfig, rows: &[ScanRow], column: CountColumn) -> Result<FringeFit> {
    fit_fringe_with_period(&fringe_points(rows, column), config.fringe_period_um())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    None,
    /// 2.0 m mirror detour in the idler arm before the analyzer.
    FreeSpace2m,
    /// 5.0 m idler fiber instead of 1.0 m.
    Fiber5m,
}

impl DelayMode {
    pub const ALL: [DelayMode; 3] = [DelayMode::None, DelayMode::FreeSpace2m, DelayMode::Fiber5m];

    pub fn label(self) -> &'static str {
        match self {
            DelayMode::None => "none",
            DelayMode::FreeSpace2m => "free_space_2m",
            DelayMode::Fiber5m => "fiber_5m",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayOptions {
    /// Lengthen the signal detectors' cables by the added idler delay.
    pub compensate: bool,
    /// Apply the detour's idler collection loss.
    pub beam_spread_loss: bool,
}

impl Default for DelayOptions {
    fn default() -> Self {
        DelayOptions {
            compensate: true,
            beam_spread_loss: true,
        }
    }
}

/// Bench with the delay stage in place. Returns the config and the added
/// idler delay in picoseconds.
pub fn configure_delay(base: &BenchConfig, mode: DelayMode, opts: DelayOptions) -> (BenchConfig, u64) {
    let mut cfg = base.clone();
    match mode {
        DelayMode::None => {}
        DelayMode::FreeSpace2m => {
            cfg.idler_arm.extra_free_space_m += 2.0;
            if opts.beam_spread_loss {
                cfg.idler_arm.collection_efficiency *= DETOUR_COLLECTION_EFFICIENCY;
            }
        }
        DelayMode::Fiber5m => cfg.idler_arm.fiber_length_m = 5.0,
    }
    let added = (cfg.idler_arm.optical_delay_ps() - base.idler_arm.optical_delay_ps())
        .round()
        .max(0.0) as u64;
    if opts.compensate {
        cfg.signal_arm.electrical_delay_ps += added;
    }
    (cfg, added)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayComparison {
    pub mode: DelayMode,
    pub added_delay_ps: u64,
    pub baseline: ScanTrace,
    pub delayed: ScanTrace,
}

/// Runs the undelayed scan and the same scan with `mode` in place, both from
/// the same master seed.
pub fn run_delay_comparison(config: &BenchConfig, mode: DelayMode) -> Result<DelayComparison> {
    run_delay_comparison_with(config, mode, DelayOptions::default())
}

pub fn run_delay_comparison_with(
    config: &BenchConfig,
    mode: DelayMode,
    opts: DelayOptions,
) -> Result<DelayComparison> {
    let (delayed_cfg, added) = configure_delay(config, mode, opts);
    Ok(DelayComparison {
        mode,
        added_delay_ps: added,
        baseline: run_fringe_scan_traced(config)?,
        delayed: run_fringe_scan_traced(&delayed_cfg)?,
    })
}

/// Polarization-analysis angles (degrees) for the CHSH test: `a` on the
/// idler, `b` on the signal. Analyzer plates sit at half these angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshAngles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Default for ChshAngles {
    fn default() -> Self {
        ChshAngles {
            a: -45.0,
            a_prime: 0.0,
            b: -22.5,
            b_prime: 22.5,
        }
    }
}

impl ChshAngles {
    /// Setting pairs in the order `(a,b), (a,b'), (a',b), (a',b')`.
    pub fn settings(&self) -> [(f64, f64); 4] {
        [
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshResult {
    pub s: f64,
    pub sigma_s: f64,
    /// `E(a,b), E(a,b'), E(a',b), E(a',b')`.
    pub correlations: [f64; 4],
    pub correlation_sigmas: [f64; 4],
    pub tables: [CountTable; 4],
}

/// `E = (N_AB + N_A'B' − N_AB' − N_A'B) / N` and its Poisson standard error.
pub fn correlation(t: &CountTable) -> Result<(f64, f64)> {
    let same = (t.n_ab + t.n_apbp) as f64;
    let diff = (t.n_abp + t.n_apb) as f64;
    let n = same + diff;
    if n == 0.0 {
        return Err(Error::InsufficientStatistics("no coincidences for a CHSH setting".into()));
    }
    let e = (same - diff) / n;
    Ok((e, (4.0 * same * diff / (n * n * n)).sqrt()))
}

pub fn run_chsh(config: &BenchConfig) -> Result<ChshResult> {
    run_chsh_with(config, ChshAngles::default())
}

pub fn run_chsh_with(config: &BenchConfig, angles: ChshAngles) -> Result<ChshResult> {
    config.validate()?;
    let state = config.source_state()?;
    let dwell = config.scan.dwell_s;
    let dphi = actuator_to_phase(config.scan.start_um, &config.calibration);
    let tables: Vec<CountTable> = angles
        .settings()
        .into_par_iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let cfg = config.clone().with_analyzers(b / 2.0, a / 2.0);
            let rec = run_interval(&state, &cfg, dphi, dwell, derive_seed(config.master_seed, k as u64))?;
            count_table(&rec.streams, &cfg.coincidence, dwell)
        })
        .collect::<Result<_>>()?;
    let mut correlations = [0.0; 4];
    let mut sigmas = [0.0; 4];
    for (k, t) in tables.iter().enumerate() {
        (correlations[k], sigmas[k]) = correlation(t)?;
    }
    let s = correlations[0] - correlations[1] + correlations[2] + correlations[3];
    let sigma_s = sigmas.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(ChshResult {
        s,
        sigma_s,
        correlations,
        correlation_sigmas: sigmas,
        tables: tables.try_into().expect("four settings"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamBlockResult {
    pub n_hh_blocked: u64,
    pub n_hh_unblocked: u64,
}

impl BeamBlockResult {
    pub fn ratio(&self) -> Result<f64> {
        if self.n_hh_unblocked == 0 {
            return Err(Error::InsufficientStatistics("no unblocked N_HH coincidences".into()));
        }
        Ok(self.n_hh_blocked as f64 / self.n_hh_unblocked as f64)
    }

    /// Binomial-style standard error of the ratio from the two Poisson counts.
    pub fn ratio_sigma(&self) -> Result<f64> {
        let r = self.ratio()?;
        let (b, u) = (self.n_hh_blocked as f64, self.n_hh_unblocked as f64);
        let rel = if b > 0.0 { 1.0 / b + 1.0 / u } else { 1.0 / u };
        Ok(r.max(1.0 / u) * rel.sqrt())
    }
}

/// N_HH with and without a block on the signal's V path, both analyzers in
/// the HV basis, matched seeds. With the PBS transmitting V, `HH` is the
/// `(A', B')` coincidence.
pub fn run_beam_block(config: &BenchConfig) -> Result<BeamBlockResult> {
    let base = config.clone().with_analyzers(WHICH_WAY_HWP_DEG, WHICH_WAY_HWP_DEG);
    base.validate()?;
    let state = base.source_state()?;
    let dwell = base.scan.dwell_s;
    let dphi = actuator_to_phase(base.scan.start_um, &base.calibration);
    let seed = derive_seed(base.master_seed, 0);
    let count = |block: Option<BlockedPath>| -> Result<u64> {
        let mut cfg = base.clone();
        cfg.beam_block = block;
        let rec = run_interval(&state, &cfg, dphi, dwell, seed)?;
        Ok(count_table(&rec.streams, &cfg.coincidence, dwell)?.n_apbp)
    };
    Ok(BeamBlockResult {
        n_hh_blocked: count(Some(BlockedPath::VPath))?,
        n_hh_unblocked: count(None)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationSummary {
    pub angle_deg: f64,
    pub erasure: Vec<ScanRow>,
    pub which_way: Vec<ScanRow>,
    /// Fixed-period fits of `n_AB`.
    pub erasure_fit: FringeFit,
    pub which_way_fit: FringeFit,
}

/// Erasure and which-way scans with both photons rotated by identical
/// half-wave plates after the source. Each angle uses its own seed family
/// `derive_seed(master_seed, 1_000_000 + j)`.
pub fn run_rotation_invariance(config: &BenchConfig, angles_deg: &[f64]) -> Result<Vec<RotationSummary>> {
    angles_deg
        .iter()
        .enumerate()
        .map(|(j, &angle)| {
            let mut cfg = config.clone();
            cfg.source.rotation_deg = Some(angle);
            cfg.master_seed = derive_seed(config.master_seed, 1_000_000 + j as u64);
            let erasure_cfg = cfg.clone().erasure();
            let which_cfg = cfg.which_way();
            let erasure = run_fringe_scan(&erasure_cfg)?;
            let which_way = run_fringe_scan(&which_cfg)?;
            Ok(RotationSummary {
                angle_deg: angle,
                erasure_fit: fit_scan(&erasure_cfg, &erasure, CountColumn::Ab)?,
                which_way_fit: fit_scan(&which_cfg, &which_way, CountColumn::Ab)?,
                erasure,
                which_way,
            })
        })
        .collect()
}

/// Largest wave-plate error accepted by [`run_overshoot_study`], degrees.
pub const MAX_OVERSHOOT_DEG: f64 = 5.0;

/// Which-way scan with the idler plate rotated `epsilon_deg` past 0° while
/// coming from the erasure setting, i.e. sitting at `−epsilon_deg`.
pub fn run_overshoot_study(config: &BenchConfig, epsilon_deg: f64) -> Result<Vec<ScanRow>> {
    if !(epsilon_deg.abs() < MAX_OVERSHOOT_DEG) {
        return Err(Error::domain(format!(
            "overshoot {epsilon_deg}° outside ±{MAX_OVERSHOOT_DEG}°"
        )));
    }
    let cfg = config
        .clone()
        .with_analyzers(ERASURE_HWP_DEG, WHICH_WAY_HWP_DEG - epsilon_deg);
    run_fringe_scan(&cfg)
}

/// Expected `n_AB` fringe visibility for the bench's state and analyzers,
/// from the exact joint probabilities over one period.
pub fn predicted_visibility(config: &BenchConfig) -> Result<f64> {
    let state = config.source_state()?;
    let mirrors: Vec<f64> = config.mirror_deltas_deg.iter().map(|d| d.to_radians()).collect();
    let (mut max, mut min) = (f64::MIN, f64::MAX);
    for k in 0..720 {
        let dphi = k as f64 * PI / 360.0;
        let rho = state.evolve(
            &crate::optics::interferometer_phase(dphi),
            &crate::optics::mirror_train(&mirrors),
        )?;
        let p = rho.port_probabilities(config.signal_hwp_deg.to_radians(), config.idler_hwp_deg.to_radians())[0];
        max = max.max(p);
        min = min.min(p);
    }
    Ok(if max + min > 0.0 { (max - min) / (max + min) } else { 0.0 })
}

/// Paired path-distinguishability and visibility at one idler setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complementarity {
    pub idler_hwp_deg: f64,
    pub distinguishability: f64,
    pub distinguishability_sigma: f64,
    pub visibility: f64,
    pub visibility_sigma: f64,
}

impl Complementarity {
    /// `D² + V²` and its propagated standard error.
    pub fn sum_of_squares(&self) -> (f64, f64) {
        let (d, v) = (self.distinguishability, self.visibility);
        let sigma = ((2.0 * d * self.distinguishability_sigma).powi(2)
            + (2.0 * v * self.visibility_sigma).powi(2))
        .sqrt();
        (d * d + v * v, sigma)
    }
}

/// Measures `D` with the signal analyzer in the path basis and `V` from an
/// `n_AB` fringe scan with the signal analyzer at 22.5°, both with the idler
/// plate at `idler_hwp_deg`. The two runs use different seed families.
pub fn run_complementarity(config: &BenchConfig, idler_hwp_deg: f64) -> Result<Complementarity> {
    let mut path_cfg = config.clone().with_analyzers(WHICH_WAY_HWP_DEG, idler_hwp_deg);
    path_cfg.master_seed = derive_seed(config.master_seed, 2_000_000);
    let fringe_cfg = config.clone().with_analyzers(ERASURE_HWP_DEG, idler_hwp_deg);
    let path_rows = run_fringe_scan(&path_cfg)?;
    let mut total = CountTable::default();
    for r in &path_rows {
        total.n_ab += r.counts.n_ab;
        total.n_apb += r.counts.n_apb;
    }
    let d = distinguishability(&total)?;
    let n = (total.n_ab + total.n_apb) as f64;
    let fit = fit_scan(&fringe_cfg, &run_fringe_scan(&fringe_cfg)?, CountColumn::Ab)?;
    Ok(Complementarity {
        idler_hwp_deg,
        distinguishability: d,
        distinguishability_sigma: ((1.0 - d * d).max(0.0) / n).sqrt(),
        visibility: fit.visibility,
        visibility_sigma: fit.visibility_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(choice: SourceChoice) -> BenchConfig {
        let mut cfg = BenchConfig::new(choice);
        cfg.scan.n_steps = 10;
        cfg.scan.dwell_s = 0.5;
        cfg.master_seed = 5;
        cfg
    }

    #[test]
    fn scans_are_deterministic() {
        let cfg = small(SourceChoice::Entangled);
        assert_eq!(run_fringe_scan(&cfg).unwrap(), run_fringe_scan(&cfg).unwrap());
        let mut other = cfg.clone();
        other.master_seed = 6;
        assert_ne!(run_fringe_scan(&cfg).unwrap(), run_fringe_scan(&other).unwrap());
    }

    #[test]
    fn scan_positions_follow_schedule() {
        let cfg = small(SourceChoice::Entangled);
        let rows = run_fringe_scan(&cfg).unwrap();
        for (k, r) in rows.iter().enumerate() {
            assert!((r.actuator_um - 0.44 * k as f64).abs() < 1e-12);
            assert!((r.delta_phi_rad - actuator_to_phase(r.actuator_um, &cfg.calibration)).abs() < 1e-12);
            for (idler, signal) in [
                (Detector::A, Detector::B),
                (Detector::APrime, Detector::B),
                (Detector::A, Detector::BPrime),
                (Detector::APrime, Detector::BPrime),
            ] {
                let n = r.counts.coincidences(idler, signal);
                assert!(n <= r.counts.singles(idler).min(r.counts.singles(signal)));
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small(SourceChoice::Entangled);
        cfg.scan.n_steps = 0;
        assert!(run_fringe_scan(&cfg).is_err());
        let mut cfg = small(SourceChoice::Entangled);
        cfg.scan.step_um = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Validation { field, .. }) if field == "scan.step_um"));
        let mut cfg = small(SourceChoice::Entangled);
        cfg.scan.dwell_s = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn delay_configuration() {
        let base = BenchConfig::default();
        let (cfg, added) = configure_delay(&base, DelayMode::FreeSpace2m, DelayOptions::default());
        assert_eq!(added, 6671);
        assert_eq!(cfg.signal_arm.electrical_delay_ps, 6671);
        assert!((cfg.idler_arm.collection_efficiency - 1.0 / 7.0).abs() < 1e-15);
        let (cfg, added) = configure_delay(
            &base,
            DelayMode::Fiber5m,
            DelayOptions {
                compensate: false,
                beam_spread_loss: true,
            },
        );
        assert_eq!(added, 20014);
        assert_eq!(cfg.signal_arm.electrical_delay_ps, 0);
        assert_eq!(cfg.idler_arm.collection_efficiency, 1.0);
        let (cfg, added) = configure_delay(&base, DelayMode::None, DelayOptions::default());
        assert_eq!(added, 0);
        assert_eq!(cfg, base);
    }

    #[test]
    fn correlation_of_perfect_tables() {
        let t = CountTable {
            n_ab: 10,
            n_apbp: 10,
            ..Default::default()
        };
        assert_eq!(correlation(&t).unwrap(), (1.0, 0.0));
        assert!(matches!(
            correlation(&CountTable::default()),
            Err(Error::InsufficientStatistics(_))
        ));
    }

    #[test]
    fn overshoot_limit() {
        let cfg = small(SourceChoice::Entangled);
        assert!(run_overshoot_study(&cfg, 6.0).is_err());
        assert!(run_overshoot_study(&cfg, 1.0).is_ok());
    }

    #[test]
    fn predicted_visibilities() {
        let cfg = BenchConfig::default();
        assert!((predicted_visibility(&cfg).unwrap() - 0.73).abs() < 1e-9);
        assert!(predicted_visibility(&cfg.clone().which_way()).unwrap() < 1e-9);
    }
}

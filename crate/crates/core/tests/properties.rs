mod common;

use std::f64::consts::PI;

use eraser_core::analysis::{fit_fringe, fit_fringe_with_period};
use eraser_core::coincidence::{count_pairs, CoincidenceSpec};
use eraser_core::config::{parse_config, serialize_config};
use eraser_core::event_timeline::{Detector, PortSampler};
use eraser_core::experiment::{BenchConfig, ScanRow, SourceChoice};
use eraser_core::coincidence::CountTable;
use eraser_core::io::{parse_scan_csv, scan_csv};
use eraser_core::optics::{half_wave_plate, interferometer_phase, mirror_train, PolarizationOperator};
use eraser_core::photon_source::{emit_pairs, SourceKind, SourceSpec};
use eraser_core::quantum_state::{MeasurementSetting, Port, Subsystem, TwoPhotonState, PSD_TOL};
use eraser_core::seeding::rng_from_seed;
use eraser_core::optics::BlockedPath;
use proptest::prelude::*;

fn any_state() -> impl Strategy<Value = TwoPhotonState> {
    any::<u64>().prop_map(|seed| common::random_state(&mut rng_from_seed(seed)))
}

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn any_unitary() -> impl Strategy<Value = PolarizationOperator> {
    (angle(), angle(), proptest::collection::vec(angle(), 0..3)).prop_map(|(t, phi, mirrors)| {
        half_wave_plate(t)
            .then(&interferometer_phase(phi))
            .unwrap()
            .then(&mirror_train(&mirrors))
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn born_rule_matches_naive_trace(rho in any_state(), s in angle(), i in angle()) {
        for ps in Port::BOTH {
            for pi in Port::BOTH {
                let (ms, mi) = (MeasurementSetting::new(s, ps), MeasurementSetting::new(i, pi));
                let fast = rho.joint_probability(ms, mi);
                let naive = common::naive_probability(&rho, ms, mi);
                prop_assert!((fast - naive).abs() < 1e-12, "{fast} vs {naive}");
            }
        }
    }

    #[test]
    fn port_probabilities_are_complete(rho in any_state(), s in angle(), i in angle()) {
        let p = rho.port_probabilities(s, i);
        prop_assert!(p.iter().all(|&x| x >= -1e-12));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_signaling(rho in any_state(), s1 in angle(), s2 in angle(), i1 in angle(), i2 in angle()) {
        // Idler marginals do not depend on the signal setting and vice versa.
        let a = rho.port_probabilities(s1, i1);
        let b = rho.port_probabilities(s2, i1);
        prop_assert!((a[0] + a[2] - b[0] - b[2]).abs() < 1e-12);
        let c = rho.port_probabilities(s1, i2);
        prop_assert!((a[0] + a[1] - c[0] - c[1]).abs() < 1e-12);
    }

    #[test]
    fn local_unitaries_preserve_states(rho in any_state(), us in any_unitary(), ui in any_unitary()) {
        let out = rho.evolve(&us, &ui).unwrap();
        prop_assert!(out.check(PSD_TOL).is_ok());
        // Unitaries on one side leave the other side's reduced state alone.
        let idler_before = rho.partial_trace(Subsystem::Idler);
        let only_signal = rho.evolve(&us, &PolarizationOperator::identity()).unwrap();
        let idler_after = only_signal.partial_trace(Subsystem::Idler);
        prop_assert!((idler_before.matrix() - idler_after.matrix()).norm() < 1e-12);
    }

    #[test]
    fn blocking_then_renormalizing_stays_physical(rho in any_state(), path in prop_oneof![Just(BlockedPath::HPath), Just(BlockedPath::VPath)]) {
        let block = eraser_core::optics::beam_block(path);
        let t = rho.apply_local(&block, &PolarizationOperator::identity()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t.survival));
        if let Some(state) = t.state {
            prop_assert!(state.check(PSD_TOL).is_ok());
        }
    }

    #[test]
    fn complementarity_sum_is_flat(v in 0.0..=1.0f64, alpha in angle(), dphi in angle()) {
        // Summing over the idler outcome removes the fringe at erasure settings.
        let rho = TwoPhotonState::bell(alpha).dephase(v).unwrap();
        let evolved = rho.evolve(&interferometer_phase(dphi), &PolarizationOperator::identity()).unwrap();
        let p = evolved.port_probabilities(PI / 8.0, PI / 8.0);
        prop_assert!((p[0] + p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampler_is_consistent(rho in any_state(), s in angle(), i in angle(), seed in any::<u64>()) {
        let probs = rho.port_probabilities(s, i);
        let sampler = PortSampler::new(probs, true).unwrap();
        let mut rng = rng_from_seed(seed);
        for _ in 0..32 {
            let (ps, pi) = sampler.sample(&mut rng).unwrap();
            let k = 2 * (ps == Port::Reflected) as usize + (pi == Port::Reflected) as usize;
            prop_assert!(probs[k] > 0.0);
        }
    }

    #[test]
    fn greedy_pairing_is_maximum(seed in any::<u64>(), nx in 0usize..10, ny in 0usize..10, window in 1u64..30_000) {
        let mut rng = rng_from_seed(seed);
        let x = common::random_stream(&mut rng, Detector::A, nx, 80_000);
        let y = common::random_stream(&mut rng, Detector::B, ny, 80_000);
        let spec = CoincidenceSpec::new(window).unwrap();
        prop_assert_eq!(count_pairs(&x, &y, &spec).unwrap() as usize, common::max_matching(&x, &y, &spec));
    }

    #[test]
    fn fit_is_shift_and_scale_invariant(offset in 50.0..500.0f64, vis in 0.05..0.95f64, phase in angle(), shift in -20.0..20.0f64, k in 0.1..10.0f64) {
        let period = 4.4;
        let points: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let x = 0.44 * i as f64;
                (x, offset * (1.0 + vis * (2.0 * PI * x / period + phase).cos()))
            })
            .collect();
        let base = fit_fringe(&points).unwrap();
        prop_assert!((base.visibility - vis).abs() < 1e-6);
        let shifted: Vec<_> = points.iter().map(|&(x, y)| (x + shift, y)).collect();
        prop_assert!((fit_fringe(&shifted).unwrap().visibility - vis).abs() < 1e-6);
        let scaled: Vec<_> = points.iter().map(|&(x, y)| (x, k * y)).collect();
        prop_assert!((fit_fringe_with_period(&scaled, period).unwrap().visibility - vis).abs() < 1e-6);
    }
}

fn config_strategy() -> impl Strategy<Value = BenchConfig> {
    (
        prop_oneof![
            Just(SourceChoice::Entangled),
            Just(SourceChoice::MixedDiagonal),
            Just(SourceChoice::MixedHv)
        ],
        (0.0..=1.0f64, -180.0..180.0f64, 0.0..1e7f64, proptest::option::of(-90.0..90.0f64)),
        (0.0..10.0f64, 0.0..5.0f64, 0u64..1_000_000, 0.0..=1.0f64),
        (0.0..=1.0f64, 0.0..2000.0f64, 0.0..1e4f64),
        (-90.0..90.0f64, -90.0..90.0f64, proptest::collection::vec(-10.0..10.0f64, 0..4)),
        (
            proptest::option::of(prop_oneof![Just(BlockedPath::HPath), Just(BlockedPath::VPath)]),
            1u64..100_000,
            proptest::array::uniform4(-50_000i64..50_000),
        ),
        (-10.0..10.0f64, 0.01..2.0f64, 1usize..200, 0.01..60.0f64, 0.1..10.0f64, 0u64..i64::MAX as u64),
    )
        .prop_map(|(choice, src, arm, det, an, coinc, scan)| {
            let mut c = BenchConfig::new(choice);
            (c.source.coherence, c.source.alpha_deg, c.source.pair_rate_hz, c.source.rotation_deg) = src;
            c.idler_arm.fiber_length_m = arm.0;
            c.idler_arm.extra_free_space_m = arm.1;
            c.signal_arm.electrical_delay_ps = arm.2;
            c.idler_arm.collection_efficiency = arm.3;
            c.detectors[1].efficiency = det.0;
            c.detectors[2].jitter_sigma_ps = det.1;
            c.detectors[3].dark_rate_hz = det.2;
            (c.signal_hwp_deg, c.idler_hwp_deg, c.mirror_deltas_deg) = an;
            c.beam_block = coinc.0;
            c.coincidence.window_ps = coinc.1;
            c.coincidence.compensation_ps = coinc.2;
            c.scan.start_um = scan.0;
            c.scan.step_um = scan.1;
            c.scan.n_steps = scan.2;
            c.scan.dwell_s = scan.3;
            c.calibration = eraser_core::optics::ActuatorCalibration::new(scan.4, 0.25).unwrap();
            c.master_seed = scan.5;
            c
        })
}

fn row_strategy() -> impl Strategy<Value = ScanRow> {
    (
        -100.0..100.0f64,
        -1e3..1e3f64,
        proptest::array::uniform4(0u64..1_000_000),
        proptest::array::uniform4(0u64..10_000_000),
        0.001..100.0f64,
    )
        .prop_map(|(x, phi, n, singles, dwell)| ScanRow {
            actuator_um: x,
            delta_phi_rad: phi,
            counts: CountTable {
                n_ab: n[0],
                n_apb: n[1],
                n_abp: n[2],
                n_apbp: n[3],
                singles,
                interval_s: dwell,
            },
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn config_round_trip(c in config_strategy()) {
        let text = serialize_config(&c).unwrap();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serialize_config(&back).unwrap(), text);
    }

    #[test]
    fn scan_csv_round_trip(rows in proptest::collection::vec(row_strategy(), 0..20), seed in any::<u64>()) {
        let meta = vec![("seed".to_string(), seed.to_string())];
        let text = scan_csv(&meta, &rows);
        let (m, back) = parse_scan_csv(&text).unwrap();
        prop_assert_eq!(&back, &rows);
        prop_assert_eq!(scan_csv(&m, &back), text);
    }
}

#[test]
fn emission_gaps_are_exponential() {
    let rate = 1e5;
    for seed in [1, 2, 3] {
        let run = emit_pairs(
            &SourceSpec {
                kind: SourceKind::MixedHv,
                pair_rate: rate,
                duration: 1.0,
            },
            seed,
        )
        .unwrap();
        let mut gaps: Vec<f64> = run.times_ps.windows(2).map(|w| (w[1] - w[0]) as f64 * 1e-12).collect();
        let n = gaps.len();
        assert!((n as f64 - rate).abs() < 5.0 * rate.sqrt(), "{n} pairs");
        let d = common::ks_statistic(&mut gaps, |t| 1.0 - (-rate * t).exp());
        assert!(d < common::ks_critical_1pct(n), "seed {seed}: D = {d}");
    }
}

#[test]
fn emission_counts_are_poisson() {
    // Counts per 10 ms bin have variance equal to their mean.
    let run = emit_pairs(
        &SourceSpec {
            kind: SourceKind::MixedHv,
            pair_rate: 2e4,
            duration: 10.0,
        },
        77,
    )
    .unwrap();
    let mut bins = vec![0f64; 1000];
    for t in &run.times_ps {
        bins[(*t / 10_000_000_000) as usize] += 1.0;
    }
    let mean = bins.iter().sum::<f64>() / bins.len() as f64;
    let var = bins.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (bins.len() - 1) as f64;
    assert!((mean - 200.0).abs() < 2.0);
    // Sample variance of 1000 Poisson(200) bins has relative sd ≈ 0.045.
    assert!((var / mean - 1.0).abs() < 0.2, "dispersion {}", var / mean);
}

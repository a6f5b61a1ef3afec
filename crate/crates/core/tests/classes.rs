mod common;

use mimo_lab::calibration::{
    analytic_class2_2x4, analytic_class2_4x4, calibrate, relative_deviation, taps_to_frequency_response,
    uniform_grid,
};
use mimo_lab::channel::{ChannelConfig, LaneResponse, PolarizationParams};
use mimo_lab::equalizer::{
    apply_taps, real4x4_to_complex2x4, run_class, ClassLabel, ClassRun, EqualizerClass, EqualizerTaps, LmsSettings,
    Topology, TopologyKind, DEFAULT_TAPS,
};
use mimo_lab::modem::{count_symbol_errors, passband_edge};
use mimo_lab::parallel::{map_range, Exec};
use mimo_lab::{Complex64, Error};
use rand::{Rng, SeedableRng};

use common::{run, skewed};

fn train_with(label: ClassLabel, kind: TopologyKind, cfg: &ChannelConfig, symbols: usize, mu: f64) -> ClassRun {
    let (_, sim) = run(cfg, symbols);
    let top = Topology::new(kind, DEFAULT_TAPS).unwrap();
    run_class(&EqualizerClass::standard(label), top, &LmsSettings { mu, passes: 2 }, &sim).unwrap()
}

fn train(label: ClassLabel, kind: TopologyKind, cfg: &ChannelConfig, symbols: usize) -> ClassRun {
    train_with(label, kind, cfg, symbols, LmsSettings::default().mu)
}

fn pol() -> PolarizationParams {
    PolarizationParams::normalized(0.3, -0.5, 0.6, 0.2).unwrap()
}

const SKEWS: [f64; 4] = [0.4, -0.5, 0.1, -0.2];

fn class2_config(seed: u64) -> ChannelConfig {
    ChannelConfig { pol: pol(), rx_lanes: skewed(SKEWS), fo: 0.01, seed, ..Default::default() }
}

#[test]
fn class1_inverts_rx_lanes() {
    let cfg = ChannelConfig { rx_lanes: skewed(SKEWS), pol: pol(), fo: 0.03, seed: 1, ..Default::default() };
    let r = train(ClassLabel::I, TopologyKind::Real4x4, &cfg, 20_000);
    assert!(r.residual_db <= -40.0, "{}", r.residual_db);
    assert_eq!(r.alignment_lag, 16);
}

#[test]
fn class2_lane_taps_match_analytic_inverse() {
    let r = train(ClassLabel::II, TopologyKind::Real4x4, &class2_config(7), 50_000);
    assert!(r.residual_db <= -35.0, "{}", r.residual_db);
    let grid = uniform_grid(512);
    let fr = taps_to_frequency_response(&r.taps, &grid).unwrap();
    let want = analytic_class2_4x4(&pol(), &SKEWS, &grid).unwrap();
    assert!(relative_deviation(&fr, &want, passband_edge(2)).unwrap() <= 5e-2);
}

#[test]
fn class2_field_taps_match_analytic_inverse() {
    let r = train(ClassLabel::II, TopologyKind::Complex2x4, &class2_config(8), 50_000);
    assert!(r.residual_db <= -35.0, "{}", r.residual_db);
    let grid = uniform_grid(512);
    let fr = taps_to_frequency_response(&r.taps, &grid).unwrap();
    let want = analytic_class2_2x4(&pol(), &SKEWS, &grid).unwrap();
    assert!(relative_deviation(&fr, &want, passband_edge(2)).unwrap() <= 5e-2);
}

#[test]
fn class3_matches_class2() {
    let cfg = class2_config(9);
    let two = train(ClassLabel::II, TopologyKind::Real4x4, &cfg, 50_000);
    let three = train(ClassLabel::III, TopologyKind::Complex2x4, &cfg, 50_000);
    assert!(three.residual_db <= -35.0, "{}", three.residual_db);
    let grid = uniform_grid(512);
    let a = taps_to_frequency_response(&three.taps, &grid).unwrap();
    let b = taps_to_frequency_response(&real4x4_to_complex2x4(&two.taps).unwrap(), &grid).unwrap();
    assert!(relative_deviation(&a, &b, passband_edge(2)).unwrap() <= 5e-2);
}

#[test]
fn class4_recovers_symbols_through_tx_and_rx_skews() {
    let cfg = ChannelConfig {
        pol: PolarizationParams::normalized(0.7, 0.1, -0.4, 0.3).unwrap(),
        tx_lanes: skewed([0.0, 0.3, -0.2, 0.15]),
        rx_lanes: skewed([0.1, -0.25, 0.3, 0.0]),
        fo: 0.02,
        seed: 3,
        ..Default::default()
    };
    let (wave, sim) = run(&cfg, 12_000);
    let top = Topology::new(TopologyKind::WidelyLinear2x8, DEFAULT_TAPS).unwrap();
    let r = run_class(&EqualizerClass::standard(ClassLabel::IV), top, &LmsSettings::default(), &sim).unwrap();
    let k0 = r.valid.start.div_ceil(2);
    assert_eq!(count_symbol_errors(&r.output_fields().unwrap(), &wave.symbols, 2, k0..k0 + 10_000), 0);
}

#[test]
fn iq_imbalance_needs_conjugate_branches() {
    let mut rx = skewed([0.0, 0.3, 0.0, 0.0]);
    rx[0] = LaneResponse { gain: 10f64.powf(1.0 / 20.0), ..rx[0] };
    let cfg = ChannelConfig { pol: pol(), rx_lanes: rx, fo: 0.01, seed: 11, ..Default::default() };
    let linear = train(ClassLabel::II, TopologyKind::Complex2x2, &cfg, 50_000).residual_db;
    let wide = train(ClassLabel::II, TopologyKind::WidelyLinear2x4, &cfg, 50_000).residual_db;
    let real = train(ClassLabel::II, TopologyKind::Real4x4, &cfg, 50_000).residual_db;
    assert!(linear - wide >= 20.0, "{linear} vs {wide}");
    assert!(linear - real >= 20.0, "{linear} vs {real}");
}

#[test]
fn learning_curve_settles() {
    let r = train(ClassLabel::II, TopologyKind::Real4x4, &class2_config(12), 20_000);
    let curve = r.report.decimated(50);
    let tail = &curve[5..];
    for w in tail.windows(2) {
        assert!(w[1] <= 1.5 * w[0] + 1e-6, "{curve:?}");
    }
    assert!(r.report.converged);
    assert!(tail.last().unwrap() < &(0.01 * curve[0]));
}

#[test]
fn skew_estimates_do_not_depend_on_step_size() {
    let cfg = class2_config(13);
    let grid = uniform_grid(512);
    let estimates: Vec<[f64; 4]> = [5e-4, 1e-3, 2e-3]
        .iter()
        .map(|&mu| {
            let r = train_with(ClassLabel::II, TopologyKind::Real4x4, &cfg, 50_000, mu);
            calibrate(&r.taps, &grid, passband_edge(2)).unwrap().rx_skews
        })
        .collect();
    for e in &estimates {
        for i in 0..4 {
            assert!((e[i] - estimates[1][i]).abs() < 0.01, "{estimates:?}");
        }
    }
}

#[test]
fn oversized_step_reports_divergence() {
    let (_, sim) = run(&class2_config(14), 5_000);
    let top = Topology::new(TopologyKind::Real4x4, DEFAULT_TAPS).unwrap();
    let err = run_class(&EqualizerClass::standard(ClassLabel::II), top, &LmsSettings { mu: 10.0, passes: 2 }, &sim)
        .unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }));
}

#[test]
fn incompatible_class_and_topology_rejected() {
    let (_, sim) = run(&class2_config(15), 1_000);
    let top = Topology::new(TopologyKind::Real4x4, DEFAULT_TAPS).unwrap();
    let s = LmsSettings::default();
    assert!(matches!(
        run_class(&EqualizerClass::standard(ClassLabel::III), top, &s, &sim),
        Err(Error::TopologyMismatch(_))
    ));
}

#[test]
fn apply_taps_is_linear() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(16);
    let top = Topology::new(TopologyKind::WidelyLinear2x8, 9).unwrap();
    let c = |r: &mut rand_chacha::ChaCha8Rng| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    let w = (0..top.coefficient_count()).map(|_| c(&mut rng)).collect();
    let taps = EqualizerTaps::from_weights(top, w).unwrap();
    let x: Vec<Vec<Complex64>> = (0..4).map(|_| (0..300).map(|_| c(&mut rng)).collect()).collect();
    let y: Vec<Vec<Complex64>> = (0..4).map(|_| (0..300).map(|_| c(&mut rng)).collect()).collect();
    let (a, b) = (1.7, -0.4);
    let mix: Vec<Vec<Complex64>> =
        x.iter().zip(&y).map(|(u, v)| u.iter().zip(v).map(|(p, q)| p * a + q * b).collect()).collect();
    let (ox, oy, om) = (apply_taps(&taps, &x).unwrap(), apply_taps(&taps, &y).unwrap(), apply_taps(&taps, &mix).unwrap());
    for o in 0..2 {
        for t in 0..300 {
            assert!((om[o][t] - (ox[o][t] * a + oy[o][t] * b)).norm() < 1e-12);
        }
    }
}

fn calibration_config(seed: u64, snr_db: Option<f64>) -> ChannelConfig {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    ChannelConfig {
        pol: PolarizationParams::random(&mut rng),
        rx_lanes: skewed([0.0, 0.25, -0.3, 0.1]),
        fo: 0.01,
        snr_db,
        seed,
        ..Default::default()
    }
}

#[test]
fn calibration_recovers_skews_and_polarization() {
    let grid = uniform_grid(512);
    let cfg = calibration_config(17, None);
    let r = train(ClassLabel::II, TopologyKind::Real4x4, &cfg, 50_000);
    let cal = calibrate(&r.taps, &grid, passband_edge(2)).unwrap();
    for (est, want) in cal.rx_skews.iter().zip([0.0, 0.25, -0.3, 0.1]) {
        assert!((est - want).abs() <= 0.02, "{:?}", cal.rx_skews);
    }
    let p = cal.polarization.unwrap().params;
    assert!(p.dot(&cfg.pol).abs() >= 0.999);
}

#[test]
fn polarization_estimate_survives_noise() {
    let grid = uniform_grid(256);
    let worst = map_range(Exec::default(), 20, |k| {
        let cfg = calibration_config(100 + k as u64, Some(20.0));
        let r = train(ClassLabel::II, TopologyKind::Real4x4, &cfg, 20_000);
        let p = calibrate(&r.taps, &grid, passband_edge(2)).unwrap().polarization.unwrap().params;
        p.dot(&cfg.pol).abs()
    });
    assert!(worst.iter().all(|&d| d >= 0.99), "{worst:?}");
}

#[test]
fn clean_channel_calibrates_to_zero_skew() {
    let grid = uniform_grid(256);
    let cfg = ChannelConfig { seed: 18, ..Default::default() };
    let r = train(ClassLabel::II, TopologyKind::Real4x4, &cfg, 10_000);
    let cal = calibrate(&r.taps, &grid, passband_edge(2)).unwrap();
    assert!(cal.rx_skews.iter().all(|s| s.abs() <= 0.01), "{:?}", cal.rx_skews);
}

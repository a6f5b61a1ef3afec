//! Invariant suites run by the verify command.

use std::time::Instant;

use mimo_lab::calibration::{
    analytic_class2_2x4, analytic_class2_4x4, back_to_back_response, calibrate, relative_deviation,
    taps_to_frequency_response, uniform_grid, verify_inverse,
};
use mimo_lab::channel::{
    apply_cd, check_fo_pol_commutativity, make_unitary, simulate, ChannelConfig, LaneResponse, PolarizationParams,
    SimOutput,
};
use mimo_lab::equalizer::{
    apply_taps, real4x4_to_complex2x4, real4x4_to_widely_linear, run_class, ClassLabel, ClassRun, EqualizerClass,
    EqualizerTaps, LmsSettings, Topology, TopologyKind, DEFAULT_TAPS,
};
use mimo_lab::modem::{count_symbol_errors, passband_edge, qpsk_waveform, QpskWaveform};
use mimo_lab::parallel::{map_range, map_slice, Exec};
use mimo_lab::signal::{g_matrix, RealQuadSignal};
use mimo_lab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::Check;

pub const SUITES: [&str; 4] = ["algebra", "convergence", "calibration", "widely_linear"];

const DRAWS: usize = 1000;
const GRID: usize = 512;
/// Symbols per training run: 10^5 samples at 2 samples/symbol.
const SYMBOLS: usize = 50_000;
const CONVERGENCE_BUDGET_S: f64 = 120.0;

type CheckFn = fn() -> Vec<Check>;

/// Run a suite by name. Unknown names list the valid ones.
pub fn run_suite(name: &str) -> anyhow::Result<Vec<Check>> {
    let checks: &[CheckFn] = match name {
        "algebra" => &[unitary_checks, cd_commutativity, inverse_checks, projection_check],
        "convergence" => &[class2_checks, class3_check, class4_check, divergence_check],
        "calibration" => &[skew_and_polarization, noisy_polarization, step_size_invariance, zero_impairment],
        "widely_linear" => &[re_encoding_check, conjugate_dependence],
        other => anyhow::bail!("unknown suite `{other}`; valid suites: {}", SUITES.join(", ")),
    };
    let start = Instant::now();
    let mut rows: Vec<Check> = map_slice(Exec::default(), checks, |f| f()).into_iter().flatten().collect();
    if name == "convergence" {
        rows.push(Check::at_most("runtime_s", start.elapsed().as_secs_f64(), CONVERGENCE_BUDGET_S));
    }
    Ok(rows)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn worst(values: Vec<f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn unitary_checks() -> Vec<Check> {
    let pairs = map_range(Exec::default(), DRAWS, |k| {
        let mut r = rng(k as u64);
        let p = PolarizationParams::random(&mut r);
        let u = make_unitary(&p).expect("random draws are unit norm");
        let ortho = (u.transpose() * u - nalgebra::Matrix4::identity()).abs().max();
        let theta = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        (ortho, check_fo_pol_commutativity(&p, theta))
    });
    vec![
        Check::at_most("unitary_orthogonality", worst(pairs.iter().map(|p| p.0).collect()), 1e-12),
        Check::at_most("fo_polarization_commutativity", worst(pairs.iter().map(|p| p.1).collect()), 1e-12),
    ]
}

fn random_signal(r: &mut ChaCha8Rng, n: usize) -> RealQuadSignal {
    let lanes = std::array::from_fn(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect());
    RealQuadSignal::new(lanes, 1.0).expect("finite samples")
}

fn max_abs_diff(a: &RealQuadSignal, b: &RealQuadSignal) -> f64 {
    (0..4)
        .flat_map(|i| a.lane(i).iter().zip(b.lane(i)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

fn cd_commutativity() -> Vec<Check> {
    let devs = map_range(Exec::default(), DRAWS, |k| {
        let mut r = rng(10_000 + k as u64);
        let u = make_unitary(&PolarizationParams::random(&mut r)).expect("unit norm");
        let cd = r.random_range(-50.0..50.0);
        let x = random_signal(&mut r, 64);
        max_abs_diff(&apply_cd(&x.map_matrix(&u), cd), &apply_cd(&x, cd).map_matrix(&u))
    });
    vec![Check::at_most("cd_polarization_commutativity", worst(devs), 1e-10)]
}

fn random_skews(r: &mut ChaCha8Rng) -> [f64; 4] {
    std::array::from_fn(|_| r.random_range(-1.0..1.0))
}

fn inverse_checks() -> Vec<Check> {
    let grid = uniform_grid(GRID);
    let pairs = map_range(Exec::default(), DRAWS, |k| {
        let mut r = rng(20_000 + k as u64);
        let p = PolarizationParams::random(&mut r);
        let s = random_skews(&mut r);
        let fwd = back_to_back_response(&p, &s, &grid).expect("valid channel");
        let e4 = verify_inverse(&fwd, &analytic_class2_4x4(&p, &s, &grid).expect("valid")).expect("same grid");
        let e2 = verify_inverse(&fwd, &analytic_class2_2x4(&p, &s, &grid).expect("valid")).expect("same grid");
        (e4, e2)
    });
    vec![
        Check::at_most("inverse_4x4_deviation", worst(pairs.iter().map(|p| p.0).collect()), 1e-12),
        Check::at_most("inverse_2x4_deviation", worst(pairs.iter().map(|p| p.1).collect()), 1e-12),
    ]
}

fn random_real_taps(r: &mut ChaCha8Rng, taps: usize) -> EqualizerTaps {
    let top = Topology::new(TopologyKind::Real4x4, taps).expect("odd tap count");
    let w = (0..top.coefficient_count()).map(|_| Complex64::new(r.random_range(-1.0..1.0), 0.0)).collect();
    EqualizerTaps::from_weights(top, w).expect("real weights")
}

fn random_lanes(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<Complex64>> {
    (0..4).map(|_| (0..n).map(|_| Complex64::new(r.random_range(-1.0..1.0), 0.0)).collect()).collect()
}

fn projection_check() -> Vec<Check> {
    let grid = uniform_grid(64);
    let g = g_matrix();
    let analytic = map_range(Exec::default(), DRAWS, |k| {
        let mut r = rng(30_000 + k as u64);
        let p = PolarizationParams::random(&mut r);
        let s = random_skews(&mut r);
        let four = analytic_class2_4x4(&p, &s, &grid).expect("valid");
        let two = analytic_class2_2x4(&p, &s, &grid).expect("valid");
        four.matrices()
            .iter()
            .zip(two.matrices())
            .map(|(a, b)| (&g * a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    });
    let outputs = map_range(Exec::default(), DRAWS, |k| {
        let mut r = rng(40_000 + k as u64);
        let taps = random_real_taps(&mut r, 7);
        let x = random_lanes(&mut r, 128);
        let y4 = apply_taps(&taps, &x).expect("shapes match");
        let y2 = apply_taps(&real4x4_to_complex2x4(&taps).expect("real_4x4"), &x).expect("shapes match");
        (0..2)
            .flat_map(|p| (0..128).map(move |t| (p, t)))
            .map(|(p, t)| (y2[p][t] - (y4[2 * p][t] + Complex64::i() * y4[2 * p + 1][t])).norm())
            .fold(0.0, f64::max)
    });
    vec![
        Check::at_most("field_projection_response", worst(analytic), 1e-12),
        Check::at_most("field_projection_output", worst(outputs), 1e-12),
    ]
}

/// Noiseless back-to-back desk scenario with Rx skews up to half a sample.
fn desk_config(seed: u64) -> ChannelConfig {
    let mut r = rng(seed);
    ChannelConfig {
        pol: PolarizationParams::random(&mut r),
        rx_lanes: [0.5, -0.5, 0.2, -0.3].map(LaneResponse::delay),
        fo: 0.01,
        seed,
        ..Default::default()
    }
}

fn simulate_qpsk(cfg: &ChannelConfig, symbols: usize) -> (QpskWaveform, SimOutput) {
    let wave = qpsk_waveform(symbols, 2, cfg.seed).expect("valid waveform");
    let sim = simulate(cfg, &wave.waveform).expect("valid channel");
    (wave, sim)
}

fn train(label: ClassLabel, kind: TopologyKind, sim: &SimOutput, mu: f64) -> mimo_lab::Result<ClassRun> {
    let top = Topology::new(kind, DEFAULT_TAPS)?;
    run_class(&EqualizerClass::standard(label), top, &LmsSettings { mu, passes: 2 }, sim)
}

const MU: f64 = 1e-3;

fn class2_checks() -> Vec<Check> {
    let cfg = desk_config(1);
    let (_, sim) = simulate_qpsk(&cfg, SYMBOLS);
    let Ok(run) = train(ClassLabel::II, TopologyKind::Real4x4, &sim, MU) else {
        return vec![Check::failed("class2_residual_db", crate::report::Comparison::AtMost, -35.0)];
    };
    let grid = uniform_grid(GRID);
    let skews = cfg.rx_lanes.map(|l| l.skew);
    let want = analytic_class2_4x4(&cfg.pol, &skews, &grid).expect("valid");
    let got = taps_to_frequency_response(&run.taps, &grid).expect("valid taps");
    vec![
        Check::at_most("class2_residual_db", run.residual_db, -35.0),
        Check::at_most(
            "class2_analytic_deviation",
            relative_deviation(&got, &want, passband_edge(2)).expect("same grid"),
            5e-2,
        ),
    ]
}

fn class3_check() -> Vec<Check> {
    let cfg = desk_config(2);
    let (_, sim) = simulate_qpsk(&cfg, SYMBOLS);
    let grid = uniform_grid(GRID);
    let runs = (
        train(ClassLabel::II, TopologyKind::Real4x4, &sim, MU),
        train(ClassLabel::III, TopologyKind::Complex2x4, &sim, MU),
    );
    let (Ok(two), Ok(three)) = runs else {
        return vec![Check::failed("class3_vs_class2_deviation", crate::report::Comparison::AtMost, 5e-2)];
    };
    let a = taps_to_frequency_response(&three.taps, &grid).expect("valid taps");
    let b = taps_to_frequency_response(&real4x4_to_complex2x4(&two.taps).expect("real_4x4"), &grid).expect("valid");
    vec![Check::at_most(
        "class3_vs_class2_deviation",
        relative_deviation(&a, &b, passband_edge(2)).expect("same grid"),
        5e-2,
    )]
}

fn class4_check() -> Vec<Check> {
    let mut cfg = desk_config(3);
    cfg.tx_lanes = [0.0, 0.3, -0.2, 0.15].map(LaneResponse::delay);
    cfg.fo = 0.02;
    let (wave, sim) = simulate_qpsk(&cfg, 12_000);
    let Ok(run) = train(ClassLabel::IV, TopologyKind::WidelyLinear2x8, &sim, MU) else {
        return vec![Check::failed("class4_symbol_errors", crate::report::Comparison::Equal, 0.0)];
    };
    let k0 = run.valid.start.div_ceil(2);
    let fields = run.output_fields().expect("two outputs");
    let errors = count_symbol_errors(&fields, &wave.symbols, 2, k0..k0 + 10_000);
    vec![Check::equal("class4_symbol_errors", errors as f64, 0.0)]
}

fn divergence_check() -> Vec<Check> {
    let (_, sim) = simulate_qpsk(&desk_config(4), 5_000);
    let diverged = matches!(
        train(ClassLabel::II, TopologyKind::Real4x4, &sim, 10.0),
        Err(mimo_lab::Error::Diverged { .. })
    );
    vec![Check::equal("divergence_at_mu_10", f64::from(u8::from(diverged)), 1.0)]
}

const CAL_SKEWS: [f64; 4] = [0.0, 0.25, -0.3, 0.1];

fn calibration_config(seed: u64, snr_db: Option<f64>) -> ChannelConfig {
    ChannelConfig {
        rx_lanes: CAL_SKEWS.map(LaneResponse::delay),
        snr_db,
        ..desk_config(seed)
    }
}

fn calibrated(cfg: &ChannelConfig, symbols: usize, mu: f64) -> Option<mimo_lab::calibration::CalibrationReport> {
    let (_, sim) = simulate_qpsk(cfg, symbols);
    let run = train(ClassLabel::II, TopologyKind::Real4x4, &sim, mu).ok()?;
    calibrate(&run.taps, &uniform_grid(GRID), passband_edge(2)).ok()
}

fn skew_and_polarization() -> Vec<Check> {
    let cfg = calibration_config(5, None);
    let Some(cal) = calibrated(&cfg, SYMBOLS, MU) else {
        return vec![Check::failed("max_skew_delta_samples", crate::report::Comparison::AtMost, 0.02)];
    };
    let delta = cal.rx_skews.iter().zip(CAL_SKEWS).map(|(e, t)| (e - t).abs()).fold(0.0, f64::max);
    let alignment = cal.polarization.map_or(0.0, |p| p.params.dot(&cfg.pol).abs());
    vec![
        Check::at_most("max_skew_delta_samples", delta, 0.02),
        Check::at_least("polarization_alignment_noiseless", alignment, 0.999),
    ]
}

fn noisy_polarization() -> Vec<Check> {
    let alignments = map_range(Exec::default(), 20, |k| {
        let cfg = calibration_config(100 + k as u64, Some(20.0));
        calibrated(&cfg, 20_000, MU)
            .and_then(|c| c.polarization)
            .map_or(0.0, |p| p.params.dot(&cfg.pol).abs())
    });
    let min = alignments.into_iter().fold(1.0, f64::min);
    vec![Check::at_least("polarization_alignment_20db_min", min, 0.99)]
}

fn step_size_invariance() -> Vec<Check> {
    let cfg = calibration_config(6, None);
    let skews: Vec<Option<[f64; 4]>> = map_slice(Exec::default(), &[5e-4, 1e-3, 2e-3], |&mu| {
        calibrated(&cfg, SYMBOLS, mu).map(|c| c.rx_skews)
    });
    let Some(skews) = skews.into_iter().collect::<Option<Vec<_>>>() else {
        return vec![Check::failed("skew_spread_over_mu", crate::report::Comparison::AtMost, 0.01)];
    };
    let spread = (0..4)
        .map(|i| {
            let v = skews.iter().map(|s| s[i]);
            v.clone().fold(f64::MIN, f64::max) - v.fold(f64::MAX, f64::min)
        })
        .fold(0.0, f64::max);
    vec![Check::at_most("skew_spread_over_mu", spread, 0.01)]
}

fn zero_impairment() -> Vec<Check> {
    let cfg = ChannelConfig { seed: 7, ..Default::default() };
    let max = calibrated(&cfg, 10_000, MU).map_or(f64::INFINITY, |c| c.rx_skews.iter().fold(0.0, |m, v| f64::max(m, v.abs())));
    vec![Check::at_most("zero_impairment_skews", max, 0.01)]
}

fn re_encoding_check() -> Vec<Check> {
    let devs = map_range(Exec::default(), DRAWS, |k| {
        let mut r = rng(50_000 + k as u64);
        let taps = random_real_taps(&mut r, 5);
        let x = random_lanes(&mut r, 64);
        let y = apply_taps(&taps, &x).expect("shapes match");
        let fields: Vec<Vec<Complex64>> =
            (0..2).map(|p| (0..64).map(|t| Complex64::new(x[2 * p][t].re, x[2 * p + 1][t].re)).collect()).collect();
        let wl = real4x4_to_widely_linear(&taps).expect("real_4x4");
        let z = apply_taps(&wl, &fields).expect("shapes match");
        (0..2)
            .flat_map(|p| (0..64).map(move |t| (p, t)))
            .map(|(p, t)| (z[p][t] - Complex64::new(y[2 * p][t].re, y[2 * p + 1][t].re)).norm())
            .fold(0.0, f64::max)
    });
    vec![Check::at_most("widely_linear_equivalence", worst(devs), 1e-12)]
}

/// 1 dB Rx gain imbalance and 0.3-sample skew on the X quadrature lane.
pub fn iq_imbalance_config(seed: u64) -> ChannelConfig {
    let mut cfg = desk_config(seed);
    cfg.rx_lanes = [0.0, 0.3, 0.0, 0.0].map(LaneResponse::delay);
    cfg.rx_lanes[0].gain = 10f64.powf(1.0 / 20.0);
    cfg
}

fn conjugate_dependence() -> Vec<Check> {
    let (_, sim) = simulate_qpsk(&iq_imbalance_config(8), SYMBOLS);
    let kinds = [TopologyKind::Complex2x2, TopologyKind::WidelyLinear2x4, TopologyKind::Real4x4];
    let res: Vec<f64> = map_slice(Exec::default(), &kinds, |&k| {
        train(ClassLabel::II, k, &sim, MU).map_or(f64::NAN, |r| r.residual_db)
    });
    vec![
        Check::at_least("strictly_linear_gap_to_widely_linear_db", res[0] - res[1], 20.0),
        Check::at_least("strictly_linear_gap_to_real_4x4_db", res[0] - res[2], 20.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_lists_valid_ones() {
        let msg = run_suite("bogus").unwrap_err().to_string();
        for s in SUITES {
            assert!(msg.contains(s), "{msg}");
        }
    }

    #[test]
    fn algebra_suite_passes() {
        let rows = run_suite("algebra").unwrap();
        assert!(rows.len() >= 6);
        assert!(rows.iter().all(|c| c.passed), "{rows:?}");
    }
}

//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::path::Path;
use std::process::ExitCode;
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
use mimo_lab::parallel::{map_range, Exec};
use mimo_lab::signal::{g_matrix, RealQuadSignal};
use mimo_lab::Complex64;
use mimo_lab_cli::{cmd_equalize, cmd_simulate, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Verdict);

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn random_signal(r: &mut ChaCha8Rng, n: usize) -> RealQuadSignal {
    RealQuadSignal::new(std::array::from_fn(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect()), 1.0).unwrap()
}

fn random_lanes(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<Complex64>> {
    (0..4).map(|_| (0..n).map(|_| Complex64::new(r.random_range(-1.0..1.0), 0.0)).collect()).collect()
}

fn random_real_taps(r: &mut ChaCha8Rng, taps: usize) -> EqualizerTaps {
    let top = Topology::new(TopologyKind::Real4x4, taps).unwrap();
    let w = (0..top.coefficient_count()).map(|_| Complex64::new(r.random_range(-1.0..1.0), 0.0)).collect();
    EqualizerTaps::from_weights(top, w).unwrap()
}

fn random_skews(r: &mut ChaCha8Rng, limit: f64) -> [f64; 4] {
    std::array::from_fn(|_| r.random_range(-limit..=limit))
}

fn unitary_and_commutativity() -> Verdict {
    let start = Instant::now();
    let rows = map_range(Exec::default(), 1000, |k| {
        let mut r = rng(k as u64);
        let p = PolarizationParams::random(&mut r);
        let u = make_unitary(&p).unwrap();
        let ortho = (u.transpose() * u - nalgebra::Matrix4::identity()).abs().max();
        let fo = check_fo_pol_commutativity(&p, r.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let cd = r.random_range(-50.0..50.0);
        let x = random_signal(&mut r, 64);
        let a = apply_cd(&x.map_matrix(&u), cd);
        let b = apply_cd(&x, cd).map_matrix(&u);
        let cdu = max((0..4).flat_map(|i| a.lane(i).iter().zip(b.lane(i)).map(|(p, q)| (p - q).abs()).collect::<Vec<_>>()));
        (ortho, fo, cdu)
    });
    let secs = start.elapsed().as_secs_f64();
    let (o, f, c) = (max(rows.iter().map(|r| r.0)), max(rows.iter().map(|r| r.1)), max(rows.iter().map(|r| r.2)));
    verdict(
        o <= 1e-12 && f <= 1e-12 && c <= 1e-10 && secs < 5.0,
        format!("orthogonality {o:.1e} <= 1e-12, FO-U {f:.1e} <= 1e-12, CD-U {c:.1e} <= 1e-10, {secs:.2} s < 5 s"),
    )
}

fn analytic_inverse() -> Verdict {
    let start = Instant::now();
    let grid = uniform_grid(512);
    let devs = map_range(Exec::default(), 1000, |k| {
        let mut r = rng(1_000_000 + k as u64);
        let p = PolarizationParams::random(&mut r);
        let s = random_skews(&mut r, 1.0);
        verify_inverse(&back_to_back_response(&p, &s, &grid).unwrap(), &analytic_class2_4x4(&p, &s, &grid).unwrap())
            .unwrap()
    });
    let secs = start.elapsed().as_secs_f64();
    let d = max(devs);
    verdict(d <= 1e-12 && secs < 10.0, format!("max deviation {d:.1e} <= 1e-12 at 512 points x 1000 draws, {secs:.2} s < 10 s"))
}

fn field_projection() -> Verdict {
    let start = Instant::now();
    let grid = uniform_grid(512);
    let g = g_matrix();
    let rows = map_range(Exec::default(), 1000, |k| {
        let mut r = rng(2_000_000 + k as u64);
        let p = PolarizationParams::random(&mut r);
        let s = random_skews(&mut r, 1.0);
        let four = analytic_class2_4x4(&p, &s, &grid).unwrap();
        let two = analytic_class2_2x4(&p, &s, &grid).unwrap();
        let resp = max(four.matrices().iter().zip(two.matrices()).map(|(a, b)| max((&g * a - b).iter().map(|z| z.norm()))));
        let taps = random_real_taps(&mut r, 7);
        let x = random_lanes(&mut r, 128);
        let y4 = apply_taps(&taps, &x).unwrap();
        let y2 = apply_taps(&real4x4_to_complex2x4(&taps).unwrap(), &x).unwrap();
        let out = max((0..2).flat_map(|p| {
            let (y4, y2) = (&y4, &y2);
            (0..128).map(move |t| (y2[p][t] - (y4[2 * p][t] + Complex64::i() * y4[2 * p + 1][t])).norm())
        }));
        (resp, out)
    });
    let secs = start.elapsed().as_secs_f64();
    let (resp, out) = (max(rows.iter().map(|r| r.0)), max(rows.iter().map(|r| r.1)));
    verdict(
        resp <= 1e-12 && out <= 1e-12 && secs < 5.0,
        format!("response {resp:.1e} <= 1e-12, output {out:.1e} <= 1e-12, {secs:.2} s < 5 s"),
    )
}

fn widely_linear_equivalence() -> Verdict {
    let devs = map_range(Exec::default(), 1000, |k| {
        let mut r = rng(3_000_000 + k as u64);
        let taps = random_real_taps(&mut r, 5);
        let x = random_lanes(&mut r, 64);
        let y = apply_taps(&taps, &x).unwrap();
        let fields: Vec<Vec<Complex64>> =
            (0..2).map(|p| (0..64).map(|t| Complex64::new(x[2 * p][t].re, x[2 * p + 1][t].re)).collect()).collect();
        let z = apply_taps(&real4x4_to_widely_linear(&taps).unwrap(), &fields).unwrap();
        max((0..2).flat_map(|p| {
            let (y, z) = (&y, &z);
            (0..64).map(move |t| (z[p][t] - Complex64::new(y[2 * p][t].re, y[2 * p + 1][t].re)).norm())
        }))
    });
    let d = max(devs);
    verdict(d <= 1e-12, format!("max output deviation {d:.1e} <= 1e-12 over 1000 trials"))
}

/// Enough symbols at 2 samples/symbol for 10^5 training samples inside the
/// edge guards.
const SYMBOLS: usize = 50_200;

fn desk(seed: u64) -> ChannelConfig {
    let mut r = rng(seed);
    ChannelConfig {
        pol: PolarizationParams::random(&mut r),
        rx_lanes: random_skews(&mut r, 0.5).map(LaneResponse::delay),
        fo: 0.01,
        seed,
        ..Default::default()
    }
}

fn simulate_qpsk(cfg: &ChannelConfig, symbols: usize) -> (QpskWaveform, SimOutput) {
    let wave = qpsk_waveform(symbols, 2, cfg.seed).unwrap();
    let sim = simulate(cfg, &wave.waveform).unwrap();
    (wave, sim)
}

fn train(label: ClassLabel, kind: TopologyKind, sim: &SimOutput) -> mimo_lab::Result<ClassRun> {
    let top = Topology::new(kind, DEFAULT_TAPS)?;
    run_class(&EqualizerClass::standard(label), top, &LmsSettings::default(), sim)
}

fn class2_convergence() -> Verdict {
    let start = Instant::now();
    let cfg = desk(11);
    let (_, sim) = simulate_qpsk(&cfg, SYMBOLS);
    let run = match train(ClassLabel::II, TopologyKind::Real4x4, &sim) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("training failed: {e}")),
    };
    let grid = uniform_grid(512);
    let skews = cfg.rx_lanes.map(|l| l.skew);
    let want = analytic_class2_4x4(&cfg.pol, &skews, &grid).unwrap();
    let got = taps_to_frequency_response(&run.taps, &grid).unwrap();
    let dev = relative_deviation(&got, &want, passband_edge(2)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let samples = run.valid.len();
    verdict(
        dev <= 5e-2 && run.residual_db <= -35.0 && secs < 60.0 && samples >= 100_000,
        format!(
            "FR deviation {dev:.2e} <= 5e-2, residual {:.1} dB <= -35 dB, {samples} training samples, {secs:.1} s < 60 s",
            run.residual_db
        ),
    )
}

fn class3_matches_class2() -> Verdict {
    let cfg = desk(12);
    let (_, sim) = simulate_qpsk(&cfg, SYMBOLS);
    let (two, three) = match (train(ClassLabel::II, TopologyKind::Real4x4, &sim), train(ClassLabel::III, TopologyKind::Complex2x4, &sim)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return verdict(false, "training failed".into()),
    };
    let grid = uniform_grid(512);
    let a = taps_to_frequency_response(&three.taps, &grid).unwrap();
    let b = taps_to_frequency_response(&real4x4_to_complex2x4(&two.taps).unwrap(), &grid).unwrap();
    let dev = relative_deviation(&a, &b, passband_edge(2)).unwrap();
    verdict(dev <= 5e-2, format!("class III vs class II FR deviation {dev:.2e} <= 5e-2"))
}

fn class4_zero_errors() -> Verdict {
    let mut r = rng(13);
    let cfg = ChannelConfig {
        pol: PolarizationParams::random(&mut r),
        tx_lanes: random_skews(&mut r, 0.5).map(LaneResponse::delay),
        rx_lanes: random_skews(&mut r, 0.5).map(LaneResponse::delay),
        fo: 0.02,
        seed: 13,
        ..Default::default()
    };
    let (wave, sim) = simulate_qpsk(&cfg, 12_000);
    let run = match train(ClassLabel::IV, TopologyKind::WidelyLinear2x8, &sim) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("training failed: {e}")),
    };
    let k0 = run.valid.start.div_ceil(2);
    let errors = count_symbol_errors(&run.output_fields().unwrap(), &wave.symbols, 2, k0..k0 + 10_000);
    verdict(errors == 0, format!("{errors} symbol errors over 10^4 symbols per polarization"))
}

fn conjugate_dependence() -> Verdict {
    let mut cfg = desk(14);
    cfg.rx_lanes = [0.0, 0.3, 0.0, 0.0].map(LaneResponse::delay);
    cfg.rx_lanes[0].gain = 10f64.powf(1.0 / 20.0);
    let (_, sim) = simulate_qpsk(&cfg, SYMBOLS);
    let res = [TopologyKind::Complex2x2, TopologyKind::WidelyLinear2x4, TopologyKind::Real4x4]
        .map(|k| train(ClassLabel::II, k, &sim).map_or(f64::NAN, |r| r.residual_db));
    let (wl, real) = (res[0] - res[1], res[0] - res[2]);
    verdict(
        wl >= 20.0 && real >= 20.0,
        format!("strictly linear {:.1} dB; gap to widely linear {wl:.1} dB, to real 4x4 {real:.1} dB (>= 20 dB)", res[0]),
    )
}

fn calibration_recovery() -> Verdict {
    let truth = [0.0, 0.25, -0.3, 0.1];
    let cfg_for = |seed: u64, snr_db: Option<f64>| ChannelConfig {
        rx_lanes: truth.map(LaneResponse::delay),
        snr_db,
        ..desk(seed)
    };
    let grid = uniform_grid(512);
    let estimate = |cfg: &ChannelConfig| {
        let (_, sim) = simulate_qpsk(cfg, SYMBOLS);
        train(ClassLabel::II, TopologyKind::Real4x4, &sim)
            .ok()
            .and_then(|run| calibrate(&run.taps, &grid, passband_edge(2)).ok())
    };
    let clean = cfg_for(15, None);
    let Some(cal) = estimate(&clean) else {
        return verdict(false, "noiseless calibration failed".into());
    };
    let skew_err = max(cal.rx_skews.iter().zip(truth).map(|(e, t)| (e - t).abs()));
    let align = cal.polarization.map_or(0.0, |p| p.params.dot(&clean.pol).abs());
    let noisy = map_range(Exec::default(), 20, |k| {
        let cfg = cfg_for(200 + k as u64, Some(20.0));
        estimate(&cfg).and_then(|c| c.polarization).map_or(0.0, |p| p.params.dot(&cfg.pol).abs())
    });
    let worst_noisy = noisy.into_iter().fold(1.0, f64::min);
    verdict(
        skew_err <= 0.02 && align >= 0.999 && worst_noisy >= 0.99,
        format!("skew error {skew_err:.2e} <= 0.02, |<p,p>| {align:.6} >= 0.999 noiseless, {worst_noisy:.6} >= 0.99 worst of 20 seeds at 20 dB"),
    )
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let text = r#"{
      "schema_version": 1,
      "seed": 77,
      "channel": {
        "polarization": {"a": 0.1, "b": 0.7, "c": -0.5, "d": 0.3},
        "tx_lanes": [{"skew_samples": 0.1}, {}, {"skew_samples": -0.2}, {}],
        "rx_lanes": [{}, {"skew_samples": 0.4, "gain_linear": 0.9}, {}, {"skew_samples": -0.1}],
        "fo_rad_per_sample": 0.005,
        "tx_linewidth_rad2_per_sample": 1e-6,
        "rx_linewidth_rad2_per_sample": 1e-6,
        "snr_db": 22
      },
      "signal": {"symbol_count": 4000},
      "equalizer": {"class": "II"}
    }"#;
    let scenario = Scenario::from_json(text).unwrap().resolve(None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut same = true;
    let mut files = 0;
    for (name, cmd) in [("simulate", cmd_simulate as fn(&Scenario, &Path) -> anyhow::Result<_>), ("equalize", cmd_equalize)] {
        let (a, b) = (dir.path().join(format!("{name}_a")), dir.path().join(format!("{name}_b")));
        for d in [&a, &b] {
            std::fs::create_dir_all(d).unwrap();
            if cmd(&scenario, d).is_err() {
                return verdict(false, format!("{name} failed"));
            }
        }
        let (ta, tb) = (tree(&a), tree(&b));
        files += ta.len();
        same &= ta == tb;
    }
    verdict(same, format!("{files} files from simulate and equalize compared byte for byte"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("unitary orthogonality and commutativity", unitary_and_commutativity),
        ("analytic inverse undoes the channel", analytic_inverse),
        ("2x4 form equals G times 4x4 form", field_projection),
        ("real 4x4 equals widely-linear re-encoding", widely_linear_equivalence),
        ("class II converges to the analytic inverse", class2_convergence),
        ("class III matches class II", class3_matches_class2),
        ("class IV full chain without symbol errors", class4_zero_errors),
        ("conjugate branches needed under IQ imbalance", conjugate_dependence),
        ("skew and polarization calibration", calibration_recovery),
        ("byte-identical reruns", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.passed);
        println!("criterion {:>2} {} {name}: {}", i + 1, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

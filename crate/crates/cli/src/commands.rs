//! The simulate, equalize and calibrate commands.

use std::path::{Path, PathBuf};

use anyhow::Context;
use mimo_lab::calibration::{
    analytic_class2_2x4, analytic_class2_4x4, calibrate, relative_deviation, taps_to_frequency_response,
    uniform_grid, FrequencyResponse,
};
use mimo_lab::channel::{simulate, ProbeName, SimOutput};
use mimo_lab::equalizer::{run_class, ClassLabel, ClassRun, EqualizerClass, EqualizerTaps, TopologyKind};
use mimo_lab::modem::{count_symbol_errors, passband_edge, qpsk_waveform, QpskWaveform};
use mimo_lab::signal::LANE_NAMES;
use mimo_lab::Error;

use crate::files::{read_taps, write_complex_lanes, write_json, write_lanes, write_taps};
use crate::report::{
    finite, AnalyticDeviation, CalibrationDocument, CalibrationSummary, Check, RunReport, SimulationMetadata,
    SymbolErrors, TrainingStatus, TrainingSummary, REPORT_SCHEMA_VERSION,
};
use crate::scenario::Scenario;
use crate::Outcome;

/// Frequency points used for tap responses and calibration.
pub const GRID_POINTS: usize = 512;
/// Largest in-band deviation of class II taps from the analytic inverse.
pub const ANALYTIC_DEVIATION_LIMIT: f64 = 5e-2;
/// Largest skew estimation error, in samples.
pub const SKEW_TOLERANCE: f64 = 0.02;
/// Smallest `|<p_est, p>|` for a noiseless polarization estimate.
pub const ALIGNMENT_MIN: f64 = 0.999;
/// Points kept in the learning-curve file.
const CURVE_POINTS: usize = 1000;

/// `--out` if given, else the scenario's output directory.
pub fn output_dir(scenario: &Scenario, out: Option<&Path>) -> anyhow::Result<PathBuf> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| scenario.output.dir.clone())
        .context("no output directory: pass --out or set output.dir in the scenario")?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn waveform(scenario: &Scenario) -> anyhow::Result<(QpskWaveform, SimOutput)> {
    let wave = qpsk_waveform(scenario.signal.symbol_count, scenario.signal.samples_per_symbol, scenario.seed)?;
    let sim = simulate(&scenario.channel_config(), &wave.waveform)?;
    Ok((wave, sim))
}

/// Simulate the scenario and write the input, every probe and a metadata
/// sidecar.
pub fn cmd_simulate(scenario: &Scenario, out: &Path) -> anyhow::Result<Outcome> {
    let (_, sim) = waveform(scenario)?;
    let mut files = vec!["input.csv".to_string()];
    write_lanes(&out.join("input.csv"), &sim.transmitted)?;
    for probe in ProbeName::ALL {
        let name = format!("{}.csv", probe.as_str());
        write_lanes(&out.join(&name), sim.probes.get(probe))?;
        files.push(name);
    }
    let meta = SimulationMetadata {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: scenario.seed,
        sample_count: sim.transmitted.len(),
        group_delay: sim.group_delay.into(),
        edge_guard_samples: sim.edge_guard,
        noise_variance_per_lane: sim.noise_variance,
        files,
        scenario: scenario.clone(),
    };
    write_json(&out.join("metadata.json"), &meta)?;
    Ok(Outcome::pass(vec![format!(
        "simulated {} samples into {} (group delay {} samples)",
        sim.transmitted.len(),
        out.display(),
        sim.group_delay.total()
    )]))
}

fn analytic_deviation(scenario: &Scenario, run: &ClassRun, band: f64) -> anyhow::Result<Option<AnalyticDeviation>> {
    let plain_rx = scenario
        .channel
        .rx_lanes
        .iter()
        .all(|l| l.gain_linear == 1.0 && l.cutoff_nyquist_fraction.is_none());
    if scenario.class() != ClassLabel::II || !plain_rx {
        return Ok(None);
    }
    let grid = uniform_grid(GRID_POINTS);
    let pol = scenario.channel_config().pol;
    let skews = scenario.channel.rx_lanes.map(|l| l.skew_samples);
    let want: FrequencyResponse = match run.taps.topology.kind {
        TopologyKind::Real4x4 => analytic_class2_4x4(&pol, &skews, &grid)?,
        TopologyKind::Complex2x4 => analytic_class2_2x4(&pol, &skews, &grid)?,
        _ => return Ok(None),
    };
    let got = taps_to_frequency_response(&run.taps, &grid)?;
    Ok(Some(AnalyticDeviation {
        relative_deviation: relative_deviation(&got, &want, band)?,
        band_rad_per_sample: band,
        grid_points: GRID_POINTS,
    }))
}

fn symbol_errors(scenario: &Scenario, run: &ClassRun, wave: &QpskWaveform) -> Option<SymbolErrors> {
    if scenario.class() != ClassLabel::IV {
        return None;
    }
    let fields = run.output_fields()?;
    let sps = wave.sps;
    let range = run.valid.start.div_ceil(sps)..run.valid.end.div_ceil(sps);
    Some(SymbolErrors {
        errors: count_symbol_errors(&fields, &wave.symbols, sps, range.clone()),
        symbols_checked: 2 * range.len(),
    })
}

fn calibratable(scenario: &Scenario, taps: &EqualizerTaps) -> bool {
    matches!(scenario.class(), ClassLabel::I | ClassLabel::II)
        && matches!(taps.topology.kind, TopologyKind::Real4x4 | TopologyKind::Complex2x4)
}

fn calibration_summary(scenario: &Scenario, taps: &EqualizerTaps) -> CalibrationSummary {
    let band = passband_edge(scenario.signal.samples_per_symbol);
    let result = calibrate(taps, &uniform_grid(GRID_POINTS), band);
    CalibrationSummary::new(scenario, band, GRID_POINTS, result)
}

/// Simulate, train the configured class and write taps, learning curve,
/// equalized output and the run report. Fails (exit 1) on divergence or a
/// failed ground-truth check; checks are only included for noiseless
/// scenarios.
pub fn cmd_equalize(scenario: &Scenario, out: &Path) -> anyhow::Result<Outcome> {
    let (wave, sim) = waveform(scenario)?;
    let class = EqualizerClass::standard(scenario.class());
    let topology = scenario.topology()?;
    let base = |training, checks: Vec<Check>| {
        let passed = checks.iter().all(|c| c.passed);
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "equalize",
            scenario: scenario.clone(),
            group_delay: sim.group_delay.into(),
            edge_guard_samples: sim.edge_guard,
            noise_variance_per_lane: sim.noise_variance,
            training,
            analytic_deviation: None,
            symbol_errors: None,
            calibration: None,
            checks,
            passed,
        }
    };

    let run = match run_class(&class, topology, &scenario.lms_settings(), &sim) {
        Ok(run) => run,
        Err(e @ Error::Diverged { iteration, .. }) => {
            let msg = e.to_string();
            let training = TrainingSummary {
                status: TrainingStatus::Diverged,
                iterations: iteration,
                final_mse: None,
                residual_db: None,
                alignment_lag_samples: None,
                valid_range: None,
                diagnostic: Some(format!("{msg}; reduce equalizer.mu")),
            };
            let mut report = base(training, Vec::new());
            report.passed = false;
            write_json(&out.join("report.json"), &report)?;
            return Ok(Outcome::fail(vec![format!("training diverged: {msg}")]));
        }
        Err(e) => return Err(e.into()),
    };

    let band = passband_edge(scenario.signal.samples_per_symbol);
    let deviation = analytic_deviation(scenario, &run, band)?;
    let errors = symbol_errors(scenario, &run, &wave);
    let calibration = calibratable(scenario, &run.taps).then(|| calibration_summary(scenario, &run.taps));

    let mut checks = Vec::new();
    if scenario.noiseless() {
        if let Some(d) = deviation {
            checks.push(Check::at_most("analytic_deviation", d.relative_deviation, ANALYTIC_DEVIATION_LIMIT));
        }
        if let Some(e) = errors {
            checks.push(Check::equal("symbol_errors", e.errors as f64, 0.0));
        }
        if let Some(c) = &calibration {
            checks.extend(c.checks(SKEW_TOLERANCE, ALIGNMENT_MIN));
        }
    }

    let training = TrainingSummary {
        status: if run.report.converged {
            TrainingStatus::Converged
        } else {
            TrainingStatus::NotConverged
        },
        iterations: run.report.iterations,
        final_mse: finite(run.report.final_mse),
        residual_db: finite(run.residual_db),
        alignment_lag_samples: Some(run.alignment_lag),
        valid_range: Some([run.valid.start, run.valid.end]),
        diagnostic: None,
    };
    let mut report = base(training, checks);
    report.analytic_deviation = deviation;
    report.symbol_errors = errors;
    report.calibration = calibration;

    write_taps(&out.join("taps.csv"), &run.taps)?;
    write_curve(&out.join("learning_curve.csv"), &run.report.decimated(CURVE_POINTS), run.report.iterations)?;
    let names: &[&str] = if run.output.len() == 4 { &LANE_NAMES } else { &["x", "y"] };
    write_complex_lanes(&out.join("equalized.csv"), names, &run.output)?;
    write_json(&out.join("report.json"), &report)?;

    let mut lines = vec![format!(
        "class {} {}: residual {} dB after {} iterations",
        scenario.class(),
        topology.kind,
        format!("{:.2}", run.residual_db),
        run.report.iterations
    )];
    lines.extend(report.checks.iter().map(Check::table_row));
    Ok(if report.passed { Outcome::pass(lines) } else { Outcome::fail(lines) })
}

fn write_curve(path: &Path, curve: &[f64], iterations: usize) -> anyhow::Result<()> {
    let block = iterations.div_ceil(curve.len().max(1)).max(1);
    let mut text = String::from("iteration,mse\n");
    for (i, v) in curve.iter().enumerate() {
        text.push_str(&format!("{},{v}\n", i * block));
    }
    crate::files::write_atomic(path, text.as_bytes())
}

/// Skew and polarization estimates from a taps file written by
/// `cmd_equalize` for the same scenario.
pub fn cmd_calibrate(scenario: &Scenario, taps_path: &Path, out: &Path) -> anyhow::Result<Outcome> {
    let topology = scenario.topology()?;
    let taps = read_taps(taps_path, topology)?.with_class(scenario.class());
    if !calibratable(scenario, &taps) {
        return Err(Error::TopologyMismatch(format!(
            "calibration needs class I or II taps in real_4x4 or complex_2x4 form, got class {} {}",
            scenario.class(),
            topology.kind
        ))
        .into());
    }
    let summary = calibration_summary(scenario, &taps);
    if let Some(e) = &summary.error {
        anyhow::bail!("calibration failed: {e}");
    }
    let checks = if scenario.noiseless() {
        summary.checks(SKEW_TOLERANCE, ALIGNMENT_MIN)
    } else {
        Vec::new()
    };
    let passed = checks.iter().all(|c| c.passed);
    let doc = CalibrationDocument {
        schema_version: REPORT_SCHEMA_VERSION,
        command: "calibrate",
        scenario: scenario.clone(),
        calibration: summary,
        checks,
        passed,
    };
    write_json(&out.join("calibration.json"), &doc)?;
    let mut lines = vec![format!("rx skews (samples, relative to xi): {:?}", doc.calibration.rx_skews_samples.unwrap_or_default())];
    if let Some(p) = &doc.calibration.polarization {
        lines.push(format!(
            "polarization (a, b, c, d) = ({:.6}, {:.6}, {:.6}, {:.6}), {}",
            p.estimate.a, p.estimate.b, p.estimate.c, p.estimate.d, p.sign_convention
        ));
    }
    lines.extend(doc.checks.iter().map(Check::table_row));
    Ok(if passed { Outcome::pass(lines) } else { Outcome::fail(lines) })
}

//! JSON report documents.

use mimo_lab::calibration::{CalibrationReport, PolarizationEstimate};
use mimo_lab::channel::PolarizationParams;
use serde::Serialize;

use crate::scenario::{PolarizationSection, Scenario};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// JSON has no infinities; non-finite values are reported as `null`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    Equal,
}

/// One pass/fail check with its measured value and threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: Option<f64>,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, comparison: Comparison, threshold: f64) -> Self {
        let passed = match comparison {
            Comparison::AtMost => measured <= threshold,
            Comparison::AtLeast => measured >= threshold,
            Comparison::Equal => measured == threshold,
        };
        Self {
            name: name.into(),
            measured: finite(measured),
            comparison,
            threshold,
            passed,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Comparison::AtMost, threshold)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Comparison::AtLeast, threshold)
    }

    pub fn equal(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Comparison::Equal, threshold)
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>, comparison: Comparison, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured: None,
            comparison,
            threshold,
            passed: false,
        }
    }

    pub fn table_row(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Equal => "==",
        };
        let measured = self.measured.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4e}"));
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{:<40} {:>12} {op} {:<11.4e} {verdict}", self.name, measured, self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupDelayReport {
    pub tx_lanes_samples: usize,
    pub rx_lanes_samples: usize,
    pub total_samples: usize,
}

impl From<mimo_lab::channel::GroupDelay> for GroupDelayReport {
    fn from(g: mimo_lab::channel::GroupDelay) -> Self {
        Self {
            tx_lanes_samples: g.tx_lanes,
            rx_lanes_samples: g.rx_lanes,
            total_samples: g.total(),
        }
    }
}

/// Sidecar written next to simulated waveforms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationMetadata {
    pub schema_version: u32,
    pub seed: u64,
    pub sample_count: usize,
    pub group_delay: GroupDelayReport,
    pub edge_guard_samples: usize,
    pub noise_variance_per_lane: f64,
    pub files: Vec<String>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingStatus {
    Converged,
    NotConverged,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub status: TrainingStatus,
    pub iterations: usize,
    pub final_mse: Option<f64>,
    pub residual_db: Option<f64>,
    pub alignment_lag_samples: Option<isize>,
    pub valid_range: Option<[usize; 2]>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticDeviation {
    pub relative_deviation: f64,
    pub band_rad_per_sample: f64,
    pub grid_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolErrors {
    pub errors: usize,
    pub symbols_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizationReport {
    pub estimate: PolarizationSection,
    pub pattern_residual: f64,
    /// Which of the equivalent `p` / `-p` choices the estimate landed on.
    pub sign_convention: &'static str,
    pub ground_truth: PolarizationSection,
    /// `|<estimate, truth>|`, insensitive to the sign ambiguity.
    pub alignment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub class: &'static str,
    pub topology: &'static str,
    pub band_rad_per_sample: f64,
    pub grid_points: usize,
    /// Relative to lane 1 (xi).
    pub rx_skews_samples: Option<[f64; 4]>,
    pub ground_truth_rx_skews_samples: [f64; 4],
    pub skew_deltas_samples: Option<[f64; 4]>,
    pub polarization: Option<PolarizationReport>,
    pub error: Option<String>,
}

fn section(p: &PolarizationParams) -> PolarizationSection {
    PolarizationSection { a: p.a, b: p.b, c: p.c, d: p.d }
}

impl CalibrationSummary {
    pub fn new(
        scenario: &Scenario,
        band: f64,
        grid_points: usize,
        result: mimo_lab::Result<CalibrationReport>,
    ) -> Self {
        let truth = scenario.relative_rx_skews();
        let cfg = scenario.channel_config();
        let (skews, polarization, error) = match result {
            Ok(r) => {
                let pol = r.polarization.map(|e: PolarizationEstimate| PolarizationReport {
                    estimate: section(&e.params),
                    pattern_residual: e.residual,
                    sign_convention: e.sign_convention.as_str(),
                    ground_truth: section(&cfg.pol),
                    alignment: e.params.dot(&cfg.pol).abs(),
                });
                (Some(r.rx_skews), pol, None)
            }
            Err(e) => (None, None, Some(e.to_string())),
        };
        Self {
            class: scenario.class().as_str(),
            topology: scenario.topology().map(|t| t.kind.as_str()).unwrap_or("invalid"),
            band_rad_per_sample: band,
            grid_points,
            rx_skews_samples: skews,
            ground_truth_rx_skews_samples: truth,
            skew_deltas_samples: skews.map(|s| std::array::from_fn(|i| s[i] - truth[i])),
            polarization,
            error,
        }
    }

    /// Ground-truth checks: skew deltas within `skew_tol`, polarization
    /// alignment at least `alignment_min` when estimated.
    pub fn checks(&self, skew_tol: f64, alignment_min: f64) -> Vec<Check> {
        let mut out = Vec::new();
        match self.skew_deltas_samples {
            Some(d) => out.push(Check::at_most(
                "max_skew_delta_samples",
                d.iter().fold(0.0, |m, v| f64::max(m, v.abs())),
                skew_tol,
            )),
            None => out.push(Check::failed("max_skew_delta_samples", Comparison::AtMost, skew_tol)),
        }
        if let Some(p) = &self.polarization {
            out.push(Check::at_least("polarization_alignment", p.alignment, alignment_min));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: Scenario,
    pub group_delay: GroupDelayReport,
    pub edge_guard_samples: usize,
    pub noise_variance_per_lane: f64,
    pub training: TrainingSummary,
    pub analytic_deviation: Option<AnalyticDeviation>,
    pub symbol_errors: Option<SymbolErrors>,
    pub calibration: Option<CalibrationSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Standalone output of the calibrate command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: Scenario,
    pub calibration: CalibrationSummary,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_compare() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", 1.1, 1.0).passed);
        assert!(Check::at_least("a", -30.0, -35.0).passed);
        assert!(Check::equal("a", 0.0, 0.0).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert_eq!(Check::at_most("a", f64::NAN, 1.0).measured, None);
    }

    #[test]
    fn table_row_shows_verdict() {
        let row = Check::at_most("deviation", 1e-13, 1e-12).table_row();
        assert!(row.starts_with("deviation"));
        assert!(row.ends_with("PASS"));
    }
}

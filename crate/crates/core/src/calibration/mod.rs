//! Analytic channel inverses, tap frequency responses and parameter
//! extraction from converged taps.
//!
//! The class II inverse of a back-to-back channel `diag(e^{-jωτ_i}) U` is
//! `Uᵀ diag(e^{jωτ_i})`. Projected onto the fields it reads, with
//! `A = a + jb` and `B = c + jd`,
//!
//! ```text
//! [  A    jA    B    jB  ] diag(e^{jωτ_i})
//! [ -B*  -jB*   A*   jA* ]
//! ```
//!
//! i.e. the `(A, A, B, B)` / `(-B*, -B*, A*, A*)` pattern with the quadrature
//! lanes entering through a factor `j`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{make_unitary, unitary_pattern, PolarizationParams};
use crate::equalizer::{EqualizerTaps, TopologyKind};
use crate::parallel::{self, Exec};
use crate::signal::g_matrix;
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Fit band used when no signal-specific band is known.
pub const DEFAULT_FIT_BAND: f64 = 0.8 * std::f64::consts::PI;
/// Smallest mean dominant-branch magnitude accepted for skew fitting.
pub const MIN_BRANCH_MAGNITUDE: f64 = 0.1;
/// Largest relative projection residual accepted for polarization fitting.
pub const MAX_PATTERN_RESIDUAL: f64 = 0.2;

/// One complex matrix per grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    grid: Vec<f64>,
    matrices: Vec<CMatrix>,
}

impl FrequencyResponse {
    pub fn new(grid: Vec<f64>, matrices: Vec<CMatrix>) -> Result<Self> {
        if grid.len() != matrices.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: matrices.len(),
            });
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid", "must be strictly increasing"));
        }
        if let Some(first) = matrices.first() {
            if matrices.iter().any(|m| m.shape() != first.shape()) {
                return Err(Error::invalid("matrices", "dimensions differ across the grid"));
            }
        }
        Ok(Self { grid, matrices })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrices.first().map(|m| m.shape()).unwrap_or((0, 0))
    }

    /// Indices of grid points with `|ω| <= band`.
    pub fn in_band(&self, band: f64) -> Vec<usize> {
        (0..self.grid.len()).filter(|&k| self.grid[k].abs() <= band).collect()
    }
}

/// `n` uniformly spaced frequencies covering `(-π, π]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..n).map(|k| -PI + 2.0 * PI * (k + 1) as f64 / n as f64).collect()
}

fn phase(omega: f64, tau: f64) -> Complex64 {
    Complex64::from_polar(1.0, omega * tau)
}

/// Back-to-back channel seen between the pre-polarization point and the
/// receiver: `diag(e^{-jωτ_i}) U`.
pub fn back_to_back_response(p: &PolarizationParams, rx_skews: &[f64; 4], grid: &[f64]) -> Result<FrequencyResponse> {
    let u = make_unitary(p)?;
    let matrices = grid
        .iter()
        .map(|&w| CMatrix::from_fn(4, 4, |r, c| phase(w, -rx_skews[r]) * u[(r, c)]))
        .collect();
    FrequencyResponse::new(grid.to_vec(), matrices)
}

/// Optimal class II inverse on the lanes: `Uᵀ`, column `i` scaled by
/// `e^{jωτ_i}`.
pub fn analytic_class2_4x4(p: &PolarizationParams, rx_skews: &[f64; 4], grid: &[f64]) -> Result<FrequencyResponse> {
    let ut = make_unitary(p)?.transpose();
    let matrices = grid
        .iter()
        .map(|&w| CMatrix::from_fn(4, 4, |r, c| phase(w, rx_skews[c]) * ut[(r, c)]))
        .collect();
    FrequencyResponse::new(grid.to_vec(), matrices)
}

/// Per-lane coefficients of the field-referenced class II inverse, before the
/// skew phases: rows `(A, jA, B, jB)` and `(-B*, -jB*, A*, jA*)`.
pub fn class2_field_coefficients(p: &PolarizationParams) -> [[Complex64; 4]; 2] {
    let a = Complex64::new(p.a, p.b);
    let b = Complex64::new(p.c, p.d);
    let j = Complex64::new(0.0, 1.0);
    [[a, j * a, b, j * b], [-b.conj(), -j * b.conj(), a.conj(), j * a.conj()]]
}

/// Field-referenced class II inverse (2x4).
pub fn analytic_class2_2x4(p: &PolarizationParams, rx_skews: &[f64; 4], grid: &[f64]) -> Result<FrequencyResponse> {
    p.validate()?;
    let coef = class2_field_coefficients(p);
    let matrices = grid
        .iter()
        .map(|&w| CMatrix::from_fn(2, 4, |r, c| coef[r][c] * phase(w, rx_skews[c])))
        .collect();
    FrequencyResponse::new(grid.to_vec(), matrices)
}

/// DTFT of every branch with the center-tap delay removed:
/// `H_ob(ω) = sum_k w[o][b][k] e^{-jω(k - c)}`.
pub fn taps_to_frequency_response(taps: &EqualizerTaps, grid: &[f64]) -> Result<FrequencyResponse> {
    taps_to_frequency_response_with(Exec::default(), taps, grid)
}

pub fn taps_to_frequency_response_with(exec: Exec, taps: &EqualizerTaps, grid: &[f64]) -> Result<FrequencyResponse> {
    let kind = taps.topology.kind;
    let (outputs, branches) = (kind.outputs(), kind.branches());
    let c = taps.topology.center_index() as f64;
    let matrices = parallel::map_slice(exec, grid, |&w| {
        let kernel: Vec<Complex64> = (0..taps.topology.taps_per_branch())
            .map(|k| Complex64::from_polar(1.0, -w * (k as f64 - c)))
            .collect();
        CMatrix::from_fn(outputs, branches, |o, b| {
            taps.branch(o, b).iter().zip(&kernel).map(|(h, e)| h * e).sum()
        })
    });
    FrequencyResponse::new(grid.to_vec(), matrices)
}

/// Max over the grid of `‖inverse(ω) forward(ω) - P‖_∞` (largest entry
/// magnitude), with `P` the identity for square inverses and the
/// real-to-complex projection for 2x4 inverses.
pub fn verify_inverse(forward: &FrequencyResponse, inverse: &FrequencyResponse) -> Result<f64> {
    if forward.grid != inverse.grid {
        return Err(Error::GridMismatch);
    }
    let (ir, ic) = inverse.shape();
    let (fr, fc) = forward.shape();
    if ic != fr {
        return Err(Error::TopologyMismatch(format!("cannot compose {ir}x{ic} after {fr}x{fc}")));
    }
    let target = if ir == fc {
        CMatrix::identity(ir, fc)
    } else if (ir, fc) == (2, 4) {
        g_matrix()
    } else {
        return Err(Error::TopologyMismatch(format!("no target for a {ir}x{fc} product")));
    };
    Ok(forward
        .matrices
        .iter()
        .zip(&inverse.matrices)
        .map(|(f, i)| (i * f - &target).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max))
}

/// Max over in-band grid points of `‖a(ω) - b(ω)‖_F / ‖b(ω)‖_F`.
pub fn relative_deviation(a: &FrequencyResponse, b: &FrequencyResponse, band: f64) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    if a.shape() != b.shape() {
        return Err(Error::TopologyMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(b.in_band(band)
        .into_iter()
        .map(|k| (&a.matrices[k] - &b.matrices[k]).norm() / b.matrices[k].norm())
        .fold(0.0, f64::max))
}

/// Linear-phase fit of one input lane's dominant branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneFit {
    pub dominant_output: usize,
    pub magnitude: f64,
    /// Phase slope dφ/dω, i.e. the advance the branch applies, in samples.
    pub slope: f64,
    pub intercept: f64,
}

/// Unwrap a phase sequence in place, starting at `start` and walking outward.
fn unwrap_from(phases: &mut [f64], start: usize) {
    use std::f64::consts::{PI, TAU};
    let fix = |prev: f64, cur: f64| cur - TAU * ((cur - prev + PI) / TAU).floor();
    for k in start + 1..phases.len() {
        phases[k] = fix(phases[k - 1], phases[k]);
    }
    for k in (0..start).rev() {
        phases[k] = fix(phases[k + 1], phases[k]);
    }
}

/// Weighted least-squares phase-vs-frequency fit for every input lane, over
/// `|ω| <= band`, weights `|H|^2`.
pub fn fit_lane_phases(fr: &FrequencyResponse, band: f64) -> Result<Vec<LaneFit>> {
    let idx = fr.in_band(band);
    if idx.len() < 2 {
        return Err(Error::invalid("band", format!("{band} leaves fewer than two grid points")));
    }
    let (rows, cols) = fr.shape();
    let omegas: Vec<f64> = idx.iter().map(|&k| fr.grid[k]).collect();
    let start = omegas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    (0..cols)
        .map(|lane| {
            let mean_mag = |o: usize| idx.iter().map(|&k| fr.matrices[k][(o, lane)].norm()).sum::<f64>() / idx.len() as f64;
            let (dominant_output, magnitude) = (0..rows)
                .map(|o| (o, mean_mag(o)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((0, 0.0));
            if magnitude < MIN_BRANCH_MAGNITUDE {
                return Err(Error::Unidentifiable { lane, magnitude });
            }
            let values: Vec<Complex64> = idx.iter().map(|&k| fr.matrices[k][(dominant_output, lane)]).collect();
            let mut ph: Vec<f64> = values.iter().map(|z| z.arg()).collect();
            unwrap_from(&mut ph, start);
            let w: Vec<f64> = values.iter().map(|z| z.norm_sqr()).collect();
            let sw: f64 = w.iter().sum();
            let mx = w.iter().zip(&omegas).map(|(a, b)| a * b).sum::<f64>() / sw;
            let my = w.iter().zip(&ph).map(|(a, b)| a * b).sum::<f64>() / sw;
            let sxy: f64 = (0..w.len()).map(|k| w[k] * (omegas[k] - mx) * (ph[k] - my)).sum();
            let sxx: f64 = (0..w.len()).map(|k| w[k] * (omegas[k] - mx).powi(2)).sum();
            let slope = sxy / sxx;
            Ok(LaneFit {
                dominant_output,
                magnitude,
                slope,
                intercept: my - slope * mx,
            })
        })
        .collect()
}

/// Rx skews from a class I or class II response, relative to lane 1.
pub fn estimate_rx_skews(fr: &FrequencyResponse, band: f64) -> Result<[f64; 4]> {
    let fits = fit_lane_phases(fr, band)?;
    if fits.len() != 4 {
        return Err(Error::TopologyMismatch(format!("skew estimation needs 4 input lanes, got {}", fits.len())));
    }
    Ok(std::array::from_fn(|i| fits[i].slope - fits[0].slope))
}

/// Which of the two equivalent sign choices the estimate landed on, judged by
/// its largest-magnitude component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConvention {
    LeadingPositive,
    LeadingNegative,
}

impl SignConvention {
    pub fn of(p: &PolarizationParams) -> Self {
        let lead = p
            .as_array()
            .into_iter()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if lead >= 0.0 {
            SignConvention::LeadingPositive
        } else {
            SignConvention::LeadingNegative
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SignConvention::LeadingPositive => "leading_positive",
            SignConvention::LeadingNegative => "leading_negative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationEstimate {
    pub params: PolarizationParams,
    pub residual: f64,
    pub sign_convention: SignConvention,
}

/// Estimate `(a, b, c, d)` from a class II response (4x4 lanes-to-lanes or
/// 2x4 lanes-to-fields). The skew phases are removed with per-lane fitted
/// slopes, the result averaged over the band and projected onto the
/// polarization pattern. Both `p` and `-p` describe the same channel; the
/// estimate is returned as fitted and the sign it landed on is reported.
pub fn estimate_polarization(fr: &FrequencyResponse, band: f64) -> Result<PolarizationEstimate> {
    let fits = fit_lane_phases(fr, band)?;
    let idx = fr.in_band(band);
    let (rows, cols) = fr.shape();
    if cols != 4 || !(rows == 4 || rows == 2) {
        return Err(Error::TopologyMismatch(format!("polarization estimation needs a 4x4 or 2x4 response, got {rows}x{cols}")));
    }
    let mut mean = CMatrix::zeros(rows, cols);
    for &k in &idx {
        let w = fr.grid[k];
        for c in 0..cols {
            let derot = Complex64::from_polar(1.0, -w * fits[c].slope);
            for r in 0..rows {
                mean[(r, c)] += fr.matrices[k][(r, c)] * derot;
            }
        }
    }
    mean /= Complex64::new(idx.len() as f64, 0.0);

    let raw = if rows == 4 {
        // Uᵀ = a Pa + b Pb + c Pc + d Pd with orthogonal ±1 patterns of norm² 4
        let basis: [PolarizationParams; 4] = std::array::from_fn(|i| {
            let mut v = [0.0; 4];
            v[i] = 1.0;
            PolarizationParams { a: v[0], b: v[1], c: v[2], d: v[3] }
        });
        let coeff: [f64; 4] = std::array::from_fn(|i| {
            let pt = unitary_pattern(&basis[i]).transpose();
            (0..16).map(|e| mean[(e / 4, e % 4)].re * pt[(e / 4, e % 4)]).sum::<f64>() / 4.0
        });
        PolarizationParams { a: coeff[0], b: coeff[1], c: coeff[2], d: coeff[3] }
    } else {
        let j = Complex64::new(0.0, 1.0);
        let a = (mean[(0, 0)] - j * mean[(0, 1)] + mean[(1, 2)].conj() + (-j * mean[(1, 3)]).conj()) / 4.0;
        let b = (mean[(0, 2)] - j * mean[(0, 3)] - mean[(1, 0)].conj() - (-j * mean[(1, 1)]).conj()) / 4.0;
        PolarizationParams { a: a.re, b: a.im, c: b.re, d: b.im }
    };
    let fitted = if rows == 4 {
        let pt = unitary_pattern(&raw).transpose();
        CMatrix::from_fn(4, 4, |r, c| Complex64::new(pt[(r, c)], 0.0))
    } else {
        let coef = class2_field_coefficients(&raw);
        CMatrix::from_fn(2, 4, |r, c| coef[r][c])
    };
    let residual = (&mean - &fitted).norm() / mean.norm();
    if residual.is_nan() || residual > MAX_PATTERN_RESIDUAL {
        return Err(Error::PatternMismatch { residual });
    }
    let params = PolarizationParams::normalized(raw.a, raw.b, raw.c, raw.d)?;
    Ok(PolarizationEstimate {
        params,
        residual,
        sign_convention: SignConvention::of(&params),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReport {
    pub rx_skews: [f64; 4],
    pub polarization: Option<PolarizationEstimate>,
}

/// Skews from any 4-lane-input bank; polarization as well for class II taps.
pub fn calibrate(taps: &EqualizerTaps, grid: &[f64], band: f64) -> Result<CalibrationReport> {
    match taps.topology.kind {
        TopologyKind::Real4x4 | TopologyKind::Complex2x4 => {}
        k => {
            return Err(Error::TopologyMismatch(format!("calibration needs real_4x4 or complex_2x4 taps, got {k}")));
        }
    }
    let fr = taps_to_frequency_response(taps, grid)?;
    let rx_skews = estimate_rx_skews(&fr, band)?;
    let polarization = match taps.class {
        Some(crate::equalizer::ClassLabel::II) => Some(estimate_polarization(&fr, band)?),
        _ => None,
    };
    Ok(CalibrationReport { rx_skews, polarization })
}

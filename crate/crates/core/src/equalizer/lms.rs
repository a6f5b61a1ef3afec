//! Data-aided LMS with power-normalized step size.

use std::ops::Range;

use num_complex::Complex64;

use super::{prepare_branches, EqualizerTaps, Topology, TopologyKind};
use crate::{Error, Result};

/// Training aborts once the running error exceeds this multiple of the
/// starting error level.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmsSettings {
    /// Step size before normalization by the mean input power per branch.
    pub mu: f64,
    /// Sweeps over the training range.
    pub passes: usize,
}

impl Default for LmsSettings {
    fn default() -> Self {
        Self { mu: 1e-3, passes: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Squared error per iteration, averaged over outputs.
    pub mse_curve: Vec<f64>,
    /// Mean of the last tenth of `mse_curve`.
    pub final_mse: f64,
    pub iterations: usize,
    /// The last tenth of the curve is no higher than 1.1x the tenth before.
    pub converged: bool,
}

impl TrainingReport {
    fn from_curve(mse_curve: Vec<f64>) -> Self {
        let n = mse_curve.len();
        let tenth = (n / 10).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        let final_mse = mean(&mse_curve[n.saturating_sub(tenth)..]);
        let converged = n >= 20 && {
            let prev = mean(&mse_curve[n - 2 * tenth..n - tenth]);
            final_mse <= 1.1 * prev + 1e-300
        };
        Self {
            iterations: n,
            final_mse,
            converged,
            mse_curve,
        }
    }

    /// Block-averaged curve with `points` entries, for reporting.
    pub fn decimated(&self, points: usize) -> Vec<f64> {
        let points = points.clamp(1, self.mse_curve.len().max(1));
        let block = self.mse_curve.len().div_ceil(points).max(1);
        self.mse_curve
            .chunks(block)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

/// Train a tap bank with LMS starting from the center-spike initialization.
///
/// `inputs` are the topology's base lanes and `reference` its output lanes,
/// already aligned in time. Output sample `t` is trained for every `t` in
/// `range`, `passes` times over. The step applied is `mu / P`, with `P` the
/// mean branch power over the training window.
pub fn lms_train(
    inputs: &[Vec<Complex64>],
    reference: &[Vec<Complex64>],
    topology: Topology,
    settings: &LmsSettings,
    range: Range<usize>,
) -> Result<(EqualizerTaps, TrainingReport)> {
    let branches = prepare_branches(&topology, inputs)?;
    let kind = topology.kind;
    let outputs = kind.outputs();
    if reference.len() != outputs {
        return Err(Error::TopologyMismatch(format!(
            "{kind} produces {outputs} outputs but {} reference lanes were given",
            reference.len()
        )));
    }
    let n = branches[0].len();
    for r in reference {
        if r.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: r.len(),
            });
        }
    }
    if kind == TopologyKind::Real4x4 && reference.iter().flatten().any(|z| z.im != 0.0) {
        return Err(Error::TopologyMismatch("real_4x4 needs a real reference".into()));
    }
    if !(settings.mu > 0.0 && settings.mu.is_finite()) {
        return Err(Error::invalid("mu", format!("{} must be positive", settings.mu)));
    }
    if range.is_empty() || range.end > n {
        return Err(Error::invalid("range", format!("{range:?} invalid for length {n}")));
    }

    let l = topology.taps_per_branch();
    let c = topology.center_index();
    let nb = branches.len();

    let power = branches
        .iter()
        .map(|x| x[range.clone()].iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / (nb * range.len()) as f64;
    if power <= 0.0 {
        return Err(Error::invalid("inputs", "zero power over the training range"));
    }
    let ref_power = reference
        .iter()
        .map(|r| r[range.clone()].iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / (outputs * range.len()) as f64;
    let step = settings.mu / power;

    let mut taps = EqualizerTaps::center_spike(topology);
    let mut curve = Vec::with_capacity(settings.passes * range.len());
    let mut window = vec![Complex64::new(0.0, 0.0); nb * l];
    let mut limit = f64::INFINITY;

    for _ in 0..settings.passes {
        for t in range.clone() {
            // window[b * l + k] = x_b[t + c - k]
            for (b, x) in branches.iter().enumerate() {
                let w = &mut window[b * l..(b + 1) * l];
                if t + c < n && t + c + 1 >= l {
                    let base = t + c;
                    for (k, v) in w.iter_mut().enumerate() {
                        *v = x[base - k];
                    }
                } else {
                    for (k, v) in w.iter_mut().enumerate() {
                        *v = x[(t + c + n * (k / n + 1) - k) % n];
                    }
                }
            }

            let weights = taps.weights_mut();
            let mut sq = 0.0;
            for (o, r) in reference.iter().enumerate() {
                let wo = &mut weights[o * nb * l..(o + 1) * nb * l];
                let y: Complex64 = wo.iter().zip(&window).map(|(w, x)| w * x).sum();
                let e = r[t] - y;
                sq += e.norm_sqr();
                let g = e * step;
                for (w, x) in wo.iter_mut().zip(&window) {
                    *w += g * x.conj();
                }
            }
            let mse = sq / outputs as f64;
            if limit.is_infinite() {
                limit = DIVERGENCE_FACTOR * mse.max(ref_power);
            }
            if !mse.is_finite() || mse > limit {
                return Err(Error::Diverged {
                    mu: settings.mu,
                    iteration: curve.len(),
                });
            }
            curve.push(mse);
        }
    }

    if kind == TopologyKind::Real4x4 {
        // real data keeps the imaginary parts at exactly zero; make it explicit
        taps.weights_mut().iter_mut().for_each(|w| w.im = 0.0);
    }
    Ok((taps, TrainingReport::from_curve(curve)))
}

/// `10 log10(sum |y - r|^2 / sum |r|^2)` over `range`.
pub fn residual_db(output: &[Vec<Complex64>], reference: &[Vec<Complex64>], range: Range<usize>) -> f64 {
    let mut err = 0.0;
    let mut sig = 0.0;
    for (y, r) in output.iter().zip(reference) {
        for t in range.clone() {
            err += (y[t] - r[t]).norm_sqr();
            sig += r[t].norm_sqr();
        }
    }
    if err == 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (err / sig).log10()
}

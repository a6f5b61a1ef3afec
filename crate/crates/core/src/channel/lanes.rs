//! Per-lane electrical responses: gain, fractional delay and optional
//! low-pass, realized as centered windowed-sinc FIR kernels.

use std::f64::consts::PI;

use crate::parallel::{self, Exec};
use crate::signal::RealQuadSignal;
use crate::{Error, Result};

/// Kernel length of every lane filter.
pub const KERNEL_TAPS: usize = 33;
/// Group delay of every lane filter, in samples.
pub const KERNEL_DELAY: usize = (KERNEL_TAPS - 1) / 2;
/// Largest supported skew magnitude, in samples.
pub const MAX_SKEW: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneResponse {
    /// Linear amplitude factor.
    pub gain: f64,
    /// Delay relative to the kernel center, in samples.
    pub skew: f64,
    /// Low-pass cutoff as a fraction of Nyquist; `None` is all-pass.
    pub bandwidth: Option<f64>,
}

impl Default for LaneResponse {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl LaneResponse {
    pub const IDENTITY: Self = Self {
        gain: 1.0,
        skew: 0.0,
        bandwidth: None,
    };

    pub fn delay(skew: f64) -> Self {
        Self {
            skew,
            ..Self::IDENTITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() {
            return Err(Error::invalid("gain", "must be finite"));
        }
        if !self.skew.is_finite() || self.skew.abs() > MAX_SKEW {
            return Err(Error::SkewOutOfRange {
                skew: self.skew,
                limit: MAX_SKEW,
            });
        }
        if let Some(bw) = self.bandwidth {
            if !(bw > 0.0 && bw <= 1.0) {
                return Err(Error::invalid("bandwidth", format!("{bw} not in (0, 1]")));
            }
        }
        Ok(())
    }

    /// The realized FIR kernel, `KERNEL_TAPS` long, centered at `KERNEL_DELAY`.
    pub fn kernel(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let fc = self.bandwidth.unwrap_or(1.0);
        Ok((0..KERNEL_TAPS)
            .map(|n| {
                let u = n as f64 - KERNEL_DELAY as f64 - self.skew;
                self.gain * fc * sinc(fc * u) * blackman(u, KERNEL_TAPS as f64)
            })
            .collect())
    }

    /// DTFT of the kernel at `omega`, with the center delay removed.
    pub fn frequency_response(&self, omega: f64) -> Result<num_complex::Complex64> {
        let k = self.kernel()?;
        Ok(k.iter()
            .enumerate()
            .map(|(n, &h)| h * num_complex::Complex64::from_polar(1.0, -omega * (n as f64 - KERNEL_DELAY as f64)))
            .sum())
    }
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Blackman window of total span `span` evaluated at offset `u` from its
/// center; zero outside `|u| <= span / 2`.
pub fn blackman(u: f64, span: f64) -> f64 {
    if u.abs() > span / 2.0 {
        return 0.0;
    }
    if u == 0.0 {
        return 1.0;
    }
    let x = 2.0 * PI * u / span;
    0.42 + 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
}

/// Circular convolution `out[t] = sum_n h[n] x[t - n]`.
pub fn circular_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    (0..n)
        .map(|t| {
            h.iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(k, &c)| c * x[(t + n - k % n) % n])
                .sum()
        })
        .collect()
}

/// Convolve each lane with its own kernel. No cross-lane mixing. Every lane
/// is delayed by the common [`KERNEL_DELAY`] on top of its skew.
pub fn apply_lane_responses(x: &RealQuadSignal, lanes: &[LaneResponse; 4]) -> Result<RealQuadSignal> {
    apply_lane_responses_with(Exec::default(), x, lanes)
}

pub fn apply_lane_responses_with(
    exec: Exec,
    x: &RealQuadSignal,
    lanes: &[LaneResponse; 4],
) -> Result<RealQuadSignal> {
    let kernels = lanes.iter().map(|l| l.kernel()).collect::<Result<Vec<_>>>()?;
    let mut out = parallel::map_range(exec, 4, |i| circular_convolve(x.lane(i), &kernels[i]));
    let lanes: [Vec<f64>; 4] = std::array::from_fn(|i| std::mem::take(&mut out[i]));
    Ok(RealQuadSignal::from_lanes_unchecked(lanes, x.sample_rate()))
}

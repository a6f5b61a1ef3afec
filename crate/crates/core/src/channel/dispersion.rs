//! Chromatic dispersion as a frequency-domain all-pass on the complex fields.
//!
//! The whole record is transformed at once, which makes the operation a
//! circular (periodic) all-pass: energy is preserved and `cd` followed by
//! `-cd` is the identity up to rounding.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::signal::{ComplexDualSignal, RealQuadSignal};

/// Angular frequency of FFT bin `k` of an `n`-point transform, in (-pi, pi].
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    let w = 2.0 * PI * k as f64 / n as f64;
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Dispersion transfer function `exp(-j (cd/2) w^2)`.
pub fn cd_response(cd_total: f64, omega: f64) -> Complex64 {
    Complex64::from_polar(1.0, -0.5 * cd_total * omega * omega)
}

/// Apply dispersion to one complex sequence.
pub fn apply_cd_field(x: &[Complex64], cd_total: f64) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 || cd_total == 0.0 {
        return x.to_vec();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = x.to_vec();
    fwd.process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= cd_response(cd_total, bin_frequency(k, n));
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

pub fn apply_cd_fields(x: &ComplexDualSignal, cd_total: f64) -> ComplexDualSignal {
    ComplexDualSignal::from_pols_unchecked([
        apply_cd_field(x.pol(0), cd_total),
        apply_cd_field(x.pol(1), cd_total),
    ])
}

/// Dispersion on the 4-lane signal through the real/complex equivalence.
pub fn apply_cd(x: &RealQuadSignal, cd_total: f64) -> RealQuadSignal {
    if cd_total == 0.0 {
        return x.clone();
    }
    apply_cd_fields(&x.to_fields(), cd_total)
        .to_real()
        .with_sample_rate(x.sample_rate())
}

/// Rough impulse-response half-width of the dispersion all-pass, in samples.
/// Samples closer than this to either end of a record see wrap-around.
pub fn cd_memory(cd_total: f64) -> usize {
    (cd_total.abs() * PI).ceil() as usize
}

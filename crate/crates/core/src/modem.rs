//! Gray-mapped dual-polarization QPSK source and hard decisions.
//!
//! At 2 samples/symbol the symbols are interpolated with a half-band
//! windowed-sinc lowpass, so even samples carry the symbols exactly and the
//! waveform occupies `|w| <= ~0.54 pi`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{blackman, sinc, stream_rng};
use crate::signal::{ComplexDualSignal, RealQuadSignal};
use crate::{Error, Result};

const SYMBOL_STREAM: u64 = 0;
/// Half-length of the interpolation filter, in output samples.
const INTERP_HALF: usize = 64;

/// Passband edge of a waveform at `sps` samples/symbol, in rad/sample.
/// Frequencies below this carry essentially all of the signal energy.
pub fn passband_edge(sps: usize) -> f64 {
    match sps {
        1 => 0.8 * std::f64::consts::PI,
        _ => 0.4 * std::f64::consts::PI,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpskWaveform {
    pub waveform: RealQuadSignal,
    /// Transmitted symbols per polarization.
    pub symbols: [Vec<Complex64>; 2],
    pub sps: usize,
}

/// Gray mapping of two bits onto the unit-energy QPSK constellation.
pub fn map_qpsk(b0: bool, b1: bool) -> Complex64 {
    let s = |b: bool| if b { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(s(b0), s(b1))
}

/// Nearest QPSK point.
pub fn decide_qpsk(z: Complex64) -> Complex64 {
    map_qpsk(z.re < 0.0, z.im < 0.0)
}

/// Random dual-polarization QPSK waveform.
pub fn qpsk_waveform(symbols: usize, sps: usize, seed: u64) -> Result<QpskWaveform> {
    if symbols == 0 {
        return Err(Error::Empty);
    }
    if sps != 1 && sps != 2 {
        return Err(Error::invalid("samples_per_symbol", format!("{sps} not in {{1, 2}}")));
    }
    let mut rng = stream_rng(seed, SYMBOL_STREAM);
    let syms: [Vec<Complex64>; 2] = std::array::from_fn(|_| {
        (0..symbols)
            .map(|_| map_qpsk(rng.random(), rng.random()))
            .collect()
    });
    let fields = if sps == 1 {
        syms.clone()
    } else {
        std::array::from_fn(|p| interpolate_2x(&syms[p]))
    };
    let waveform = ComplexDualSignal::new(fields[0].clone(), fields[1].clone())?.to_real();
    Ok(QpskWaveform {
        waveform,
        symbols: syms,
        sps,
    })
}

/// Circular half-band interpolation by two.
fn interpolate_2x(symbols: &[Complex64]) -> Vec<Complex64> {
    let n = 2 * symbols.len();
    let span = (2 * INTERP_HALF + 1) as f64;
    let h: Vec<f64> = (0..=2 * INTERP_HALF)
        .map(|k| {
            let m = k as f64 - INTERP_HALF as f64;
            sinc(m / 2.0) * blackman(m, span)
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (t, o) in out.iter_mut().enumerate() {
        if t % 2 == 0 {
            *o = symbols[t / 2];
            continue;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &hk) in h.iter().enumerate() {
            // contribution of sample t - (k - INTERP_HALF), odd offsets only
            let idx = (t + INTERP_HALF + n * (k / n + 1) - k) % n;
            if idx.is_multiple_of(2) {
                acc += symbols[idx / 2] * hk;
            }
        }
        *o = acc;
    }
    out
}

/// Count symbol errors of `equalized` against `symbols`, sampling the fields
/// at `t = sps * k` for every symbol index `k` in `range`.
pub fn count_symbol_errors(
    equalized: &ComplexDualSignal,
    symbols: &[Vec<Complex64>; 2],
    sps: usize,
    range: std::ops::Range<usize>,
) -> usize {
    let mut errors = 0;
    for p in 0..2 {
        for k in range.clone() {
            let t = sps * k;
            if t >= equalized.len() || k >= symbols[p].len() {
                break;
            }
            if decide_qpsk(equalized.pol(p)[t]) != symbols[p][k] {
                errors += 1;
            }
        }
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    #[test]
    fn gray_mapping_and_decisions() {
        let pts = [map_qpsk(false, false), map_qpsk(false, true), map_qpsk(true, true), map_qpsk(true, false)];
        // adjacent points differ by one bit and are at 90 degree steps
        for w in pts.windows(2) {
            assert!(((w[1] / w[0]).arg().abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
        for p in pts {
            assert!((p.norm() - 1.0).abs() < 1e-15);
            assert_eq!(decide_qpsk(p * 0.7 + Complex64::new(0.05, -0.05)), p);
        }
    }

    #[test]
    fn even_samples_are_symbols() {
        let q = qpsk_waveform(500, 2, 3).unwrap();
        let f = q.waveform.to_fields();
        for p in 0..2 {
            for k in 0..500 {
                assert!((f.pol(p)[2 * k] - q.symbols[p][k]).norm() < 1e-15);
            }
        }
        assert_eq!(count_symbol_errors(&f, &q.symbols, 2, 0..500), 0);
    }

    #[test]
    fn two_sps_waveform_is_band_limited() {
        let q = qpsk_waveform(4096, 2, 9).unwrap();
        let mut x = q.waveform.to_fields().pol(0).to_vec();
        let n = x.len();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut x);
        let total: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let out_of_band: f64 = x
            .iter()
            .enumerate()
            .filter(|(k, _)| crate::channel::bin_frequency(*k, n).abs() > 0.56 * std::f64::consts::PI)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        assert!(out_of_band / total < 1e-6, "{}", out_of_band / total);
    }

    #[test]
    fn bad_arguments() {
        assert!(qpsk_waveform(0, 2, 1).is_err());
        assert!(qpsk_waveform(10, 3, 1).is_err());
    }
}

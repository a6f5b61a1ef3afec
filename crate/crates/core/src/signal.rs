//! Signal representations and the exact transforms between them.
//!
//! Time is counted in samples everywhere. The `sample_rate` carried by a
//! [`RealQuadSignal`] is informational only.

use num_complex::Complex64;

use crate::{Error, Result};

/// Lane order of the 4-lane real representation.
pub const LANE_NAMES: [&str; 4] = ["xi", "xq", "yi", "yq"];

/// Four real lanes `(iX, qX, iY, qY)` of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct RealQuadSignal {
    lanes: [Vec<f64>; 4],
    sample_rate: f64,
}

impl RealQuadSignal {
    pub fn new(lanes: [Vec<f64>; 4], sample_rate: f64) -> Result<Self> {
        let n = lanes[0].len();
        for lane in &lanes[1..] {
            if lane.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: lane.len(),
                });
            }
        }
        if lanes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("RealQuadSignal"));
        }
        Ok(Self { lanes, sample_rate })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            lanes: std::array::from_fn(|_| vec![0.0; len]),
            sample_rate: 1.0,
        }
    }

    /// Build from per-sample 4-vectors.
    pub fn from_samples(samples: &[[f64; 4]]) -> Result<Self> {
        let lanes = std::array::from_fn(|i| samples.iter().map(|s| s[i]).collect());
        Self::new(lanes, 1.0)
    }

    pub(crate) fn from_lanes_unchecked(lanes: [Vec<f64>; 4], sample_rate: f64) -> Self {
        Self { lanes, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.lanes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn with_sample_rate(mut self, sample_rate: f64) -> Self {
        self.sample_rate = sample_rate;
        self
    }

    pub fn lane(&self, i: usize) -> &[f64] {
        &self.lanes[i]
    }

    pub fn lanes(&self) -> &[Vec<f64>; 4] {
        &self.lanes
    }

    pub fn into_lanes(self) -> [Vec<f64>; 4] {
        self.lanes
    }

    pub fn sample(&self, t: usize) -> [f64; 4] {
        std::array::from_fn(|i| self.lanes[i][t])
    }

    /// Sum of squares over all lanes and samples.
    pub fn energy(&self) -> f64 {
        self.lanes.iter().flatten().map(|v| v * v).sum()
    }

    /// Mean power per lane.
    pub fn mean_lane_power(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.energy() / (4 * self.len()) as f64
    }

    /// Circular delay by `d` samples: `out[t] = self[t - d]`.
    pub fn circular_delay(&self, d: isize) -> Self {
        let lanes = std::array::from_fn(|i| circular_shift(&self.lanes[i], d));
        Self::from_lanes_unchecked(lanes, self.sample_rate)
    }

    /// Apply a fixed 4x4 real matrix to every sample.
    pub fn map_matrix(&self, m: &nalgebra::Matrix4<f64>) -> Self {
        let n = self.len();
        let mut lanes: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        for t in 0..n {
            let x = self.sample(t);
            for (r, lane) in lanes.iter_mut().enumerate() {
                lane[t] = (0..4).map(|c| m[(r, c)] * x[c]).sum();
            }
        }
        Self::from_lanes_unchecked(lanes, self.sample_rate)
    }

    /// Project every sample through the real-to-complex map.
    pub fn to_fields(&self) -> ComplexDualSignal {
        let n = self.len();
        let x = (0..n)
            .map(|t| Complex64::new(self.lanes[0][t], self.lanes[1][t]))
            .collect();
        let y = (0..n)
            .map(|t| Complex64::new(self.lanes[2][t], self.lanes[3][t]))
            .collect();
        ComplexDualSignal { pols: [x, y] }
    }

    /// Lanes as complex sequences with zero imaginary part.
    pub fn to_complex_lanes(&self) -> Vec<Vec<Complex64>> {
        self.lanes
            .iter()
            .map(|l| l.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .collect()
    }
}

/// Two complex fields `(X, Y)` of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDualSignal {
    pols: [Vec<Complex64>; 2],
}

impl ComplexDualSignal {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if x.iter().chain(&y).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("ComplexDualSignal"));
        }
        Ok(Self { pols: [x, y] })
    }

    pub(crate) fn from_pols_unchecked(pols: [Vec<Complex64>; 2]) -> Self {
        Self { pols }
    }

    pub fn len(&self) -> usize {
        self.pols[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pol(&self, i: usize) -> &[Complex64] {
        &self.pols[i]
    }

    pub fn pols(&self) -> &[Vec<Complex64>; 2] {
        &self.pols
    }

    pub fn into_pols(self) -> [Vec<Complex64>; 2] {
        self.pols
    }

    pub fn energy(&self) -> f64 {
        self.pols.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    /// Inverse of [`RealQuadSignal::to_fields`].
    pub fn to_real(&self) -> RealQuadSignal {
        let lanes = [
            self.pols[0].iter().map(|z| z.re).collect(),
            self.pols[0].iter().map(|z| z.im).collect(),
            self.pols[1].iter().map(|z| z.re).collect(),
            self.pols[1].iter().map(|z| z.im).collect(),
        ];
        RealQuadSignal::from_lanes_unchecked(lanes, 1.0)
    }
}

/// Per-sample angle of the block-diagonal rotation `diag(R(θ), R(θ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation2x2Stream {
    theta: Vec<f64>,
}

impl Rotation2x2Stream {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Rotation2x2Stream"));
        }
        Ok(Self { theta })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            theta: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Pointwise sum of angles: the stream equivalent to applying both.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Ok(Self {
            theta: self.theta.iter().zip(&other.theta).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn negated(&self) -> Self {
        Self {
            theta: self.theta.iter().map(|v| -v).collect(),
        }
    }

    /// Circular delay: `out[t] = self[t - d]`.
    pub fn circular_delay(&self, d: isize) -> Self {
        Self {
            theta: circular_shift(&self.theta, d),
        }
    }

    /// The 2x2 block at sample `t`.
    pub fn block(&self, t: usize) -> [[f64; 2]; 2] {
        let (s, c) = self.theta[t].sin_cos();
        [[c, -s], [s, c]]
    }
}

/// Real-to-complex projection `(x1 + j x2, x3 + j x4)`.
pub fn real4_to_complex2(x: [f64; 4]) -> [Complex64; 2] {
    [Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3])]
}

/// Right inverse of [`real4_to_complex2`].
pub fn complex2_to_real4(z: [Complex64; 2]) -> [f64; 4] {
    [z[0].re, z[0].im, z[1].re, z[1].im]
}

/// The real-to-complex matrix as a 2x4 complex matrix.
pub fn g_matrix() -> nalgebra::DMatrix<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);
    nalgebra::DMatrix::from_row_slice(2, 4, &[one, j, o, o, o, o, one, j])
}

/// Rotate one 4-vector by `diag(R(θ), R(θ))`.
pub fn rotate4(x: [f64; 4], theta: f64) -> [f64; 4] {
    let (s, c) = theta.sin_cos();
    [
        c * x[0] - s * x[1],
        s * x[0] + c * x[1],
        c * x[2] - s * x[3],
        s * x[2] + c * x[3],
    ]
}

/// Per-sample block rotation of a 4-lane signal.
pub fn apply_block_rotation(x: &RealQuadSignal, theta: &Rotation2x2Stream) -> Result<RealQuadSignal> {
    check_len(x.len(), theta.len())?;
    let n = x.len();
    let mut lanes: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    for t in 0..n {
        let y = rotate4(x.sample(t), theta.theta[t]);
        for i in 0..4 {
            lanes[i][t] = y[i];
        }
    }
    Ok(RealQuadSignal::from_lanes_unchecked(lanes, x.sample_rate()))
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        Err(Error::LengthMismatch { expected, actual })
    } else {
        Ok(())
    }
}

/// `out[t] = x[(t - d) mod n]`.
pub fn circular_shift<T: Copy>(x: &[T], d: isize) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let d = d.rem_euclid(n as isize) as usize;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&x[n - d..]);
    out.extend_from_slice(&x[..n - d]);
    out
}

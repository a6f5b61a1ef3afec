//! FIR MIMO equalizers: topologies, tap banks, filtering and LMS training.
//!
//! Every topology is evaluated with complex arithmetic. An output sample is
//!
//! ```text
//! y_o[t] = sum_b sum_k w[o][b][k] * x_b[t + c - k]
//! ```
//!
//! with `c` the center tap, so a center spike is a zero-delay identity.
//! Inputs are indexed circularly, matching the periodic simulator.

mod classes;
mod lms;
mod widely_linear;

pub use classes::{
    derotate_lanes, estimate_lag, field_matching_reference, run_class, ClassLabel, ClassRun, EqualizerClass,
    InputTransform, ReferencePoint, ReferenceTransform,
};
pub use lms::{lms_train, residual_db, LmsSettings, TrainingReport, DIVERGENCE_FACTOR};
pub use widely_linear::{augment_conjugates, real4x4_to_complex2x4, real4x4_to_widely_linear};

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::parallel::{self, Exec};
use crate::{Error, Result};

pub const DEFAULT_TAPS: usize = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    /// Four real lanes in, four real lanes out.
    Real4x4,
    /// Two complex fields in, two out. Strictly linear.
    Complex2x2,
    /// Four (real or complex) lanes in, two complex fields out.
    Complex2x4,
    /// Two fields and their conjugates in, two fields out.
    WidelyLinear2x4,
    /// Four complex lanes and their conjugates in, two fields out.
    WidelyLinear2x8,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 5] = [
        TopologyKind::Real4x4,
        TopologyKind::Complex2x2,
        TopologyKind::Complex2x4,
        TopologyKind::WidelyLinear2x4,
        TopologyKind::WidelyLinear2x8,
    ];

    pub fn outputs(&self) -> usize {
        match self {
            TopologyKind::Real4x4 => 4,
            _ => 2,
        }
    }

    /// Lanes supplied by the caller (before conjugate augmentation).
    pub fn input_lanes(&self) -> usize {
        match self {
            TopologyKind::Complex2x2 | TopologyKind::WidelyLinear2x4 => 2,
            _ => 4,
        }
    }

    pub fn is_widely_linear(&self) -> bool {
        matches!(self, TopologyKind::WidelyLinear2x4 | TopologyKind::WidelyLinear2x8)
    }

    /// FIR branches per output.
    pub fn branches(&self) -> usize {
        if self.is_widely_linear() {
            2 * self.input_lanes()
        } else {
            self.input_lanes()
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TopologyKind::Real4x4 => "real_4x4",
            TopologyKind::Complex2x2 => "complex_2x2",
            TopologyKind::Complex2x4 => "complex_2x4",
            TopologyKind::WidelyLinear2x4 => "widely_linear_2x4",
            TopologyKind::WidelyLinear2x8 => "widely_linear_2x8",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::TopologyMismatch(format!("unknown topology `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    pub kind: TopologyKind,
    taps_per_branch: usize,
}

impl Topology {
    pub fn new(kind: TopologyKind, taps_per_branch: usize) -> Result<Self> {
        if taps_per_branch == 0 || taps_per_branch.is_multiple_of(2) {
            return Err(Error::invalid("taps_per_branch", format!("{taps_per_branch} must be odd")));
        }
        Ok(Self { kind, taps_per_branch })
    }

    pub fn taps_per_branch(&self) -> usize {
        self.taps_per_branch
    }

    pub fn center_index(&self) -> usize {
        (self.taps_per_branch - 1) / 2
    }

    pub fn coefficient_count(&self) -> usize {
        self.kind.outputs() * self.kind.branches() * self.taps_per_branch
    }
}

/// A bank of FIR branches, `weights[o][b][k]` stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerTaps {
    pub topology: Topology,
    pub class: Option<ClassLabel>,
    weights: Vec<Complex64>,
}

impl EqualizerTaps {
    pub fn zeros(topology: Topology) -> Self {
        Self {
            topology,
            class: None,
            weights: vec![Complex64::new(0.0, 0.0); topology.coefficient_count()],
        }
    }

    pub fn from_weights(topology: Topology, weights: Vec<Complex64>) -> Result<Self> {
        if weights.len() != topology.coefficient_count() {
            return Err(Error::TopologyMismatch(format!(
                "{} with {} taps per branch needs {} coefficients, got {}",
                topology.kind,
                topology.taps_per_branch,
                topology.coefficient_count(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::NonFinite("EqualizerTaps"));
        }
        if topology.kind == TopologyKind::Real4x4 && weights.iter().any(|w| w.im != 0.0) {
            return Err(Error::TopologyMismatch("real_4x4 taps must be real".into()));
        }
        Ok(Self {
            topology,
            class: None,
            weights,
        })
    }

    /// Center spike on the matched branches: identity for the real and
    /// complex 2x2 forms, the real-to-complex projection `(1, j)` for lane
    /// inputs, zero on every conjugate branch.
    pub fn center_spike(topology: Topology) -> Self {
        let mut taps = Self::zeros(topology);
        let c = topology.center_index();
        let one = Complex64::new(1.0, 0.0);
        let j = Complex64::new(0.0, 1.0);
        match topology.kind {
            TopologyKind::Real4x4 => (0..4).for_each(|i| taps.branch_mut(i, i)[c] = one),
            TopologyKind::Complex2x2 | TopologyKind::WidelyLinear2x4 => {
                (0..2).for_each(|i| taps.branch_mut(i, i)[c] = one)
            }
            TopologyKind::Complex2x4 | TopologyKind::WidelyLinear2x8 => {
                for o in 0..2 {
                    taps.branch_mut(o, 2 * o)[c] = one;
                    taps.branch_mut(o, 2 * o + 1)[c] = j;
                }
            }
        }
        taps
    }

    pub fn with_class(mut self, class: ClassLabel) -> Self {
        self.class = Some(class);
        self
    }

    fn offset(&self, o: usize, b: usize) -> usize {
        (o * self.topology.kind.branches() + b) * self.topology.taps_per_branch
    }

    pub fn branch(&self, o: usize, b: usize) -> &[Complex64] {
        let s = self.offset(o, b);
        &self.weights[s..s + self.topology.taps_per_branch]
    }

    pub fn branch_mut(&mut self, o: usize, b: usize) -> &mut [Complex64] {
        let s = self.offset(o, b);
        let l = self.topology.taps_per_branch;
        &mut self.weights[s..s + l]
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Complex64] {
        &mut self.weights
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= s);
        out
    }

    /// Sum of squared magnitudes of one branch.
    pub fn branch_energy(&self, o: usize, b: usize) -> f64 {
        self.branch(o, b).iter().map(|w| w.norm_sqr()).sum()
    }
}

/// Validate lane count and augment with conjugates for widely-linear forms.
pub(crate) fn prepare_branches(topology: &Topology, inputs: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let kind = topology.kind;
    if inputs.len() != kind.input_lanes() {
        return Err(Error::TopologyMismatch(format!(
            "{kind} expects {} input lanes, got {}",
            kind.input_lanes(),
            inputs.len()
        )));
    }
    let n = inputs[0].len();
    for lane in inputs {
        if lane.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: lane.len(),
            });
        }
    }
    if kind == TopologyKind::Real4x4 && inputs.iter().flatten().any(|z| z.im != 0.0) {
        return Err(Error::TopologyMismatch("real_4x4 needs real input lanes".into()));
    }
    Ok(if kind.is_widely_linear() {
        augment_conjugates(inputs)
    } else {
        inputs.to_vec()
    })
}

/// Filter `inputs` through `taps`; one output sequence per topology output.
pub fn apply_taps(taps: &EqualizerTaps, inputs: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    apply_taps_with(Exec::default(), 4096, taps, inputs)
}

/// [`apply_taps`] with an explicit execution strategy and block size. Neither
/// changes the result.
pub fn apply_taps_with(
    exec: Exec,
    block: usize,
    taps: &EqualizerTaps,
    inputs: &[Vec<Complex64>],
) -> Result<Vec<Vec<Complex64>>> {
    let branches = prepare_branches(&taps.topology, inputs)?;
    let n = branches[0].len();
    let outputs = taps.topology.kind.outputs();
    let l = taps.topology.taps_per_branch;
    let c = taps.topology.center_index();
    let zero = Complex64::new(0.0, 0.0);

    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(outputs);
    for o in 0..outputs {
        let mut y = vec![zero; n];
        parallel::fill_chunks(exec, &mut y, block, |start, chunk| {
            for (i, v) in chunk.iter_mut().enumerate() {
                let t = start + i;
                let mut acc = zero;
                for (b, x) in branches.iter().enumerate() {
                    let w = taps.branch(o, b);
                    if t + c < n && t + c + 1 >= l {
                        let base = t + c;
                        for (k, wk) in w.iter().enumerate() {
                            acc += wk * x[base - k];
                        }
                    } else {
                        for (k, wk) in w.iter().enumerate() {
                            acc += wk * x[(t + c + n * (k / n + 1) - k) % n];
                        }
                    }
                }
                *v = acc;
            }
        });
        out.push(y);
    }
    Ok(out)
}

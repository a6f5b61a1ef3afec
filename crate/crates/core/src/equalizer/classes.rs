//! The four equalizer classes, distinguished by where their reference is
//! taken and how inputs and references are prepared.
//!
//! | class | input                     | reference                                  |
//! |-------|---------------------------|--------------------------------------------|
//! | I     | received lanes            | signal ahead of the Rx lanes               |
//! | II    | received lanes (or fields)| pre-polarization signal, carrier included  |
//! | III   | carrier-derotated lanes   | class II reference with the carrier removed|
//! | IV    | carrier-derotated lanes   | transmitted fields                         |
//!
//! The carrier used for derotation is taken from the simulator (genie).

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{apply_taps, lms_train, residual_db, EqualizerTaps, LmsSettings, Topology, TopologyKind, TrainingReport};
use crate::channel::SimOutput;
use crate::signal::{check_len, circular_shift, ComplexDualSignal, RealQuadSignal, Rotation2x2Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    I,
    II,
    III,
    IV,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [ClassLabel::I, ClassLabel::II, ClassLabel::III, ClassLabel::IV];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::I => "I",
            ClassLabel::II => "II",
            ClassLabel::III => "III",
            ClassLabel::IV => "IV",
        }
    }

    pub fn default_topology(&self) -> TopologyKind {
        match self {
            ClassLabel::I | ClassLabel::II => TopologyKind::Real4x4,
            ClassLabel::III => TopologyKind::Complex2x4,
            ClassLabel::IV => TopologyKind::WidelyLinear2x8,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid("class", format!("`{s}` is not one of I, II, III, IV")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferencePoint {
    /// Ahead of the Rx lane responses.
    BeforeRxLanes,
    /// Ahead of the polarization transform, still carrying the carrier.
    PrePolarization,
    /// The channel input.
    Transmitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputTransform {
    None,
    /// Each real lane multiplied by `exp(-j θ_t)`.
    DerotateLanes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceTransform {
    None,
    /// Reference fields multiplied by `exp(-j θ_t)`.
    FieldMatching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EqualizerClass {
    pub label: ClassLabel,
    pub reference: ReferencePoint,
    pub input_transform: InputTransform,
    pub reference_transform: ReferenceTransform,
}

impl EqualizerClass {
    pub fn standard(label: ClassLabel) -> Self {
        let (reference, input_transform, reference_transform) = match label {
            ClassLabel::I => (ReferencePoint::BeforeRxLanes, InputTransform::None, ReferenceTransform::None),
            ClassLabel::II => (ReferencePoint::PrePolarization, InputTransform::None, ReferenceTransform::None),
            ClassLabel::III => (
                ReferencePoint::PrePolarization,
                InputTransform::DerotateLanes,
                ReferenceTransform::FieldMatching,
            ),
            ClassLabel::IV => (ReferencePoint::Transmitted, InputTransform::DerotateLanes, ReferenceTransform::None),
        };
        Self {
            label,
            reference,
            input_transform,
            reference_transform,
        }
    }
}

/// `out_t = exp(-j θ_t) ref_t` on both polarizations.
pub fn field_matching_reference(reference: &ComplexDualSignal, theta: &Rotation2x2Stream) -> Result<ComplexDualSignal> {
    check_len(reference.len(), theta.len())?;
    let rot: Vec<Complex64> = theta.theta().iter().map(|&t| Complex64::from_polar(1.0, -t)).collect();
    let pols = std::array::from_fn(|p| reference.pol(p).iter().zip(&rot).map(|(z, r)| z * r).collect());
    Ok(ComplexDualSignal::from_pols_unchecked(pols))
}

/// `out_{i,t} = r_{i,t} exp(-j θ_t)`: four complex lanes, no mixing.
pub fn derotate_lanes(r: &RealQuadSignal, theta: &Rotation2x2Stream) -> Result<[Vec<Complex64>; 4]> {
    check_len(r.len(), theta.len())?;
    let rot: Vec<Complex64> = theta.theta().iter().map(|&t| Complex64::from_polar(1.0, -t)).collect();
    Ok(std::array::from_fn(|i| r.lane(i).iter().zip(&rot).map(|(v, z)| z * *v).collect()))
}

/// Integer lag `d` maximizing `sum_ij |sum_t x_i[t + d] r_j[t]*|^2` over
/// `|d| <= max_lag`, computed circularly with FFTs.
pub fn estimate_lag(inputs: &[Vec<Complex64>], reference: &[Vec<Complex64>], max_lag: usize) -> Result<isize> {
    let n = inputs.first().map(|l| l.len()).ok_or(Error::Empty)?;
    if n == 0 {
        return Err(Error::Empty);
    }
    for l in inputs.iter().chain(reference) {
        check_len(n, l.len())?;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectra = |lanes: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> {
        lanes
            .iter()
            .map(|l| {
                let mut b = l.clone();
                fwd.process(&mut b);
                b
            })
            .collect()
    };
    let xs = spectra(inputs);
    let rs = spectra(reference);
    let mut score = vec![0.0; n];
    for x in &xs {
        for r in &rs {
            let mut c: Vec<Complex64> = x.iter().zip(r).map(|(a, b)| a * b.conj()).collect();
            inv.process(&mut c);
            score.iter_mut().zip(&c).for_each(|(s, v)| *s += v.norm_sqr());
        }
    }
    let max_lag = max_lag.min((n - 1) / 2) as isize;
    let mut best = (0isize, f64::NEG_INFINITY);
    for d in -max_lag..=max_lag {
        let s = score[d.rem_euclid(n as isize) as usize];
        if s > best.1 {
            best = (d, s);
        }
    }
    Ok(best.0)
}

/// Everything produced by one class run. `output` and `reference` share the
/// reference's time base.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRun {
    pub class: EqualizerClass,
    pub taps: EqualizerTaps,
    pub report: TrainingReport,
    /// Aligned equalizer input lanes (before conjugate augmentation).
    pub inputs: Vec<Vec<Complex64>>,
    pub output: Vec<Vec<Complex64>>,
    pub reference: Vec<Vec<Complex64>>,
    /// Input delay relative to the reference, in samples.
    pub alignment_lag: isize,
    /// Samples used for training and metrics.
    pub valid: Range<usize>,
    pub residual_db: f64,
}

impl ClassRun {
    /// Equalizer output as fields; only for two-output topologies.
    pub fn output_fields(&self) -> Option<ComplexDualSignal> {
        (self.output.len() == 2).then(|| ComplexDualSignal::from_pols_unchecked([self.output[0].clone(), self.output[1].clone()]))
    }
}

fn check_compatibility(class: &EqualizerClass, kind: TopologyKind) -> Result<()> {
    let ok = match (class.input_transform, kind) {
        (InputTransform::DerotateLanes, k) => matches!(k, TopologyKind::Complex2x4 | TopologyKind::WidelyLinear2x8),
        (InputTransform::None, TopologyKind::Real4x4) => class.reference_transform == ReferenceTransform::None,
        (InputTransform::None, _) => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::TopologyMismatch(format!("class {} cannot train a {kind} equalizer", class.label)))
    }
}

fn real_lanes(x: &RealQuadSignal) -> Vec<Vec<Complex64>> {
    x.to_complex_lanes()
}

fn fields(x: &RealQuadSignal) -> Vec<Vec<Complex64>> {
    x.to_fields().into_pols().into_iter().collect()
}

/// Train one class on a simulation and equalize it.
pub fn run_class(
    class: &EqualizerClass,
    topology: Topology,
    settings: &LmsSettings,
    sim: &SimOutput,
) -> Result<ClassRun> {
    let kind = topology.kind;
    check_compatibility(class, kind)?;
    let received = sim.received();
    let n = received.len();

    let reference_signal = match class.reference {
        ReferencePoint::BeforeRxLanes => sim.probes.before_rx_lanes.clone(),
        ReferencePoint::PrePolarization => sim.fo_reference(),
        ReferencePoint::Transmitted => sim.transmitted.clone(),
    };
    let reference: Vec<Vec<Complex64>> = match (kind, class.reference_transform) {
        (TopologyKind::Real4x4, _) => real_lanes(&reference_signal),
        (_, ReferenceTransform::None) => fields(&reference_signal),
        (_, ReferenceTransform::FieldMatching) => field_matching_reference(&reference_signal.to_fields(), &sim.carrier)?
            .into_pols()
            .into_iter()
            .collect(),
    };

    let max_lag = 4 * (sim.group_delay.total() + topology.taps_per_branch());
    let (inputs, lag) = match class.input_transform {
        InputTransform::None => {
            let raw = match kind {
                TopologyKind::Complex2x2 | TopologyKind::WidelyLinear2x4 => fields(received),
                _ => real_lanes(received),
            };
            let lag = estimate_lag(&raw, &reference, max_lag)?;
            (raw, lag)
        }
        InputTransform::DerotateLanes => {
            let coarse = derotate_lanes(received, &sim.carrier)?;
            let lag = estimate_lag(&coarse, &reference, max_lag)?;
            // derotate with the carrier phase the signal had at the reference point
            let lanes = derotate_lanes(received, &sim.carrier.circular_delay(lag))?;
            (lanes.into_iter().collect::<Vec<_>>(), lag)
        }
    };
    let aligned: Vec<Vec<Complex64>> = inputs.iter().map(|l| circular_shift(l, -lag)).collect();

    let guard = sim.edge_guard + lag.unsigned_abs() + topology.taps_per_branch();
    if 2 * guard >= n {
        return Err(Error::invalid("input", format!("{n} samples is too short for an edge guard of {guard}")));
    }
    let valid = guard..n - guard;
    let (taps, report) = lms_train(&aligned, &reference, topology, settings, valid.clone())?;
    let taps = taps.with_class(class.label);
    let output = apply_taps(&taps, &aligned)?;
    let residual_db = residual_db(&output, &reference, valid.clone());
    Ok(ClassRun {
        class: *class,
        taps,
        report,
        inputs: aligned,
        output,
        reference,
        alignment_lag: lag,
        valid,
        residual_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn labels_parse() {
        for c in ClassLabel::ALL {
            assert_eq!(c.as_str().parse::<ClassLabel>().unwrap(), c);
        }
        assert!("V".parse::<ClassLabel>().is_err());
    }

    #[test]
    fn field_matching_examples() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let r = ComplexDualSignal::new(vec![one; 6], vec![zero; 6]).unwrap();
        assert_eq!(field_matching_reference(&r, &Rotation2x2Stream::zeros(6)).unwrap(), r);

        let th = Rotation2x2Stream::new((0..6).map(|t| PI * t as f64).collect()).unwrap();
        let out = field_matching_reference(&r, &th).unwrap();
        for t in 0..6 {
            let want = if t % 2 == 0 { 1.0 } else { -1.0 };
            assert!((out.pol(0)[t] - Complex64::new(want, 0.0)).norm() < 1e-12);
        }

        let back = field_matching_reference(&out, &th.negated()).unwrap();
        for t in 0..6 {
            assert!((back.pol(0)[t] - one).norm() < 1e-15);
        }
        assert!(field_matching_reference(&r, &Rotation2x2Stream::zeros(5)).is_err());
    }

    #[test]
    fn derotation_examples() {
        let r = RealQuadSignal::new([vec![1.0; 16], vec![-0.5; 16], vec![2.0; 16], vec![0.0; 16]], 1.0).unwrap();
        let flat = derotate_lanes(&r, &Rotation2x2Stream::zeros(16)).unwrap();
        for i in 0..4 {
            for t in 0..16 {
                assert_eq!(flat[i][t], Complex64::new(r.lane(i)[t], 0.0));
            }
        }
        let w = 0.3;
        let th = Rotation2x2Stream::new((0..16).map(|t| w * t as f64).collect()).unwrap();
        let tone = derotate_lanes(&r, &th).unwrap();
        for t in 0..16 {
            assert!((tone[0][t] - Complex64::from_polar(1.0, -w * t as f64)).norm() < 1e-15);
            for i in 0..4 {
                assert!((tone[i][t].norm() - r.lane(i)[t].abs()).abs() < 1e-15);
            }
        }
        assert!(derotate_lanes(&r, &Rotation2x2Stream::zeros(3)).is_err());
    }

    #[test]
    fn lag_of_a_circular_shift() {
        let x: Vec<Complex64> = (0..256).map(|t| Complex64::new(((t * 37) % 11) as f64 - 5.0, 0.0)).collect();
        let delayed = circular_shift(&x, 13);
        assert_eq!(estimate_lag(std::slice::from_ref(&delayed), std::slice::from_ref(&x), 40).unwrap(), 13);
        assert_eq!(estimate_lag(&[x.clone()], &[delayed], 40).unwrap(), -13);
    }
}

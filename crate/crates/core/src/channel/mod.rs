//! The perceived 4-lane channel and its building blocks.
//!
//! Two compositions are available:
//!
//! * [`ChannelModel::Ordered`]: Tx lanes, Tx phase noise, dispersion,
//!   polarization, frequency offset with Rx phase noise, Rx lanes, noise.
//! * [`ChannelModel::BackToBack`]: Tx lanes, one merged rotation (frequency
//!   offset plus both phase noises), polarization, Rx lanes, noise.
//!
//! All filtering is circular, so a simulated record is one period of a
//! periodic signal and every probe has the input's length.

mod dispersion;
mod lanes;
mod phase;
mod polarization;

pub use dispersion::{apply_cd, apply_cd_field, apply_cd_fields, bin_frequency, cd_memory, cd_response};
pub use lanes::{
    apply_lane_responses, apply_lane_responses_with, blackman, circular_convolve, sinc, LaneResponse,
    KERNEL_DELAY, KERNEL_TAPS, MAX_SKEW,
};
pub use phase::{make_fo_stream, make_phase_noise, make_phase_noise_from, stream_rng};
pub use polarization::{
    block_rotation_matrix, check_fo_pol_commutativity, make_unitary, PolarizationParams, NORM_TOLERANCE,
};

pub(crate) use polarization::unitary_pattern;

use rand_distr::{Distribution, Normal};

use crate::signal::{apply_block_rotation, RealQuadSignal, Rotation2x2Stream};
use crate::{Error, Result};

const TX_PN_STREAM: u64 = 1;
const RX_PN_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelModel {
    /// Dispersion and polarization between separate Tx and Rx rotations.
    Ordered,
    /// No dispersion; one merged rotation ahead of the polarization.
    #[default]
    BackToBack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub tx_lanes: [LaneResponse; 4],
    pub rx_lanes: [LaneResponse; 4],
    pub pol: PolarizationParams,
    /// Accumulated dispersion, rad * sample^2.
    pub cd_total: f64,
    /// Constant frequency offset, rad/sample.
    pub fo: f64,
    /// Linear frequency ramp, rad/sample^2.
    pub fo_ramp: f64,
    /// Phase-noise increment variance per sample, rad^2.
    pub tx_linewidth: f64,
    pub rx_linewidth: f64,
    /// Signal-to-noise ratio in dB; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub model: ChannelModel,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tx_lanes: [LaneResponse::IDENTITY; 4],
            rx_lanes: [LaneResponse::IDENTITY; 4],
            pol: PolarizationParams::IDENTITY,
            cd_total: 0.0,
            fo: 0.0,
            fo_ramp: 0.0,
            tx_linewidth: 0.0,
            rx_linewidth: 0.0,
            snr_db: None,
            seed: 0,
            model: ChannelModel::BackToBack,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        for l in self.tx_lanes.iter().chain(&self.rx_lanes) {
            l.validate()?;
        }
        self.pol.validate()?;
        let finite = [
            ("cd_total", self.cd_total),
            ("fo", self.fo),
            ("fo_ramp", self.fo_ramp),
            ("tx_linewidth", self.tx_linewidth),
            ("rx_linewidth", self.rx_linewidth),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.tx_linewidth < 0.0 || self.rx_linewidth < 0.0 {
            return Err(Error::invalid("linewidth", "must be >= 0"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("snr_db", "must be finite (omit for noiseless)"));
            }
        }
        if self.model == ChannelModel::BackToBack && self.cd_total != 0.0 {
            return Err(Error::invalid("cd_total", "the back-to-back model carries no dispersion"));
        }
        Ok(())
    }

    /// Nominal delay from the channel input to the received signal.
    pub fn group_delay(&self) -> GroupDelay {
        GroupDelay {
            tx_lanes: KERNEL_DELAY,
            rx_lanes: KERNEL_DELAY,
        }
    }

    /// Samples at either record end affected by wrap-around of the filters
    /// and rotation discontinuities.
    pub fn edge_guard(&self) -> usize {
        2 * KERNEL_TAPS + cd_memory(self.cd_total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupDelay {
    pub tx_lanes: usize,
    pub rx_lanes: usize,
}

impl GroupDelay {
    pub fn total(&self) -> usize {
        self.tx_lanes + self.rx_lanes
    }
}

/// Named stage boundaries of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeName {
    AfterTxLanes,
    AfterTxPn,
    AfterFo,
    AfterCd,
    AfterPol,
    BeforeRxLanes,
    Received,
}

impl ProbeName {
    pub const ALL: [ProbeName; 7] = [
        ProbeName::AfterTxLanes,
        ProbeName::AfterTxPn,
        ProbeName::AfterFo,
        ProbeName::AfterCd,
        ProbeName::AfterPol,
        ProbeName::BeforeRxLanes,
        ProbeName::Received,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProbeName::AfterTxLanes => "after_tx_lanes",
            ProbeName::AfterTxPn => "after_tx_pn",
            ProbeName::AfterFo => "after_fo",
            ProbeName::AfterCd => "after_cd",
            ProbeName::AfterPol => "after_pol",
            ProbeName::BeforeRxLanes => "before_rx_lanes",
            ProbeName::Received => "received",
        }
    }
}

/// Every intermediate signal of one simulation. Stages absent from the
/// selected model repeat the previous stage's signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub after_tx_lanes: RealQuadSignal,
    pub after_tx_pn: RealQuadSignal,
    pub after_fo: RealQuadSignal,
    pub after_cd: RealQuadSignal,
    pub after_pol: RealQuadSignal,
    pub before_rx_lanes: RealQuadSignal,
    pub received: RealQuadSignal,
}

impl ProbeRecord {
    pub fn get(&self, name: ProbeName) -> &RealQuadSignal {
        match name {
            ProbeName::AfterTxLanes => &self.after_tx_lanes,
            ProbeName::AfterTxPn => &self.after_tx_pn,
            ProbeName::AfterFo => &self.after_fo,
            ProbeName::AfterCd => &self.after_cd,
            ProbeName::AfterPol => &self.after_pol,
            ProbeName::BeforeRxLanes => &self.before_rx_lanes,
            ProbeName::Received => &self.received,
        }
    }
}

/// Result of [`simulate`]: the received signal plus everything a genie-aided
/// equalizer may need.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub model: ChannelModel,
    pub transmitted: RealQuadSignal,
    pub probes: ProbeRecord,
    pub fo: Rotation2x2Stream,
    pub tx_phase: Rotation2x2Stream,
    pub rx_phase: Rotation2x2Stream,
    /// Rotation between the pre-polarization reference and the receiver.
    pub carrier: Rotation2x2Stream,
    pub group_delay: GroupDelay,
    /// Per-lane noise variance actually added.
    pub noise_variance: f64,
    pub edge_guard: usize,
}

impl SimOutput {
    pub fn received(&self) -> &RealQuadSignal {
        &self.probes.received
    }

    /// The signal just ahead of the polarization transform, still carrying
    /// the carrier rotation.
    pub fn fo_reference(&self) -> RealQuadSignal {
        match self.model {
            ChannelModel::BackToBack => self.probes.after_fo.clone(),
            ChannelModel::Ordered => apply_block_rotation(&self.probes.after_cd, &self.carrier)
                .expect("probe and stream lengths agree by construction"),
        }
    }
}

/// Run one scenario. Pure given `(cfg, input)`.
pub fn simulate(cfg: &ChannelConfig, input: &RealQuadSignal) -> Result<SimOutput> {
    cfg.validate()?;
    if input.is_empty() {
        return Err(Error::Empty);
    }
    let n = input.len();
    let fo = make_fo_stream(cfg.fo, cfg.fo_ramp, n);
    let tx_phase = make_phase_noise_from(cfg.tx_linewidth, n, &mut stream_rng(cfg.seed, TX_PN_STREAM))?;
    let rx_phase = make_phase_noise_from(cfg.rx_linewidth, n, &mut stream_rng(cfg.seed, RX_PN_STREAM))?;
    let u = make_unitary(&cfg.pol)?;

    let after_tx_lanes = apply_lane_responses(input, &cfg.tx_lanes)?;
    let (after_tx_pn, after_cd, after_pol, after_fo, carrier) = match cfg.model {
        ChannelModel::BackToBack => {
            let merged = fo.compose(&tx_phase)?.compose(&rx_phase)?;
            let rotated = apply_block_rotation(&after_tx_lanes, &merged)?;
            let pol = rotated.map_matrix(&u);
            (rotated.clone(), rotated.clone(), pol, rotated, merged)
        }
        ChannelModel::Ordered => {
            let tx_rot = apply_block_rotation(&after_tx_lanes, &tx_phase)?;
            let cd = apply_cd(&tx_rot, cfg.cd_total);
            let pol = cd.map_matrix(&u);
            let carrier = fo.compose(&rx_phase)?;
            let rotated = apply_block_rotation(&pol, &carrier)?;
            (tx_rot, cd, pol, rotated, carrier)
        }
    };
    let before_rx_lanes = after_fo_or_pol(cfg.model, &after_fo, &after_pol);
    let clean = apply_lane_responses(&before_rx_lanes, &cfg.rx_lanes)?;
    let (received, noise_variance) = add_noise(&clean, cfg.snr_db, cfg.seed)?;

    Ok(SimOutput {
        model: cfg.model,
        transmitted: input.clone(),
        probes: ProbeRecord {
            after_tx_lanes,
            after_tx_pn,
            after_fo,
            after_cd,
            after_pol,
            before_rx_lanes,
            received,
        },
        fo,
        tx_phase,
        rx_phase,
        carrier,
        group_delay: cfg.group_delay(),
        noise_variance,
        edge_guard: cfg.edge_guard(),
    })
}

fn after_fo_or_pol(model: ChannelModel, after_fo: &RealQuadSignal, after_pol: &RealQuadSignal) -> RealQuadSignal {
    match model {
        ChannelModel::BackToBack => after_pol.clone(),
        ChannelModel::Ordered => after_fo.clone(),
    }
}

/// White Gaussian noise with equal variance on every lane, scaled against the
/// mean lane power of `x`.
pub fn add_noise(x: &RealQuadSignal, snr_db: Option<f64>, seed: u64) -> Result<(RealQuadSignal, f64)> {
    let Some(snr_db) = snr_db else {
        return Ok((x.clone(), 0.0));
    };
    let variance = x.mean_lane_power() / 10f64.powf(snr_db / 10.0);
    if variance == 0.0 {
        return Ok((x.clone(), 0.0));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid("snr_db", e.to_string()))?;
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let mut lanes = x.lanes().clone();
    for lane in lanes.iter_mut() {
        for v in lane.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok((RealQuadSignal::new(lanes, x.sample_rate())?, variance))
}

//! Scenario files: JSON documents mirroring the channel configuration plus
//! the signal, equalizer and output settings. Every physical quantity
//! carries its unit in the key name.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mimo_lab::channel::{ChannelConfig, ChannelModel, LaneResponse, PolarizationParams};
use mimo_lab::equalizer::{ClassLabel, LmsSettings, Topology, TopologyKind, DEFAULT_TAPS};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub signal: SignalSection,
    #[serde(default)]
    pub equalizer: EqualizerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    #[default]
    BackToBack,
    Ordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSection {
    #[serde(default = "one")]
    pub gain_linear: f64,
    #[serde(default)]
    pub skew_samples: f64,
    /// Low-pass cutoff as a fraction of Nyquist; `null` is all-pass.
    #[serde(default)]
    pub cutoff_nyquist_fraction: Option<f64>,
}

impl Default for LaneSection {
    fn default() -> Self {
        Self {
            gain_linear: 1.0,
            skew_samples: 0.0,
            cutoff_nyquist_fraction: None,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizationSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for PolarizationSection {
    fn default() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default)]
    pub model: Model,
    /// Lanes in the order xi, xq, yi, yq.
    #[serde(default)]
    pub tx_lanes: [LaneSection; 4],
    #[serde(default)]
    pub rx_lanes: [LaneSection; 4],
    #[serde(default)]
    pub polarization: PolarizationSection,
    #[serde(default)]
    pub cd_total_rad_sample2: f64,
    #[serde(default)]
    pub fo_rad_per_sample: f64,
    #[serde(default)]
    pub fo_ramp_rad_per_sample2: f64,
    #[serde(default)]
    pub tx_linewidth_rad2_per_sample: f64,
    #[serde(default)]
    pub rx_linewidth_rad2_per_sample: f64,
    /// `null` is noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    #[default]
    Qpsk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    #[serde(default)]
    pub modulation: Modulation,
    #[serde(default = "default_sps")]
    pub samples_per_symbol: usize,
    #[serde(default = "default_symbols")]
    pub symbol_count: usize,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self {
            modulation: Modulation::Qpsk,
            samples_per_symbol: default_sps(),
            symbol_count: default_symbols(),
        }
    }
}

fn default_sps() -> usize {
    2
}

fn default_symbols() -> usize {
    50_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassName {
    I,
    II,
    III,
    IV,
}

impl From<ClassName> for ClassLabel {
    fn from(c: ClassName) -> Self {
        match c {
            ClassName::I => ClassLabel::I,
            ClassName::II => ClassLabel::II,
            ClassName::III => ClassLabel::III,
            ClassName::IV => ClassLabel::IV,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyName {
    #[serde(rename = "real_4x4")]
    Real4x4,
    #[serde(rename = "complex_2x2")]
    Complex2x2,
    #[serde(rename = "complex_2x4")]
    Complex2x4,
    #[serde(rename = "widely_linear_2x4")]
    WidelyLinear2x4,
    #[serde(rename = "widely_linear_2x8")]
    WidelyLinear2x8,
}

impl From<TopologyName> for TopologyKind {
    fn from(t: TopologyName) -> Self {
        match t {
            TopologyName::Real4x4 => TopologyKind::Real4x4,
            TopologyName::Complex2x2 => TopologyKind::Complex2x2,
            TopologyName::Complex2x4 => TopologyKind::Complex2x4,
            TopologyName::WidelyLinear2x4 => TopologyKind::WidelyLinear2x4,
            TopologyName::WidelyLinear2x8 => TopologyKind::WidelyLinear2x8,
        }
    }
}

impl From<TopologyKind> for TopologyName {
    fn from(t: TopologyKind) -> Self {
        match t {
            TopologyKind::Real4x4 => TopologyName::Real4x4,
            TopologyKind::Complex2x2 => TopologyName::Complex2x2,
            TopologyKind::Complex2x4 => TopologyName::Complex2x4,
            TopologyKind::WidelyLinear2x4 => TopologyName::WidelyLinear2x4,
            TopologyKind::WidelyLinear2x8 => TopologyName::WidelyLinear2x8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerSection {
    #[serde(default = "default_class")]
    pub class: ClassName,
    /// `null` picks the class default; resolved before echoing.
    #[serde(default)]
    pub topology: Option<TopologyName>,
    #[serde(default = "default_taps")]
    pub taps_per_branch: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_passes")]
    pub passes: usize,
}

impl Default for EqualizerSection {
    fn default() -> Self {
        Self {
            class: default_class(),
            topology: None,
            taps_per_branch: default_taps(),
            mu: default_mu(),
            passes: default_passes(),
        }
    }
}

fn default_class() -> ClassName {
    ClassName::II
}

fn default_taps() -> usize {
    DEFAULT_TAPS
}

fn default_mu() -> f64 {
    LmsSettings::default().mu
}

fn default_passes() -> usize {
    LmsSettings::default().passes
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl Scenario {
    /// Parse JSON text. Errors name the offending key path and position.
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("at `{path}`: {}", e.into_inner())
        })?;
        if scenario.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                scenario.schema_version
            );
        }
        Ok(scenario)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("invalid scenario {}", path.display()))
    }

    /// Fill every defaulted choice so the echo is complete, and check that
    /// the result is runnable.
    pub fn resolve(mut self, seed: Option<u64>) -> anyhow::Result<Self> {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        let class = ClassLabel::from(self.equalizer.class);
        self.equalizer.topology.get_or_insert(class.default_topology().into());
        let p = self.channel.polarization;
        let pol = PolarizationParams::normalized(p.a, p.b, p.c, p.d).context("channel.polarization")?;
        self.channel.polarization = PolarizationSection { a: pol.a, b: pol.b, c: pol.c, d: pol.d };
        self.channel_config().validate().context("channel")?;
        if self.signal.symbol_count == 0 {
            bail!("signal.symbol_count must be positive");
        }
        if !matches!(self.signal.samples_per_symbol, 1 | 2) {
            bail!("signal.samples_per_symbol must be 1 or 2");
        }
        self.topology().context("equalizer")?;
        if self.equalizer.passes == 0 {
            bail!("equalizer.passes must be positive");
        }
        if !(self.equalizer.mu > 0.0 && self.equalizer.mu.is_finite()) {
            bail!("equalizer.mu must be positive and finite");
        }
        Ok(self)
    }

    pub fn channel_config(&self) -> ChannelConfig {
        let lane = |l: &LaneSection| LaneResponse {
            gain: l.gain_linear,
            skew: l.skew_samples,
            bandwidth: l.cutoff_nyquist_fraction,
        };
        let c = &self.channel;
        let p = c.polarization;
        ChannelConfig {
            tx_lanes: c.tx_lanes.each_ref().map(lane),
            rx_lanes: c.rx_lanes.each_ref().map(lane),
            pol: PolarizationParams { a: p.a, b: p.b, c: p.c, d: p.d },
            cd_total: c.cd_total_rad_sample2,
            fo: c.fo_rad_per_sample,
            fo_ramp: c.fo_ramp_rad_per_sample2,
            tx_linewidth: c.tx_linewidth_rad2_per_sample,
            rx_linewidth: c.rx_linewidth_rad2_per_sample,
            snr_db: c.snr_db,
            seed: self.seed,
            model: match c.model {
                Model::BackToBack => ChannelModel::BackToBack,
                Model::Ordered => ChannelModel::Ordered,
            },
        }
    }

    pub fn class(&self) -> ClassLabel {
        self.equalizer.class.into()
    }

    pub fn topology(&self) -> mimo_lab::Result<Topology> {
        let kind = self
            .equalizer
            .topology
            .map(TopologyKind::from)
            .unwrap_or_else(|| self.class().default_topology());
        Topology::new(kind, self.equalizer.taps_per_branch)
    }

    pub fn lms_settings(&self) -> LmsSettings {
        LmsSettings {
            mu: self.equalizer.mu,
            passes: self.equalizer.passes,
        }
    }

    /// Rx skews relative to lane 1, as calibration reports them.
    pub fn relative_rx_skews(&self) -> [f64; 4] {
        let s = self.channel.rx_lanes.map(|l| l.skew_samples);
        s.map(|v| v - s[0])
    }

    pub fn noiseless(&self) -> bool {
        self.channel.snr_db.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_resolves() {
        let s = Scenario::from_json(r#"{"schema_version": 1}"#).unwrap().resolve(None).unwrap();
        assert_eq!(s.equalizer.topology, Some(TopologyName::Real4x4));
        assert_eq!(s.channel_config(), ChannelConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let text = r#"{"schema_version": 1, "channel": {"rx_lanes": [{"skew_ps_typo": 1.0}, {}, {}, {}]}}"#;
        let msg = format!("{:#}", Scenario::from_json(text).unwrap_err());
        assert!(msg.contains("skew_ps_typo"), "{msg}");
        assert!(msg.contains("channel.rx_lanes[0]"), "{msg}");
    }

    #[test]
    fn schema_version_is_checked() {
        assert!(Scenario::from_json(r#"{"schema_version": 2}"#).is_err());
        assert!(Scenario::from_json(r#"{}"#).is_err());
    }

    #[test]
    fn seed_override_and_normalization() {
        let text = r#"{"schema_version": 1, "seed": 3, "channel": {"polarization": {"a": 2, "b": 0, "c": 0, "d": 0}}}"#;
        let s = Scenario::from_json(text).unwrap().resolve(Some(9)).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.channel.polarization.a, 1.0);
    }

    #[test]
    fn invalid_combinations_rejected() {
        let bad = [
            r#"{"schema_version": 1, "channel": {"cd_total_rad_sample2": 5}}"#,
            r#"{"schema_version": 1, "equalizer": {"taps_per_branch": 4}}"#,
            r#"{"schema_version": 1, "signal": {"samples_per_symbol": 3}}"#,
            r#"{"schema_version": 1, "equalizer": {"mu": -1}}"#,
        ];
        for text in bad {
            assert!(Scenario::from_json(text).unwrap().resolve(None).is_err(), "{text}");
        }
    }
}

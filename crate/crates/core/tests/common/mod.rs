#![allow(dead_code)]

use mimo_lab::channel::{simulate, ChannelConfig, LaneResponse, SimOutput};
use mimo_lab::modem::{qpsk_waveform, QpskWaveform};

pub fn skewed(skews: [f64; 4]) -> [LaneResponse; 4] {
    skews.map(LaneResponse::delay)
}

/// QPSK at 2 samples/symbol through `cfg`.
pub fn run(cfg: &ChannelConfig, symbols: usize) -> (QpskWaveform, SimOutput) {
    let wave = qpsk_waveform(symbols, 2, cfg.seed).unwrap();
    let sim = simulate(cfg, &wave.waveform).unwrap();
    (wave, sim)
}

//! Built-in sweeps.

use super::config::ScenarioConfig;
use crate::phy::DecoderMode;

/// User-C SNRs 7.5, 8.5, ..., 14.5 and 15 dB.
fn sim_sweep() -> Vec<f64> {
    let mut v: Vec<f64> = (0..8).map(|i| 7.5 + i as f64).collect();
    v.push(15.0);
    v
}

/// Rate-identical QPSK and BPSK, A and B at 7 dB.
pub fn fig4(n_beacons: u64) -> Vec<ScenarioConfig> {
    [
        DecoderMode::RateIdenticalQpsk,
        DecoderMode::RateIdenticalBpsk,
    ]
    .into_iter()
    .map(|m| ScenarioConfig::new(m, [7.0, 7.0], sim_sweep(), n_beacons))
    .collect()
}

/// Direct and symbol-splitting rate-diverse modes, A and B at 7 dB.
pub fn fig7(n_beacons: u64) -> Vec<ScenarioConfig> {
    [DecoderMode::DrNcma, DecoderMode::SrNcma]
        .into_iter()
        .map(|m| ScenarioConfig::new(m, [7.0, 7.0], sim_sweep(), n_beacons))
        .collect()
}

/// All modes, A and B at 8 dB, C from 8 to 14 dB.
pub fn exp(n_beacons: u64) -> Vec<ScenarioConfig> {
    let c: Vec<f64> = (8..=14).map(f64::from).collect();
    DecoderMode::ALL
        .into_iter()
        .map(|m| ScenarioConfig::new(m, [8.0, 8.0], c.clone(), n_beacons))
        .collect()
}

pub const DEFAULT_BEACONS_SIM: u64 = 10_000;
pub const DEFAULT_BEACONS_EXP: u64 = 1_000;

/// Looks up a preset by name with its default length.
pub fn by_name(name: &str) -> Option<Vec<ScenarioConfig>> {
    match name {
        "fig4" => Some(fig4(DEFAULT_BEACONS_SIM)),
        "fig7" => Some(fig7(DEFAULT_BEACONS_SIM)),
        "exp" => Some(exp(DEFAULT_BEACONS_EXP)),
        _ => None,
    }
}

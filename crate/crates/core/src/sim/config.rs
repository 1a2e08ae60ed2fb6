use serde::Deserialize;

use crate::phy::DecoderMode;
use crate::{Error, Result};

/// SNR of user C: one value or a sweep.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    Fixed(f64),
    Sweep(Vec<f64>),
}

impl SnrSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            SnrSpec::Fixed(x) => vec![*x],
            SnrSpec::Sweep(v) => v.clone(),
        }
    }
}

/// Received SNRs in dB.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrConfig {
    pub a: f64,
    pub b: f64,
    pub c: SnrSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacParams {
    /// Message length per user in normalized BPSK packets.
    pub l: [usize; 3],
    /// A message is abandoned after `n_max_factor * L` packets.
    pub n_max_factor: usize,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            l: [8, 16, 32],
            n_max_factor: 4,
        }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_payload_bits() -> usize {
    64
}
fn default_llr_clip() -> f64 {
    crate::demod::DEFAULT_LLR_CLIP
}
fn default_batches() -> usize {
    10
}

/// One experiment: a decoder mode over a sweep of user-C SNRs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: DecoderMode,
    pub snr_db: SnrConfig,
    /// Slots per sweep point.
    pub n_beacons: u64,
    #[serde(default)]
    pub mac: MacParams,
    /// Information bits per (half-)packet, excluding CRC.
    #[serde(default = "default_payload_bits")]
    pub payload_bits: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_llr_clip")]
    pub llr_clip: f64,
    #[serde(default)]
    pub exact_llr: bool,
    /// Independent replications used for confidence intervals.
    #[serde(default = "default_batches")]
    pub batches: usize,
}

impl ScenarioConfig {
    /// Defaults for everything but mode, SNRs and length.
    pub fn new(mode: DecoderMode, snr_ab: [f64; 2], snr_c: Vec<f64>, n_beacons: u64) -> Self {
        ScenarioConfig {
            mode,
            snr_db: SnrConfig {
                a: snr_ab[0],
                b: snr_ab[1],
                c: SnrSpec::Sweep(snr_c),
            },
            n_beacons,
            mac: MacParams::default(),
            payload_bits: default_payload_bits(),
            seed: default_seed(),
            llr_clip: default_llr_clip(),
            exact_llr: false,
            batches: default_batches(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// SNR triples, one per sweep point.
    pub fn points(&self) -> Vec<[f64; 3]> {
        self.snr_db
            .c
            .points()
            .into_iter()
            .map(|c| [self.snr_db.a, self.snr_db.b, c])
            .collect()
    }

    pub fn n_max(&self) -> [usize; 3] {
        self.mac.l.map(|l| l * self.mac.n_max_factor)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_beacons == 0 {
            return bad("n_beacons must be at least 1".into());
        }
        if self.batches < 2 || self.n_beacons < self.batches as u64 {
            return bad(format!(
                "need 2 <= batches <= n_beacons, got {} batches for {} beacons",
                self.batches, self.n_beacons
            ));
        }
        let c = self.snr_db.c.points();
        if c.is_empty() {
            return bad("snr_db.c sweep is empty".into());
        }
        if !c
            .iter()
            .chain([&self.snr_db.a, &self.snr_db.b])
            .all(|x| x.is_finite())
        {
            return bad("SNRs must be finite".into());
        }
        if self.payload_bits == 0 || !self.payload_bits.is_multiple_of(8) {
            return bad(format!(
                "payload_bits must be a positive multiple of 8, got {}",
                self.payload_bits
            ));
        }
        if self.llr_clip.is_nan() || self.llr_clip <= 0.0 {
            return bad("llr_clip must be positive".into());
        }
        if self.mac.n_max_factor == 0 || self.mac.l.contains(&0) {
            return bad("L and n_max_factor must be at least 1".into());
        }
        for (s, (&n, scheme)) in self.n_max().iter().zip(self.mode.schemes()).enumerate() {
            if n > crate::mac::MAX_PACKETS || n % scheme.segments() != 0 {
                return bad(format!(
                    "n_max {n} of user {} must be a multiple of {} and at most {}",
                    crate::User::ALL[s],
                    scheme.segments(),
                    crate::mac::MAX_PACKETS
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
mode = "sr_ncma"
n_beacons = 200

[snr_db]
a = 7.0
b = 7.0
c = [7.5, 8.5]

[mac]
l = [8, 16, 32]
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ScenarioConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.mode, DecoderMode::SrNcma);
        assert_eq!(cfg.points(), vec![[7.0, 7.0, 7.5], [7.0, 7.0, 8.5]]);
        assert_eq!(cfg.n_max(), [32, 64, 128]);
        assert_eq!(cfg.batches, 10);
        assert!(!cfg.exact_llr);
    }

    #[test]
    fn scalar_snr_is_one_point() {
        let text = SAMPLE.replace("c = [7.5, 8.5]", "c = 15");
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap().points().len(), 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = SAMPLE.replace("n_beacons = 200", "n_beacons = 200\nbeacons = 3");
        assert!(matches!(
            ScenarioConfig::from_toml(&text),
            Err(Error::ConfigParse(_))
        ));
        let text = SAMPLE.replace("l = [8, 16, 32]", "l = [8, 16, 32]\nfactor = 2");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for (from, to) in [
            ("n_beacons = 200", "n_beacons = 0"),
            ("c = [7.5, 8.5]", "c = []"),
            ("c = [7.5, 8.5]", "c = [nan]"),
            ("l = [8, 16, 32]", "l = [8, 16, 31]\nn_max_factor = 1"),
            ("l = [8, 16, 32]", "l = [8, 16, 128]"),
            (
                "mode = \"sr_ncma\"",
                "mode = \"sr_ncma\"\npayload_bits = 12",
            ),
        ] {
            let text = SAMPLE.replace(from, to);
            assert!(
                matches!(ScenarioConfig::from_toml(&text), Err(Error::Config(_))),
                "{to}"
            );
        }
    }
}

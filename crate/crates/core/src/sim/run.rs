use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::ScenarioConfig;
use crate::channel::{derive_seed, draw_realization, transmit, ChannelParams};
use crate::demod::{DecodeTarget, LlrMetric};
use crate::mac::{MacConfig, MacLayer, MacStats};
use crate::modem::{modulate_packets, SymbolStream};
use crate::phy::{decode_targets, phy_bridge, BankOptions, DecodedEquation, DecoderMode};
use crate::{Result, User};

/// Receiver pipeline variant. Each tier adds one mechanism to the previous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    /// MUD decoders only.
    Mud,
    /// All decoders with in-slot bridging.
    Phy,
    /// Plus stored-equation bridging across slots.
    Mac,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Mud, Tier::Phy, Tier::Mac];

    pub fn name(self) -> &'static str {
        match self {
            Tier::Mud => "mud",
            Tier::Phy => "phy",
            Tier::Mac => "mac",
        }
    }
}

/// A throughput point estimate with its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    /// `value` with a Student-t interval from per-batch values.
    fn from_batches(value: f64, batches: &[f64]) -> Self {
        let n = batches.len() as f64;
        let mean = batches.iter().sum::<f64>() / n;
        let var = batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let t = StudentsT::new(0.0, 1.0, n - 1.0)
            .expect("at least two batches")
            .inverse_cdf(0.975);
        let half = t * (var / n).sqrt();
        Estimate {
            value,
            ci_low: value - half,
            ci_high: value + half,
        }
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Throughputs of one tier, in normalized BPSK packets per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TierThroughput {
    pub tier: Tier,
    /// `L_s · N_s / N_beacon` per user.
    pub users: [Estimate; 3],
    pub sys: Estimate,
    /// Decoded messages `N_s`.
    pub decoded: [u64; 3],
    pub abandoned: [u64; 3],
    /// Decoded messages or recovered packets that disagree with the sender.
    pub phantom: u64,
}

/// Results of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRecord {
    pub mode: DecoderMode,
    pub snr_db: [f64; 3],
    pub n_beacons: u64,
    pub seed: u64,
    /// Indexed by [`Tier`] order: MUD only, plus PHY bridging, plus MAC bridging.
    pub tiers: [TierThroughput; 3],
}

impl ThroughputRecord {
    pub fn tier(&self, tier: Tier) -> &TierThroughput {
        &self.tiers[tier as usize]
    }

    pub fn mud_only(&self) -> &TierThroughput {
        self.tier(Tier::Mud)
    }

    pub fn plus_phy_bridge(&self) -> &TierThroughput {
        self.tier(Tier::Phy)
    }

    pub fn plus_mac_bridge(&self) -> &TierThroughput {
        self.tier(Tier::Mac)
    }
}

/// One decoder's verdict in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub slot: u64,
    pub decoder: String,
    pub passed: bool,
}

struct SlotRunner<'a> {
    cfg: &'a ScenarioConfig,
    params: ChannelParams,
    opts: BankOptions,
    bank: Vec<DecodeTarget>,
    point: u64,
    batch: u64,
}

impl<'a> SlotRunner<'a> {
    fn new(cfg: &'a ScenarioConfig, snr_db: [f64; 3], point: u64, batch: u64) -> Self {
        SlotRunner {
            cfg,
            params: ChannelParams::new(snr_db, cfg.mode.schemes()),
            opts: BankOptions {
                metric: if cfg.exact_llr {
                    LlrMetric::Exact
                } else {
                    LlrMetric::LogMax
                },
                llr_clip: cfg.llr_clip,
            },
            bank: cfg.mode.bank(),
            point,
            batch,
        }
    }

    fn macs(&self) -> Result<[MacLayer; 3]> {
        let make = |tier: Tier| {
            MacLayer::new(
                MacConfig {
                    l: self.cfg.mac.l,
                    n_max: self.cfg.n_max(),
                    payload_bits: self.cfg.payload_bits,
                    bridging: tier == Tier::Mac,
                    seed: derive_seed(self.cfg.seed, &[self.point, self.batch, 2]),
                },
                self.cfg.mode,
            )
        };
        Ok([make(Tier::Mud)?, make(Tier::Phy)?, make(Tier::Mac)?])
    }

    /// Runs one slot for all tiers.
    ///
    /// The full system's packets go over the air once and the decoder bank
    /// runs once. The lower tiers see the same pass/fail pattern, restricted
    /// to their decoders, applied to the packets they would have sent, so the
    /// three tiers differ only in how decoder outputs are combined.
    fn step(
        &self,
        macs: &mut [MacLayer; 3],
        slot: u64,
        trace: Option<&mut Vec<TraceRow>>,
    ) -> Result<()> {
        let mode = self.cfg.mode;
        let plans = [
            macs[0].begin_slot(slot)?,
            macs[1].begin_slot(slot)?,
            macs[2].begin_slot(slot)?,
        ];
        let seed = |k: u64| derive_seed(self.cfg.seed, &[self.point, self.batch, slot, k]);
        let real = draw_realization(&self.params, seed(0));
        let mut noise = ChaCha8Rng::seed_from_u64(seed(1));
        let sent = &plans[Tier::Mac as usize];
        let schemes = mode.schemes();
        let streams: [SymbolStream; 3] = [
            modulate_packets(schemes[0], &sent.packets[0])?,
            modulate_packets(schemes[1], &sent.packets[1])?,
            modulate_packets(schemes[2], &sent.packets[2])?,
        ];
        let rx = transmit(streams, &real, &mut noise)?;
        let out = decode_targets(&rx, mode, &self.bank, slot, &self.opts)?;

        for tier in [Tier::Mud, Tier::Phy] {
            let plan = &plans[tier as usize];
            let eqs: Vec<DecodedEquation> = self
                .bank
                .iter()
                .zip(&out.trace)
                .filter(|(t, (_, passed))| *passed && (tier != Tier::Mud || t.is_mud()))
                .map(|(t, _)| {
                    let coeffs = mode.coeffs_of(t);
                    DecodedEquation {
                        coeffs,
                        payload: plan.combination(mode, coeffs),
                        slot,
                        source: t.label.clone(),
                    }
                })
                .collect();
            macs[tier as usize].end_slot(plan, phy_bridge(&eqs));
        }
        macs[Tier::Mac as usize].end_slot(sent, phy_bridge(&out.equations));

        if let Some(trace) = trace {
            trace.extend(out.trace.into_iter().map(|(decoder, passed)| TraceRow {
                slot,
                decoder,
                passed,
            }));
        }
        Ok(())
    }
}

fn batch_sizes(total: u64, batches: usize) -> Vec<u64> {
    let b = batches as u64;
    (0..b)
        .map(|i| total / b + u64::from(i < total % b))
        .collect()
}

/// Runs one replication of all three tiers.
fn run_batch(
    cfg: &ScenarioConfig,
    snr_db: [f64; 3],
    point: u64,
    batch: u64,
    slots: u64,
) -> Result<[MacStats; 3]> {
    let runner = SlotRunner::new(cfg, snr_db, point, batch);
    let mut macs = runner.macs()?;
    for slot in 1..=slots {
        runner.step(&mut macs, slot, None)?;
    }
    Ok(macs.map(|m| m.stats().clone()))
}

fn summarize(tier: Tier, l: [usize; 3], sizes: &[u64], stats: &[[MacStats; 3]]) -> TierThroughput {
    let total: u64 = sizes.iter().sum();
    let per_batch: Vec<&MacStats> = stats.iter().map(|s| &s[tier as usize]).collect();
    let th = |s: &MacStats, slots: u64, u: usize| l[u] as f64 * s.decoded[u] as f64 / slots as f64;
    let mut decoded = [0u64; 3];
    let mut abandoned = [0u64; 3];
    let mut phantom = 0;
    for s in &per_batch {
        for u in 0..3 {
            decoded[u] += s.decoded[u];
            abandoned[u] += s.abandoned[u];
        }
        phantom += s.phantom + s.phantom_packets;
    }
    let users: [Estimate; 3] = std::array::from_fn(|u| {
        let batches: Vec<f64> = per_batch
            .iter()
            .zip(sizes)
            .map(|(s, &n)| th(s, n, u))
            .collect();
        Estimate::from_batches(l[u] as f64 * decoded[u] as f64 / total as f64, &batches)
    });
    let sys_batches: Vec<f64> = per_batch
        .iter()
        .zip(sizes)
        .map(|(s, &n)| (0..3).map(|u| th(s, n, u)).sum())
        .collect();
    let sys = Estimate::from_batches(users.iter().map(|e| e.value).sum(), &sys_batches);
    TierThroughput {
        tier,
        users,
        sys,
        decoded,
        abandoned,
        phantom,
    }
}

/// Runs every sweep point of `cfg` through the three tiers.
///
/// Slots are split into `cfg.batches` independent replications, each with
/// its own seeded channel, noise and MAC state; batches run in parallel.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ThroughputRecord>> {
    cfg.validate()?;
    let points = cfg.points();
    let sizes = batch_sizes(cfg.n_beacons, cfg.batches);
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.batches).map(move |b| (p, b)))
        .collect();
    let results: Vec<[MacStats; 3]> = jobs
        .par_iter()
        .map(|&(p, b)| run_batch(cfg, points[p], p as u64, b as u64, sizes[b]))
        .collect::<Result<_>>()?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(p, &snr_db)| {
            let stats = &results[p * cfg.batches..(p + 1) * cfg.batches];
            ThroughputRecord {
                mode: cfg.mode,
                snr_db,
                n_beacons: cfg.n_beacons,
                seed: cfg.seed,
                tiers: Tier::ALL.map(|t| summarize(t, cfg.mac.l, &sizes, stats)),
            }
        })
        .collect())
}

/// Per-slot decoder verdicts for the first
/// `slots` slots of sweep point `point`, first batch.
pub fn trace_scenario(cfg: &ScenarioConfig, point: usize, slots: u64) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let snr = *cfg
        .points()
        .get(point)
        .ok_or_else(|| crate::Error::Config(format!("no sweep point {point}")))?;
    let runner = SlotRunner::new(cfg, snr, point as u64, 0);
    let mut macs = runner.macs()?;
    let mut rows = Vec::new();
    for slot in 1..=slots {
        runner.step(&mut macs, slot, Some(&mut rows))?;
    }
    Ok(rows)
}

const HEADER: [&str; 11] = [
    "mode",
    "snr_a_db",
    "snr_b_db",
    "snr_c_db",
    "tier",
    "series",
    "throughput",
    "ci_low",
    "ci_high",
    "n_beacons",
    "seed",
];

/// Writes one row per (sweep point, tier, series) in input order.
pub fn write_results<W: std::io::Write>(records: &[ThroughputRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        for t in &r.tiers {
            let series = User::ALL
                .iter()
                .map(|u| (u.to_string(), t.users[u.index()]))
                .chain([("sys".to_string(), t.sys)]);
            for (name, e) in series {
                w.write_record([
                    r.mode.name().to_string(),
                    r.snr_db[0].to_string(),
                    r.snr_db[1].to_string(),
                    r.snr_db[2].to_string(),
                    t.tier.name().to_string(),
                    name,
                    format!("{:.6}", e.value),
                    format!("{:.6}", e.ci_low),
                    format!("{:.6}", e.ci_high),
                    r.n_beacons.to_string(),
                    r.seed.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_results(records: &[ThroughputRecord], path: &std::path::Path) -> Result<()> {
    write_results(records, std::fs::File::create(path)?)
}

pub fn emit_trace(rows: &[TraceRow], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["slot", "decoder", "passed"])?;
    for r in rows {
        w.write_record([
            r.slot.to_string(),
            r.decoder.clone(),
            u8::from(r.passed).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

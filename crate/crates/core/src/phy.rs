//! Per-slot decoder bank and PHY-layer bridging.
//!
//! Each decoder demodulates one target, runs the standard Viterbi decoder and
//! keeps the output only if every half-packet CRC passes. A passing output is
//! a GF(2) equation over the slot's unknown packets. Gauss-Jordan
//! elimination over those equations then yields every native packet in their
//! row span; the remaining independent combinations are handed to the MAC
//! layer as unresolved equations.

use crate::bits;
use crate::channel::RxSlot;
use crate::demod::{DecodeTarget, LlrMetric, SlotMetrics, DEFAULT_LLR_CLIP};
use crate::fec::{crc_check, viterbi_decode, CRC_BITS, TAIL_BITS};
use crate::modem::{ModulationScheme, Rail};
use crate::{Result, User};

/// Receiver configuration: which modulations the users run and which
/// decoders the access point operates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    /// All BPSK; 3 MUD + 4 PNC decoders.
    RateIdenticalBpsk,
    /// All standard QPSK; 3 MUD + 4 PNC decoders.
    RateIdenticalQpsk,
    /// A, B BPSK and C standard QPSK; 3 MUD + `A⊕B`.
    DrNcma,
    /// A, B BPSK and C symbol-splitting QPSK; 4 MUD + 7 PNC decoders.
    SrNcma,
}

impl DecoderMode {
    pub const ALL: [DecoderMode; 4] = [
        DecoderMode::RateIdenticalBpsk,
        DecoderMode::RateIdenticalQpsk,
        DecoderMode::DrNcma,
        DecoderMode::SrNcma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecoderMode::RateIdenticalBpsk => "rate_identical_bpsk",
            DecoderMode::RateIdenticalQpsk => "rate_identical_qpsk",
            DecoderMode::DrNcma => "dr_ncma",
            DecoderMode::SrNcma => "sr_ncma",
        }
    }

    pub fn schemes(self) -> [ModulationScheme; 3] {
        use ModulationScheme::*;
        match self {
            DecoderMode::RateIdenticalBpsk => [Bpsk, Bpsk, Bpsk],
            DecoderMode::RateIdenticalQpsk => [QpskStandard, QpskStandard, QpskStandard],
            DecoderMode::DrNcma => [Bpsk, Bpsk, QpskStandard],
            DecoderMode::SrNcma => [Bpsk, Bpsk, QpskSplit],
        }
    }

    /// The slot's unknown packets, in coefficient-bit order.
    pub fn unknowns(self) -> Vec<Unknown> {
        let mut out = Vec::with_capacity(4);
        for (user, scheme) in User::ALL.into_iter().zip(self.schemes()) {
            match scheme {
                ModulationScheme::Bpsk => out.push(Unknown::new(user, 0, 1)),
                ModulationScheme::QpskStandard => out.push(Unknown::new(user, 0, 2)),
                ModulationScheme::QpskSplit => {
                    out.push(Unknown::new(user, 0, 1));
                    out.push(Unknown::new(user, 1, 1));
                }
            }
        }
        out
    }

    /// MUD targets followed by PNC targets.
    pub fn bank(self) -> Vec<DecodeTarget> {
        let t = |a, b, c, comp| DecodeTarget::new([a, b, c], comp).expect("static target");
        let (i, q) = (Some(Rail::I), Some(Rail::Q));
        match self {
            DecoderMode::RateIdenticalBpsk | DecoderMode::RateIdenticalQpsk => vec![
                t(true, false, false, None),
                t(false, true, false, None),
                t(false, false, true, None),
                t(true, true, false, None),
                t(true, false, true, None),
                t(false, true, true, None),
                t(true, true, true, None),
            ],
            DecoderMode::DrNcma => vec![
                t(true, false, false, None),
                t(false, true, false, None),
                t(false, false, true, None),
                t(true, true, false, None),
            ],
            DecoderMode::SrNcma => vec![
                t(true, false, false, None),
                t(false, true, false, None),
                t(false, false, true, i),
                t(false, false, true, q),
                t(true, true, false, None),
                t(true, false, true, i),
                t(true, false, true, q),
                t(false, true, true, i),
                t(false, true, true, q),
                t(true, true, true, i),
                t(true, true, true, q),
            ],
        }
    }

    /// Coefficient bitmask of `target` over [`DecoderMode::unknowns`].
    pub fn coeffs_of(self, target: &DecodeTarget) -> u8 {
        let mut mask = 0u8;
        if target.coeffs[0] {
            mask |= 1;
        }
        if target.coeffs[1] {
            mask |= 2;
        }
        if target.coeffs[2] {
            mask |= match (self, target.component) {
                (DecoderMode::SrNcma, Some(Rail::Q)) => 8,
                _ => 4,
            };
        }
        mask
    }

    pub fn n_unknowns(self) -> usize {
        self.unknowns().len()
    }
}

/// One unknown packet of a slot: a run of a user's half-packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Unknown {
    pub user: User,
    /// Index of the first half-packet within the user's slot transmission.
    pub first_segment: usize,
    pub segments: usize,
}

impl Unknown {
    fn new(user: User, first_segment: usize, segments: usize) -> Self {
        Unknown {
            user,
            first_segment,
            segments,
        }
    }
}

/// A CRC-validated decoder output over the slot's unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedEquation {
    /// Bit `i` set means unknown `i` participates.
    pub coeffs: u8,
    /// Concatenated `payload || crc` half-packets.
    pub payload: Vec<u8>,
    pub slot: u64,
    pub source: String,
}

/// Decoder tuning shared by every target in a bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankOptions {
    pub metric: LlrMetric,
    pub llr_clip: f64,
}

impl Default for BankOptions {
    fn default() -> Self {
        BankOptions {
            metric: LlrMetric::LogMax,
            llr_clip: DEFAULT_LLR_CLIP,
        }
    }
}

/// Equations plus a per-decoder pass/fail trace.
#[derive(Debug, Clone, Default)]
pub struct BankOutput {
    pub equations: Vec<DecodedEquation>,
    pub trace: Vec<(String, bool)>,
}

/// Splits concatenated half-packets and checks each CRC.
pub fn segments_valid(payload: &[u8], segments: usize) -> bool {
    segments > 0
        && payload.len().is_multiple_of(segments)
        && payload.len() / segments > CRC_BITS
        && payload.chunks(payload.len() / segments).all(crc_check)
}

fn involves_standard_qpsk(mode: DecoderMode, target: &DecodeTarget) -> bool {
    let schemes = mode.schemes();
    target
        .users()
        .any(|u| schemes[u.index()] == ModulationScheme::QpskStandard)
}

/// Runs `targets` on one slot and keeps the CRC-passing outputs.
pub fn decode_targets(
    rx: &RxSlot,
    mode: DecoderMode,
    targets: &[DecodeTarget],
    slot: u64,
    opts: &BankOptions,
) -> Result<BankOutput> {
    let metrics = SlotMetrics::new(rx, opts.metric)?;
    let mut out = BankOutput::default();
    for target in targets {
        let soft = metrics.soft_bits(target, opts.llr_clip)?;
        let mut info = viterbi_decode(&soft);
        let segments = if involves_standard_qpsk(mode, target) {
            info.truncate(info.len().saturating_sub(TAIL_BITS));
            2
        } else {
            1
        };
        let passed = segments_valid(&info, segments);
        out.trace.push((target.label.clone(), passed));
        if passed {
            out.equations.push(DecodedEquation {
                coeffs: mode.coeffs_of(target),
                payload: info,
                slot,
                source: target.label.clone(),
            });
        }
    }
    Ok(out)
}

/// Full decoder bank of `mode`.
pub fn run_decoder_bank(
    rx: &RxSlot,
    mode: DecoderMode,
    slot: u64,
    opts: &BankOptions,
) -> Result<Vec<DecodedEquation>> {
    Ok(decode_targets(rx, mode, &mode.bank(), slot, opts)?.equations)
}

/// A native packet recovered inside one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NativePacket {
    pub unknown: usize,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotOutcome {
    pub natives: Vec<NativePacket>,
    pub unresolved: Vec<DecodedEquation>,
    /// Equations dropped because they contradicted earlier ones.
    pub anomalies: usize,
}

/// Reduces `(coeffs, payload)` against a basis kept in reduced form.
fn reduce(basis: &[(u8, Vec<u8>)], coeffs: u8, payload: &[u8]) -> (u8, Vec<u8>) {
    let mut c = coeffs;
    let mut p = payload.to_vec();
    for (bc, bp) in basis {
        let pivot = bc & bc.wrapping_neg();
        if c & pivot != 0 {
            c ^= bc;
            bits::xor_in_place(&mut p, bp);
        }
    }
    (c, p)
}

/// Gauss-Jordan elimination over GF(2) across one slot's equations.
///
/// Equations are taken in order; one whose coefficients are already in the
/// span of earlier ones is dropped, and counted as an anomaly if its payload
/// disagrees with what the earlier ones imply.
pub fn phy_bridge(eqs: &[DecodedEquation]) -> SlotOutcome {
    let mut outcome = SlotOutcome::default();
    let slot = eqs.first().map_or(0, |e| e.slot);
    // Rows in reduced echelon form; pivot = lowest set bit.
    let mut basis: Vec<(u8, Vec<u8>)> = Vec::new();
    for eq in eqs {
        if eq.coeffs == 0 {
            continue;
        }
        let (c, p) = reduce(&basis, eq.coeffs, &eq.payload);
        if c == 0 {
            if p.iter().any(|&b| b != 0) {
                outcome.anomalies += 1;
            }
            continue;
        }
        // `c` holds no existing pivot; clearing its pivot from older rows
        // keeps the basis fully reduced.
        let pivot = c & c.wrapping_neg();
        for (bc, bp) in basis.iter_mut() {
            if *bc & pivot != 0 {
                *bc ^= c;
                bits::xor_in_place(bp, &p);
            }
        }
        basis.push((c, p));
    }
    basis.sort_by_key(|(c, _)| c.trailing_zeros());
    for (c, p) in basis {
        if c.count_ones() == 1 {
            outcome.natives.push(NativePacket {
                unknown: c.trailing_zeros() as usize,
                payload: p,
            });
        } else {
            outcome.unresolved.push(DecodedEquation {
                coeffs: c,
                payload: p,
                slot,
                source: "phy-bridge".into(),
            });
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_realization, transmit, ChannelParams};
    use crate::fec::{crc_attach, InfoPacket};
    use crate::modem::modulate_packets;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eq(coeffs: u8, payload: Vec<u8>) -> DecodedEquation {
        DecodedEquation {
            coeffs,
            payload,
            slot: 0,
            source: String::new(),
        }
    }

    /// Truthful equation for `coeffs` over random unknown payloads.
    fn truthful(unknowns: &[Vec<u8>], coeffs: u8) -> DecodedEquation {
        let mut p = vec![0u8; unknowns[0].len()];
        for (i, u) in unknowns.iter().enumerate() {
            if coeffs & (1 << i) != 0 {
                bits::xor_in_place(&mut p, u);
            }
        }
        eq(coeffs, p)
    }

    fn unknowns(n: usize, seed: u64) -> Vec<Vec<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| crc_attach(&bits::random(&mut rng, 64)).bits())
            .collect()
    }

    #[test]
    fn bank_sizes() {
        assert_eq!(DecoderMode::SrNcma.bank().len(), 11);
        assert_eq!(DecoderMode::DrNcma.bank().len(), 4);
        assert_eq!(DecoderMode::RateIdenticalBpsk.bank().len(), 7);
        assert_eq!(DecoderMode::SrNcma.n_unknowns(), 4);
        assert_eq!(DecoderMode::DrNcma.n_unknowns(), 3);
        let sr = DecoderMode::SrNcma;
        let coeffs: Vec<u8> = sr.bank().iter().map(|t| sr.coeffs_of(t)).collect();
        assert_eq!(coeffs, vec![1, 2, 4, 8, 3, 5, 9, 6, 10, 7, 11]);
        // Every bank target is valid for its mode's schemes.
        for mode in DecoderMode::ALL {
            for t in mode.bank() {
                t.rail_products(&mode.schemes()).unwrap();
            }
        }
    }

    #[test]
    fn two_user_bridging() {
        let u = unknowns(3, 1);
        let out = phy_bridge(&[truthful(&u, 0b001), truthful(&u, 0b011)]);
        let natives: Vec<_> = out
            .natives
            .iter()
            .map(|n| (n.unknown, n.payload.clone()))
            .collect();
        assert_eq!(natives, vec![(0, u[0].clone()), (1, u[1].clone())]);
        assert!(out.unresolved.is_empty());
    }

    #[test]
    fn two_xors_yield_third_user() {
        let u = unknowns(3, 2);
        let out = phy_bridge(&[truthful(&u, 0b011), truthful(&u, 0b111)]);
        assert_eq!(
            out.natives,
            vec![NativePacket {
                unknown: 2,
                payload: u[2].clone()
            }]
        );
        assert_eq!(out.unresolved.len(), 1);
        assert_eq!(out.unresolved[0].coeffs, 0b011);
        assert!(segments_valid(&out.unresolved[0].payload, 1));
    }

    #[test]
    fn native_plus_triple_leaves_pair() {
        let u = unknowns(3, 3);
        let out = phy_bridge(&[truthful(&u, 0b010), truthful(&u, 0b111)]);
        assert_eq!(
            out.natives,
            vec![NativePacket {
                unknown: 1,
                payload: u[1].clone()
            }]
        );
        assert_eq!(out.unresolved.len(), 1);
        assert_eq!(out.unresolved[0].coeffs, 0b101);
        assert_eq!(out.unresolved[0].payload, bits::xor(&u[0], &u[2]));
    }

    #[test]
    fn inconsistent_duplicate_is_flagged_and_dropped() {
        let u = unknowns(3, 4);
        let good = truthful(&u, 0b001);
        let mut bad = good.clone();
        bad.payload[0] ^= 1;
        let out = phy_bridge(&[good.clone(), bad, good]);
        assert_eq!(out.anomalies, 1);
        assert_eq!(out.natives.len(), 1);
        assert_eq!(out.natives[0].payload, u[0]);
    }

    #[test]
    fn empty_input() {
        assert_eq!(phy_bridge(&[]), SlotOutcome::default());
    }

    /// Exhaustive XOR search: unknown i is recoverable iff some subset of
    /// the equations sums to the unit vector e_i.
    fn brute_force_recoverable(eqs: &[DecodedEquation]) -> Vec<(usize, Vec<u8>)> {
        let mut found: Vec<Option<Vec<u8>>> = vec![None; 4];
        for subset in 1u32..(1 << eqs.len()) {
            let mut c = 0u8;
            let mut p = vec![0u8; eqs[0].payload.len()];
            for (i, e) in eqs.iter().enumerate() {
                if subset & (1 << i) != 0 {
                    c ^= e.coeffs;
                    bits::xor_in_place(&mut p, &e.payload);
                }
            }
            if c.count_ones() == 1 {
                found[c.trailing_zeros() as usize].get_or_insert(p);
            }
        }
        found
            .into_iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i, p)))
            .collect()
    }

    #[test]
    fn matches_brute_force_on_every_sr_subset() {
        let u = unknowns(4, 5);
        let mode = DecoderMode::SrNcma;
        let all: Vec<DecodedEquation> = mode
            .bank()
            .iter()
            .map(|t| truthful(&u, mode.coeffs_of(t)))
            .collect();
        for subset in 0u32..(1 << all.len()) {
            let eqs: Vec<_> = (0..all.len())
                .filter(|i| subset & (1 << i) != 0)
                .map(|i| all[i].clone())
                .collect();
            let out = phy_bridge(&eqs);
            let got: Vec<_> = out
                .natives
                .iter()
                .map(|n| (n.unknown, n.payload.clone()))
                .collect();
            let want = if eqs.is_empty() {
                vec![]
            } else {
                brute_force_recoverable(&eqs)
            };
            assert_eq!(got, want, "subset {subset:#x}");
            for (i, p) in &got {
                assert_eq!(p, &u[*i]);
            }
            // Span preservation: rank(in) = natives + unresolved.
            let rank = {
                let mut basis: Vec<u8> = Vec::new();
                for e in &eqs {
                    let mut c = e.coeffs;
                    for b in &basis {
                        c = c.min(c ^ b);
                    }
                    if c != 0 {
                        basis.push(c);
                        basis.sort_unstable_by(|a, b| b.cmp(a));
                    }
                }
                basis.len()
            };
            assert_eq!(out.natives.len() + out.unresolved.len(), rank);
            for e in &out.unresolved {
                assert!(segments_valid(&e.payload, 1));
                assert!(out.natives.iter().all(|n| e.coeffs & (1 << n.unknown) == 0));
            }
        }
    }

    #[test]
    fn adding_equations_never_loses_natives() {
        let u = unknowns(4, 6);
        let mode = DecoderMode::SrNcma;
        let all: Vec<DecodedEquation> = mode
            .bank()
            .iter()
            .map(|t| truthful(&u, mode.coeffs_of(t)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            use rand::Rng;
            let mut eqs = Vec::new();
            let mut prev: Vec<usize> = Vec::new();
            for _ in 0..6 {
                eqs.push(all[rng.random_range(0..all.len())].clone());
                let now: Vec<usize> = phy_bridge(&eqs).natives.iter().map(|n| n.unknown).collect();
                assert!(prev.iter().all(|p| now.contains(p)));
                prev = now;
            }
        }
    }

    fn sr_slot(snr_db: [f64; 3], seed: u64) -> (RxSlot, Vec<InfoPacket>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pkts: Vec<_> = (0..4)
            .map(|_| crc_attach(&bits::random(&mut rng, 64)))
            .collect();
        let streams = [
            modulate_packets(ModulationScheme::Bpsk, &pkts[0..1]).unwrap(),
            modulate_packets(ModulationScheme::Bpsk, &pkts[1..2]).unwrap(),
            modulate_packets(ModulationScheme::QpskSplit, &pkts[2..4]).unwrap(),
        ];
        let params = ChannelParams::new(snr_db, DecoderMode::SrNcma.schemes());
        let real = draw_realization(&params, seed);
        (transmit(streams, &real, &mut rng).unwrap(), pkts)
    }

    #[test]
    fn high_snr_passes_every_decoder() {
        let (rx, pkts) = sr_slot([35.0, 35.0, 38.0], 10);
        let eqs = run_decoder_bank(&rx, DecoderMode::SrNcma, 0, &BankOptions::default()).unwrap();
        assert_eq!(eqs.len(), 11);
        let out = phy_bridge(&eqs);
        assert_eq!(out.natives.len(), 4);
        for n in &out.natives {
            assert_eq!(n.payload, pkts[n.unknown].bits());
        }
        assert!(out.unresolved.is_empty());
    }

    #[test]
    fn noise_dominated_slot_decodes_nothing() {
        let (rx, _) = sr_slot([-20.0, -20.0, -20.0], 11);
        let eqs = run_decoder_bank(&rx, DecoderMode::SrNcma, 0, &BankOptions::default()).unwrap();
        assert!(eqs.is_empty());
    }

    #[test]
    fn dr_mode_decodes_whole_qpsk_packet() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pkts: Vec<_> = (0..4)
            .map(|_| crc_attach(&bits::random(&mut rng, 64)))
            .collect();
        let mode = DecoderMode::DrNcma;
        let streams = [
            modulate_packets(ModulationScheme::Bpsk, &pkts[0..1]).unwrap(),
            modulate_packets(ModulationScheme::Bpsk, &pkts[1..2]).unwrap(),
            modulate_packets(ModulationScheme::QpskStandard, &pkts[2..4]).unwrap(),
        ];
        let real = draw_realization(&ChannelParams::new([30.0, 30.0, 33.0], mode.schemes()), 12);
        let rx = transmit(streams, &real, &mut rng).unwrap();
        let out = decode_targets(&rx, mode, &mode.bank(), 3, &BankOptions::default()).unwrap();
        assert_eq!(out.trace.len(), 4);
        assert!(out.trace.iter().all(|(_, ok)| *ok));
        let c = out.equations.iter().find(|e| e.coeffs == 4).unwrap();
        let mut expected = pkts[2].bits();
        expected.extend(pkts[3].bits());
        assert_eq!(c.payload, expected);
        assert_eq!(c.slot, 3);
        let bridged = phy_bridge(&out.equations);
        assert_eq!(bridged.natives.len(), 3);
    }
}

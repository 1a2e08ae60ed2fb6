use std::collections::BTreeMap;

use super::rs::{rs_encode, RsStream};
use crate::fec::crc_check;
use crate::phy::{phy_bridge, DecodedEquation};
use crate::{bits, User};

/// The RS packets behind one unknown of a slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRef {
    pub user: User,
    pub msg_id: u64,
    /// 1-based indices, one per half-packet segment of the unknown.
    pub indices: Vec<usize>,
}

/// A native packet obtained by substitution into stored equations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredPacket {
    pub user: User,
    pub msg_id: u64,
    pub index: usize,
    /// `payload || crc`.
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone)]
struct SlotRecord {
    /// `None` once the unknown is known or purged.
    unknowns: Vec<Option<PacketRef>>,
    equations: Vec<DecodedEquation>,
}

/// Unresolved equations of past slots, keyed by slot.
#[derive(Debug, Clone, Default)]
pub struct EquationStore {
    records: BTreeMap<u64, SlotRecord>,
}

/// Splits an unknown's concatenated payload into its indexed packets.
fn split(r: &PacketRef, payload: &[u8]) -> Vec<RecoveredPacket> {
    let width = payload.len() / r.indices.len();
    r.indices
        .iter()
        .zip(payload.chunks(width))
        .filter(|(_, chunk)| crc_check(chunk))
        .map(|(&index, chunk)| RecoveredPacket {
            user: r.user,
            msg_id: r.msg_id,
            index,
            bits: chunk.to_vec(),
        })
        .collect()
}

impl EquationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of stored equations across all slots.
    pub fn len(&self) -> usize {
        self.records.values().map(|r| r.equations.len()).sum()
    }

    /// Keeps a slot's unresolved equations. `refs[i]` describes unknown `i`.
    pub fn insert(&mut self, slot: u64, refs: Vec<PacketRef>, unresolved: Vec<DecodedEquation>) {
        if unresolved.is_empty() {
            return;
        }
        let mut unknowns: Vec<Option<PacketRef>> = refs.into_iter().map(Some).collect();
        let used = unresolved.iter().fold(0u8, |acc, e| acc | e.coeffs);
        for (i, u) in unknowns.iter_mut().enumerate() {
            if used & (1 << i) == 0 {
                *u = None;
            }
        }
        self.records.insert(
            slot,
            SlotRecord {
                unknowns,
                equations: unresolved,
            },
        );
    }

    /// Drops every equation that involves a packet of the given message.
    pub fn purge(&mut self, user: User, msg_id: u64) {
        for rec in self.records.values_mut() {
            for (i, u) in rec.unknowns.iter_mut().enumerate() {
                if u.as_ref()
                    .is_some_and(|r| r.user == user && r.msg_id == msg_id)
                {
                    rec.equations.retain(|e| e.coeffs & (1 << i) == 0);
                    *u = None;
                }
            }
        }
        self.records.retain(|_, r| !r.equations.is_empty());
    }

    /// Substitutes known packets of one message and re-eliminates each
    /// affected slot. `packet` returns `payload || crc` for an index.
    pub fn substitute(
        &mut self,
        user: User,
        msg_id: u64,
        mut packet: impl FnMut(usize) -> Vec<u8>,
    ) -> Vec<RecoveredPacket> {
        let mut found = Vec::new();
        for rec in self.records.values_mut() {
            let mut touched = false;
            for (i, u) in rec.unknowns.iter_mut().enumerate() {
                let Some(r) = u.as_ref().filter(|r| r.user == user && r.msg_id == msg_id) else {
                    continue;
                };
                let known: Vec<u8> = r.indices.iter().flat_map(|&ix| packet(ix)).collect();
                for eq in rec
                    .equations
                    .iter_mut()
                    .filter(|e| e.coeffs & (1 << i) != 0)
                {
                    bits::xor_in_place(&mut eq.payload, &known);
                    eq.coeffs &= !(1 << i);
                }
                *u = None;
                touched = true;
            }
            if !touched {
                continue;
            }
            let outcome = phy_bridge(&rec.equations);
            for native in outcome.natives {
                if let Some(r) = rec.unknowns[native.unknown].take() {
                    found.extend(split(&r, &native.payload));
                }
            }
            rec.equations = outcome.unresolved;
        }
        self.records.retain(|_, r| !r.equations.is_empty());
        found
    }
}

/// Regenerates every packet of a freshly decoded message and substitutes
/// it into the store. Returns the natives this exposes.
pub fn mac_bridge(store: &mut EquationStore, decoded: &RsStream) -> Vec<RecoveredPacket> {
    let msg = &decoded.message;
    store.substitute(msg.user, msg.msg_id, |i| {
        rs_encode(decoded, i)
            .expect("stored index within stream")
            .bits()
    })
}

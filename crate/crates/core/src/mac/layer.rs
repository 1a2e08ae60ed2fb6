use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rs::{rs_decode, rs_encode, Message, RsStream};
use super::store::{mac_bridge, EquationStore, PacketRef, RecoveredPacket};
use crate::channel::derive_seed;
use crate::fec::{InfoPacket, CRC_BITS};
use crate::phy::{DecoderMode, SlotOutcome};
use crate::{Error, Result, User};

/// Per-run MAC parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    /// Message length of each user, in half-packets.
    pub l: [usize; 3],
    /// Packets sent before a message is abandoned.
    pub n_max: [usize; 3],
    /// Payload bits per half-packet, excluding CRC. Must be a multiple of 8.
    pub payload_bits: usize,
    /// Keep unresolved equations across slots.
    pub bridging: bool,
    /// Seeds message contents.
    pub seed: u64,
}

impl MacConfig {
    fn validate(&self) -> Result<()> {
        if self.payload_bits == 0 || !self.payload_bits.is_multiple_of(8) {
            return Err(Error::Config(format!(
                "payload_bits must be a positive multiple of 8, got {}",
                self.payload_bits
            )));
        }
        Ok(())
    }
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MacStats {
    pub decoded: [u64; 3],
    pub abandoned: [u64; 3],
    /// Decoded messages that differ from what was sent.
    pub phantom: u64,
    /// Recovered packets that differ from what was sent.
    pub phantom_packets: u64,
    /// Packets contributed by stored-equation substitution.
    pub bridged_packets: u64,
}

/// What each user sends in one slot, and the packets behind each unknown.
#[derive(Debug, Clone)]
pub struct SlotPlan {
    pub slot: u64,
    /// Half-packets per user, in segment order.
    pub packets: [Vec<InfoPacket>; 3],
    pub refs: Vec<PacketRef>,
}

impl SlotPlan {
    /// XOR of the `payload || crc` bits of the unknowns selected by
    /// `coeffs`, each unknown being its segments concatenated.
    pub fn combination(&self, mode: DecoderMode, coeffs: u8) -> Vec<u8> {
        let mut acc: Vec<u8> = Vec::new();
        for (i, unk) in mode.unknowns().into_iter().enumerate() {
            if coeffs & (1 << i) == 0 {
                continue;
            }
            let p: Vec<u8> = self.packets[unk.user.index()]
                [unk.first_segment..unk.first_segment + unk.segments]
                .iter()
                .flat_map(|p| p.bits())
                .collect();
            if acc.is_empty() {
                acc = p;
            } else {
                crate::bits::xor_in_place(&mut acc, &p);
            }
        }
        acc
    }
}

#[derive(Debug, Clone)]
struct UserState {
    stream: RsStream,
    /// Next index to transmit.
    next_index: usize,
    recovered: BTreeMap<usize, Vec<u8>>,
}

/// Sender streams and receiver state for all three users.
#[derive(Debug, Clone)]
pub struct MacLayer {
    cfg: MacConfig,
    mode: DecoderMode,
    users: [UserState; 3],
    store: EquationStore,
    stats: MacStats,
}

fn message(cfg: &MacConfig, user: User, msg_id: u64) -> Message {
    let len = cfg.l[user.index()] * cfg.payload_bits / 8;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[user.index() as u64, msg_id]));
    let mut data = vec![0u8; len];
    rng.fill_bytes(&mut data);
    Message { user, msg_id, data }
}

impl MacLayer {
    pub fn new(cfg: MacConfig, mode: DecoderMode) -> Result<Self> {
        cfg.validate()?;
        for (u, scheme) in User::ALL.into_iter().zip(mode.schemes()) {
            if !cfg.n_max[u.index()].is_multiple_of(scheme.segments()) {
                return Err(Error::Config(format!(
                    "n_max of user {u} must be a multiple of {}",
                    scheme.segments()
                )));
            }
        }
        let users = [User::A, User::B, User::C].map(|u| -> Result<UserState> {
            Ok(UserState {
                stream: RsStream::new(message(&cfg, u, 0), cfg.l[u.index()], cfg.n_max[u.index()])?,
                next_index: 1,
                recovered: BTreeMap::new(),
            })
        });
        let [a, b, c] = users;
        Ok(MacLayer {
            users: [a?, b?, c?],
            cfg,
            mode,
            store: EquationStore::new(),
            stats: MacStats::default(),
        })
    }

    pub fn stats(&self) -> &MacStats {
        &self.stats
    }

    pub fn store(&self) -> &EquationStore {
        &self.store
    }

    /// Message currently being sent by `user`.
    pub fn current_message(&self, user: User) -> &Message {
        &self.users[user.index()].stream.message
    }

    /// Assigns the next RS indices of every user to this slot.
    pub fn begin_slot(&mut self, slot: u64) -> Result<SlotPlan> {
        let schemes = self.mode.schemes();
        let mut first = [0usize; 3];
        let mut packets: [Vec<InfoPacket>; 3] = Default::default();
        for u in User::ALL {
            let st = &mut self.users[u.index()];
            let segs = schemes[u.index()].segments();
            first[u.index()] = st.next_index;
            for k in 0..segs {
                packets[u.index()].push(rs_encode(&st.stream, st.next_index + k)?);
            }
            st.next_index += segs;
        }
        let refs = self
            .mode
            .unknowns()
            .into_iter()
            .map(|unk| {
                let start = first[unk.user.index()] + unk.first_segment;
                PacketRef {
                    user: unk.user,
                    msg_id: self.users[unk.user.index()].stream.message.msg_id,
                    indices: (start..start + unk.segments).collect(),
                }
            })
            .collect();
        Ok(SlotPlan {
            slot,
            packets,
            refs,
        })
    }

    fn accept(&mut self, p: RecoveredPacket) {
        let st = &mut self.users[p.user.index()];
        if st.stream.message.msg_id != p.msg_id {
            return;
        }
        let truth = rs_encode(&st.stream, p.index).map(|t| t.bits());
        if truth.as_deref().ok() != Some(p.bits.as_slice()) {
            self.stats.phantom_packets += 1;
        }
        st.recovered
            .entry(p.index)
            .or_insert_with(|| p.bits[..p.bits.len() - CRC_BITS].to_vec());
    }

    fn start_next(&mut self, user: User) {
        let st = &mut self.users[user.index()];
        let id = st.stream.message.msg_id + 1;
        st.stream = RsStream::new(message(&self.cfg, user, id), st.stream.l, st.stream.n_max)
            .expect("parameters validated at construction");
        st.next_index = 1;
        st.recovered.clear();
    }

    /// Folds one slot's PHY outcome into the receiver state. Returns how
    /// many messages each user completed in this slot.
    pub fn end_slot(&mut self, plan: &SlotPlan, outcome: SlotOutcome) -> [u32; 3] {
        let mut done = [0u32; 3];
        for native in &outcome.natives {
            let r = &plan.refs[native.unknown];
            let width = native.payload.len() / r.indices.len();
            for (&index, chunk) in r.indices.iter().zip(native.payload.chunks(width)) {
                self.accept(RecoveredPacket {
                    user: r.user,
                    msg_id: r.msg_id,
                    index,
                    bits: chunk.to_vec(),
                });
            }
        }
        if self.cfg.bridging {
            self.store
                .insert(plan.slot, plan.refs.clone(), outcome.unresolved);
        }

        let mut progressed = true;
        while progressed {
            progressed = false;
            for u in User::ALL {
                let st = &self.users[u.index()];
                let Some(data) = rs_decode(st.stream.l, &st.recovered) else {
                    continue;
                };
                progressed = true;
                done[u.index()] += 1;
                self.stats.decoded[u.index()] += 1;
                if data != st.stream.message.data {
                    self.stats.phantom += 1;
                }
                if self.cfg.bridging {
                    let decoded = RsStream::new(
                        Message {
                            data,
                            ..st.stream.message.clone()
                        },
                        st.stream.l,
                        st.stream.n_max,
                    )
                    .expect("same shape as the sent message");
                    let found = mac_bridge(&mut self.store, &decoded);
                    self.stats.bridged_packets += found.len() as u64;
                    for p in found {
                        self.accept(p);
                    }
                }
                self.start_next(u);
            }
        }

        for u in User::ALL {
            let st = &self.users[u.index()];
            if st.next_index > st.stream.n_max {
                self.stats.abandoned[u.index()] += 1;
                if self.cfg.bridging {
                    self.store.purge(u, st.stream.message.msg_id);
                }
                self.start_next(u);
            }
        }
        done
    }
}

//! Packet-level erasure coding and cross-slot bridging.
//!
//! Each user splits a message into `L` chunks and sends a stream of
//! Reed-Solomon packets, one per half-packet slot position. The receiver
//! collects native packets until any `L` distinct indices are in hand.
//! XOR equations that stay unresolved inside a slot are kept in an
//! [`EquationStore`] and revisited whenever a message decodes, since every
//! packet of that message can then be regenerated and substituted.

pub mod gf256;
mod layer;
mod rs;
mod store;

pub use layer::{MacConfig, MacLayer, MacStats, SlotPlan};
pub use rs::{rs_decode, rs_encode, Message, RsStream, MAX_PACKETS};
pub use store::{mac_bridge, EquationStore, PacketRef, RecoveredPacket};

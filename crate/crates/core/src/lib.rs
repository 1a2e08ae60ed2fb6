//! Link-level simulator for a three-user rate-diverse network-coded
//! multiple access (NCMA) uplink.
//!
//! Two users (A, B) send BPSK and one user (C) sends QPSK to a two-antenna
//! access point. The access point runs a bank of multiuser (MUD) and
//! physical-layer network coding (PNC) decoders on every slot, combines their
//! outputs by GF(2) elimination inside the slot ("PHY bridging"), and feeds
//! the result to per-user Reed-Solomon erasure decoders that also reuse
//! stored XOR packets once a message is known ("MAC bridging").
//!
//! Module map:
//!
//! * [`fec`]: rate-1/2 `[133, 171]` convolutional code, soft Viterbi, linear CRC-32.
//! * [`modem`]: BPSK, standard QPSK and symbol-splitting QPSK mapping.
//! * [`channel`]: block-fading two-antenna multiple access channel.
//! * [`demod`]: joint-constellation LLRs for every MUD/PNC target.
//! * [`phy`]: decoder bank and PHY bridging.
//! * [`mac`]: GF(2^8) Reed-Solomon streams and MAC bridging.
//! * [`sim`]: Monte Carlo harness, CSV output and the oracle suite.

pub mod bits;
pub mod channel;
pub mod demod;
pub mod error;
pub mod fec;
pub mod mac;
pub mod modem;
pub mod phy;
pub mod sim;
mod user;

pub use error::{Error, Result};
pub use user::User;

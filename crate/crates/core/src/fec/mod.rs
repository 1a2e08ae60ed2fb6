//! Forward error correction shared by every user and every decoder path.
//!
//! All users run the same rate-1/2, constraint-length-7 convolutional code
//! (generators 133/171 octal, as in IEEE 802.11) with zero termination, and
//! every packet carries a CRC-32 computed without pre/post inversion. Both
//! maps are linear over GF(2), so the XOR of two valid packets is itself a
//! valid packet. That is what lets a PNC decoder's output be validated with
//! the same CRC check as a native packet.
//!
//! LLR sign convention, used crate-wide: a positive LLR means bit 0 is more
//! likely.

mod conv;
mod crc;

pub use conv::{
    conv_encode, encoded_len, viterbi_decode, viterbi_decode_with, Codeword, SoftBits, TieRule,
    GENERATORS, TAIL_BITS,
};
pub use crc::{crc32, crc_attach, crc_check, InfoPacket, CRC_BITS, CRC_POLY};

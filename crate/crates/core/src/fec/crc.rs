use crate::bits;

/// CRC-32 generator (IEEE 802.3 polynomial, normal form).
pub const CRC_POLY: u32 = 0x04C1_1DB7;
pub const CRC_BITS: usize = 32;

/// Linear CRC-32: zero initial register, no reflection, no final XOR.
///
/// Computes the remainder of `payload(x) * x^32` modulo the generator, so
/// `crc32(a ^ b) == crc32(a) ^ crc32(b)` for equal-length inputs.
pub fn crc32(payload: &[u8]) -> u32 {
    payload.iter().fold(0u32, |reg, &bit| {
        let feedback = (reg >> 31) ^ u32::from(bit & 1);
        let reg = reg << 1;
        if feedback == 1 {
            reg ^ CRC_POLY
        } else {
            reg
        }
    })
}

/// A payload with its checksum appended.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InfoPacket {
    pub payload: Vec<u8>,
    pub crc: u32,
}

impl InfoPacket {
    /// Payload bits followed by the 32 CRC bits, MSB first.
    pub fn bits(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + CRC_BITS);
        out.extend_from_slice(&self.payload);
        out.extend((0..CRC_BITS).rev().map(|i| ((self.crc >> i) & 1) as u8));
        out
    }

    /// Splits `payload || crc` back into its parts without validating it.
    pub fn from_bits(bits: &[u8]) -> Option<InfoPacket> {
        let k = bits.len().checked_sub(CRC_BITS)?;
        let crc = bits[k..]
            .iter()
            .fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1));
        Some(InfoPacket {
            payload: bits[..k].to_vec(),
            crc,
        })
    }

    pub fn is_valid(&self) -> bool {
        crc32(&self.payload) == self.crc
    }

    pub fn xor(&self, other: &InfoPacket) -> InfoPacket {
        InfoPacket {
            payload: bits::xor(&self.payload, &other.payload),
            crc: self.crc ^ other.crc,
        }
    }
}

pub fn crc_attach(payload: &[u8]) -> InfoPacket {
    InfoPacket {
        payload: payload.to_vec(),
        crc: crc32(payload),
    }
}

/// Checks a `payload || crc` bit sequence.
pub fn crc_check(bits: &[u8]) -> bool {
    InfoPacket::from_bits(bits).is_some_and(|p| p.is_valid())
}

//! Systematic Reed-Solomon erasure code over GF(2^8).
//!
//! A message of `L` chunks defines the unique polynomial of degree `< L`
//! taking chunk `j` at field point `j`. Packet `i` (1-based) is that
//! polynomial evaluated at point `i - 1`, applied byte-column-wise, so
//! packets `1..=L` are the chunks themselves and any `L` distinct packets
//! determine the rest by interpolation.

use std::collections::BTreeMap;

use super::gf256;
use crate::bits;
use crate::fec::{crc_attach, InfoPacket};
use crate::{Error, Result, User};

/// Largest stream length: one packet per field element.
pub const MAX_PACKETS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub user: User,
    pub msg_id: u64,
    pub data: Vec<u8>,
}

/// Lagrange weights `w_m` with `P(x) = Σ w_m · P(points[m])`.
fn lagrange_weights(points: &[u8], x: u8) -> Vec<u8> {
    points
        .iter()
        .enumerate()
        .map(|(m, &pm)| {
            let mut num = 1u8;
            let mut den = 1u8;
            for (j, &pj) in points.iter().enumerate() {
                if j != m {
                    num = gf256::mul(num, x ^ pj);
                    den = gf256::mul(den, pm ^ pj);
                }
            }
            gf256::div(num, den)
        })
        .collect()
}

fn point(index: usize) -> u8 {
    (index - 1) as u8
}

/// The packet stream of one message.
#[derive(Debug, Clone)]
pub struct RsStream {
    pub message: Message,
    pub l: usize,
    pub n_max: usize,
    chunk_bytes: usize,
}

impl RsStream {
    pub fn new(message: Message, l: usize, n_max: usize) -> Result<Self> {
        if l == 0 || n_max < l || n_max > MAX_PACKETS {
            return Err(Error::Config(format!(
                "need 1 <= L <= n_max <= {MAX_PACKETS}, got L={l}, n_max={n_max}"
            )));
        }
        if message.data.is_empty() || !message.data.len().is_multiple_of(l) {
            return Err(Error::LengthMismatch {
                expected: l,
                actual: message.data.len(),
            });
        }
        let chunk_bytes = message.data.len() / l;
        Ok(RsStream {
            message,
            l,
            n_max,
            chunk_bytes,
        })
    }

    fn chunk(&self, j: usize) -> &[u8] {
        &self.message.data[j * self.chunk_bytes..(j + 1) * self.chunk_bytes]
    }

    /// Payload bytes of packet `index` (1-based).
    pub fn packet_bytes(&self, index: usize) -> Result<Vec<u8>> {
        if index == 0 || index > self.n_max {
            return Err(Error::IndexOutOfRange {
                index,
                n_max: self.n_max,
            });
        }
        if index <= self.l {
            return Ok(self.chunk(index - 1).to_vec());
        }
        let points: Vec<u8> = (1..=self.l).map(point).collect();
        let weights = lagrange_weights(&points, point(index));
        let mut out = vec![0u8; self.chunk_bytes];
        for (j, &w) in weights.iter().enumerate() {
            gf256::mul_acc(&mut out, self.chunk(j), w);
        }
        Ok(out)
    }
}

/// Packet `index` of the stream as a CRC-protected info packet.
pub fn rs_encode(stream: &RsStream, index: usize) -> Result<InfoPacket> {
    Ok(crc_attach(&bits::from_bytes(&stream.packet_bytes(index)?)))
}

/// Recovers the message data from any `l` distinct-index packets.
///
/// `packets` maps 1-based index to payload bits. Returns `None` while fewer
/// than `l` distinct indices are available.
pub fn rs_decode(l: usize, packets: &BTreeMap<usize, Vec<u8>>) -> Option<Vec<u8>> {
    if packets.len() < l || l == 0 {
        return None;
    }
    let chosen: Vec<(usize, Vec<u8>)> = packets
        .iter()
        .take(l)
        .map(|(&i, p)| (i, bits::to_bytes(p)))
        .collect();
    let points: Vec<u8> = chosen.iter().map(|(i, _)| point(*i)).collect();
    let chunk_bytes = chosen[0].1.len();
    let mut data = Vec::with_capacity(l * chunk_bytes);
    for j in 1..=l {
        if let Some((_, p)) = chosen.iter().find(|(i, _)| *i == j) {
            data.extend_from_slice(p);
            continue;
        }
        let weights = lagrange_weights(&points, point(j));
        let mut chunk = vec![0u8; chunk_bytes];
        for ((_, p), &w) in chosen.iter().zip(&weights) {
            gf256::mul_acc(&mut chunk, p, w);
        }
        data.extend(chunk);
    }
    Some(data)
}

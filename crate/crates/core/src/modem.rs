//! Symbol mapping for the three modulation schemes.
//!
//! Constellations are unnormalized: BPSK uses `{+1, -1}` and QPSK uses
//! `{±1 ± j}`, so a QPSK symbol carries twice the energy of a BPSK symbol.
//!
//! * Standard QPSK takes consecutive codeword bits `(v[2k], v[2k+1])` onto the
//!   I and Q rails. The two rails therefore come from different generator
//!   polynomials at every symbol, and no per-symbol XOR with a BPSK user keeps
//!   the code linear.
//! * Symbol-splitting QPSK encodes two half-packets separately and puts bit
//!   `k` of the first codeword on the I rail and bit `k` of the second on the
//!   Q rail. Each rail then lines up bit-for-bit with a BPSK codeword of the
//!   same length.

use num_complex::Complex64;

use crate::fec::{conv_encode, Codeword, InfoPacket, TAIL_BITS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationScheme {
    Bpsk,
    QpskStandard,
    QpskSplit,
}

impl ModulationScheme {
    /// Energy per symbol of the unnormalized constellation.
    pub fn symbol_energy(self) -> f64 {
        match self {
            ModulationScheme::Bpsk => 1.0,
            _ => 2.0,
        }
    }

    /// Half-packets carried per slot.
    pub fn segments(self) -> usize {
        match self {
            ModulationScheme::Bpsk => 1,
            _ => 2,
        }
    }

    /// Transmit alphabet.
    pub fn alphabet(self) -> &'static [Complex64] {
        const BPSK: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        const QPSK: [Complex64; 4] = [
            Complex64::new(1.0, 1.0),
            Complex64::new(-1.0, 1.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(-1.0, -1.0),
        ];
        match self {
            ModulationScheme::Bpsk => &BPSK,
            _ => &QPSK,
        }
    }
}

/// In-phase or quadrature rail of a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rail {
    I,
    Q,
}

impl Rail {
    /// The ±1 value a symbol carries on this rail.
    #[inline]
    pub fn of(self, x: Complex64) -> f64 {
        match self {
            Rail::I => x.re,
            Rail::Q => x.im,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    pub symbols: Vec<Complex64>,
    pub scheme: ModulationScheme,
}

impl SymbolStream {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Noiseless hard demapping: the codeword bits for BPSK and standard
    /// QPSK, or the I codeword followed by the Q codeword for split QPSK.
    pub fn hard_bits(&self) -> Vec<u8> {
        let bit = |v: f64| u8::from(v < 0.0);
        match self.scheme {
            ModulationScheme::Bpsk => self.symbols.iter().map(|x| bit(x.re)).collect(),
            ModulationScheme::QpskStandard => self
                .symbols
                .iter()
                .flat_map(|x| [bit(x.re), bit(x.im)])
                .collect(),
            ModulationScheme::QpskSplit => self
                .symbols
                .iter()
                .map(|x| bit(x.re))
                .chain(self.symbols.iter().map(|x| bit(x.im)))
                .collect(),
        }
    }
}

#[inline]
fn level(bit: u8) -> f64 {
    1.0 - 2.0 * f64::from(bit)
}

pub fn bpsk_modulate(cw: &Codeword) -> SymbolStream {
    SymbolStream {
        symbols: cw
            .bits
            .iter()
            .map(|&b| Complex64::new(level(b), 0.0))
            .collect(),
        scheme: ModulationScheme::Bpsk,
    }
}

pub fn qpsk_modulate_standard(cw: &Codeword) -> Result<SymbolStream> {
    if !cw.len().is_multiple_of(2) {
        return Err(Error::OddLength(cw.len()));
    }
    Ok(SymbolStream {
        symbols: cw
            .bits
            .chunks_exact(2)
            .map(|p| Complex64::new(level(p[0]), level(p[1])))
            .collect(),
        scheme: ModulationScheme::QpskStandard,
    })
}

pub fn qpsk_modulate_split(cw_i: &Codeword, cw_q: &Codeword) -> Result<SymbolStream> {
    if cw_i.len() != cw_q.len() {
        return Err(Error::LengthMismatch {
            expected: cw_i.len(),
            actual: cw_q.len(),
        });
    }
    Ok(SymbolStream {
        symbols: cw_i
            .bits
            .iter()
            .zip(&cw_q.bits)
            .map(|(&i, &q)| Complex64::new(level(i), level(q)))
            .collect(),
        scheme: ModulationScheme::QpskSplit,
    })
}

/// XOR bit carried by a pair of BPSK levels.
pub fn pnc_bpsk_map(xa: f64, xb: f64) -> u8 {
    ((1.0 - xa * xb) / 2.0).round() as u8
}

/// Information bits for a whole standard-QPSK packet: both halves back to
/// back plus one extra tail's worth of zeros, so that its symbol count equals
/// that of a BPSK packet built from one half.
pub fn standard_qpsk_info(halves: &[InfoPacket]) -> Vec<u8> {
    let mut info: Vec<u8> = halves.iter().flat_map(InfoPacket::bits).collect();
    info.extend([0u8; TAIL_BITS]);
    info
}

/// Channel-encodes and maps one slot's half-packets for a user.
pub fn modulate_packets(scheme: ModulationScheme, halves: &[InfoPacket]) -> Result<SymbolStream> {
    if halves.len() != scheme.segments() {
        return Err(Error::LengthMismatch {
            expected: scheme.segments(),
            actual: halves.len(),
        });
    }
    match scheme {
        ModulationScheme::Bpsk => Ok(bpsk_modulate(&conv_encode(&halves[0].bits())?)),
        ModulationScheme::QpskSplit => qpsk_modulate_split(
            &conv_encode(&halves[0].bits())?,
            &conv_encode(&halves[1].bits())?,
        ),
        ModulationScheme::QpskStandard => {
            qpsk_modulate_standard(&conv_encode(&standard_qpsk_info(halves))?)
        }
    }
}

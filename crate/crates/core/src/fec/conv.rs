use crate::{Error, Result};

/// Generator polynomials, octal 133 and 171. Bit 6 taps the current input,
/// bit 0 taps the input six steps back.
pub const GENERATORS: [u32; 2] = [0o133, 0o171];

/// Zero bits appended to flush the 6-bit register.
pub const TAIL_BITS: usize = 6;

const N_STATES: usize = 1 << TAIL_BITS;

/// Encoder output bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword {
    pub bits: Vec<u8>,
}

impl Codeword {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// One LLR per codeword bit, positive meaning bit 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBits {
    pub llrs: Vec<f64>,
}

impl SoftBits {
    pub fn new(llrs: Vec<f64>) -> Self {
        SoftBits { llrs }
    }

    /// Saturated LLRs of magnitude `mag` agreeing with `bits`.
    pub fn from_hard(bits: &[u8], mag: f64) -> Self {
        SoftBits {
            llrs: bits
                .iter()
                .map(|&b| if b == 0 { mag } else { -mag })
                .collect(),
        }
    }

    pub fn hard_decisions(&self) -> Vec<u8> {
        self.llrs.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

/// Codeword length for `info_len` information bits.
pub const fn encoded_len(info_len: usize) -> usize {
    2 * (info_len + TAIL_BITS)
}

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

#[inline]
fn outputs(register: u32) -> (u8, u8) {
    (
        parity(register & GENERATORS[0]),
        parity(register & GENERATORS[1]),
    )
}

/// Rate-1/2 encoding with six zero tail bits appended internally.
///
/// Output bit `2n` comes from generator 133, bit `2n + 1` from 171.
pub fn conv_encode(info: &[u8]) -> Result<Codeword> {
    if info.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut bits = Vec::with_capacity(encoded_len(info.len()));
    let mut state = 0u32;
    for &b in info.iter().chain([0u8; TAIL_BITS].iter()) {
        let register = (u32::from(b & 1) << 6) | state;
        let (p0, p1) = outputs(register);
        bits.push(p0);
        bits.push(p1);
        state = register >> 1;
    }
    Ok(Codeword { bits })
}

/// How the add-compare-select step resolves equal path metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Keep the predecessor whose discarded register bit is 0.
    #[default]
    PreferZero,
    /// Keep the predecessor whose discarded register bit is 1. Only useful
    /// for exercising the oracle suite.
    PreferOne,
}

/// Soft-input Viterbi decoding of a zero-terminated codeword.
///
/// Returns the maximum-likelihood information bits under the correlation
/// metric `sum(llr * (1 - 2c))`, tail bits stripped. Ties keep the 0-branch.
///
/// Panics if the input length is odd or shorter than one information bit
/// plus tail (14 LLRs).
pub fn viterbi_decode(soft: &SoftBits) -> Vec<u8> {
    viterbi_decode_with(soft, TieRule::PreferZero)
}

pub fn viterbi_decode_with(soft: &SoftBits, tie: TieRule) -> Vec<u8> {
    let llrs = &soft.llrs;
    assert!(
        llrs.len().is_multiple_of(2) && llrs.len() >= encoded_len(1),
        "viterbi input must be even and at least {} long, got {}",
        encoded_len(1),
        llrs.len()
    );
    let steps = llrs.len() / 2;

    // Branch outputs indexed by the full 7-bit register.
    let mut table = [(0u8, 0u8); 2 * N_STATES];
    for (reg, entry) in table.iter_mut().enumerate() {
        *entry = outputs(reg as u32);
    }

    let mut metric = [f64::NEG_INFINITY; N_STATES];
    metric[0] = 0.0;
    let mut next = [0.0f64; N_STATES];
    // Bit n of decisions[t] is the discarded register bit chosen for state n.
    let mut decisions = vec![0u64; steps];

    for (t, pair) in llrs.chunks_exact(2).enumerate() {
        let (l0, l1) = (pair[0], pair[1]);
        let bm = |(c0, c1): (u8, u8)| -> f64 {
            let a = if c0 == 0 { l0 } else { -l0 };
            let b = if c1 == 0 { l1 } else { -l1 };
            a + b
        };
        let mut chosen = 0u64;
        for (n, slot) in next.iter_mut().enumerate() {
            let input = n >> 5;
            let base = (n & 0x1f) << 1;
            let reg0 = (input << 6) | base;
            let reg1 = reg0 | 1;
            let m0 = metric[base] + bm(table[reg0]);
            let m1 = metric[base | 1] + bm(table[reg1]);
            let take_one = match tie {
                TieRule::PreferZero => m1 > m0,
                TieRule::PreferOne => m1 >= m0,
            };
            if take_one {
                *slot = m1;
                chosen |= 1 << n;
            } else {
                *slot = m0;
            }
        }
        decisions[t] = chosen;
        metric.copy_from_slice(&next);
    }

    let mut out = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        out[t] = (state >> 5) as u8;
        let d = ((decisions[t] >> state) & 1) as usize;
        state = ((state & 0x1f) << 1) | d;
    }
    out.truncate(steps - TAIL_BITS);
    out
}

//! Self-contained cross-checks of the signal chain against slow reference
//! implementations. Each check returns a counterexample on mismatch.

use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{derive_seed, draw_realization, ChannelParams, ANTENNAS};
use crate::demod::{llr_per_symbol, LlrMetric};
use crate::fec::{conv_encode, crc32, viterbi_decode_with, SoftBits, TieRule, CRC_POLY};
use crate::mac::{gf256, rs_decode, rs_encode, Message, RsStream};
use crate::modem::{ModulationScheme, Rail};
use crate::phy::{phy_bridge, DecodedEquation, DecoderMode};
use crate::{bits, User};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub name: &'static str,
    pub passed: bool,
    /// Counterexample or summary.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub seed: u64,
    pub results: Vec<OracleResult>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OracleResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in &self.results {
            let tag = if r.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {:<24} {}", r.name, r.detail)?;
        }
        Ok(())
    }
}

type Check = std::result::Result<String, String>;

fn rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tag]))
}

fn tap_encode(info: &[u8]) -> Vec<u8> {
    const TAPS: [[usize; 5]; 2] = [[0, 2, 3, 5, 6], [0, 1, 2, 3, 6]];
    let mut delay: VecDeque<u8> = VecDeque::from(vec![0u8; 7]);
    let mut out = Vec::with_capacity(2 * (info.len() + 6));
    for &b in info.iter().chain([0u8; 6].iter()) {
        delay.push_front(b);
        delay.truncate(7);
        for taps in TAPS {
            out.push(taps.iter().fold(0, |acc, &i| acc ^ delay[i]));
        }
    }
    out
}

fn correlation(cw: &[u8], llrs: &[f64]) -> f64 {
    cw.iter()
        .zip(llrs)
        .map(|(&c, &l)| if c == 0 { l } else { -l })
        .sum()
}

fn encoder_linearity(seed: u64) -> Check {
    let mut r = rng(seed, 1);
    for _ in 0..2000 {
        let n = r.random_range(1..200);
        let a = bits::random(&mut r, n);
        let b = bits::random(&mut r, n);
        let lhs = conv_encode(&bits::xor(&a, &b)).expect("nonempty").bits;
        let rhs = bits::xor(
            &conv_encode(&a).expect("nonempty").bits,
            &conv_encode(&b).expect("nonempty").bits,
        );
        if lhs != rhs {
            return Err(format!("a={a:?} b={b:?}"));
        }
    }
    Ok("2000 pairs".into())
}

fn encoder_taps(seed: u64) -> Check {
    let mut r = rng(seed, 2);
    let mut cases = vec![vec![1u8, 0, 0, 0, 0, 0, 0]];
    cases.extend((0..500).map(|_| {
        let n = r.random_range(1..64);
        bits::random(&mut r, n)
    }));
    for m in cases {
        if conv_encode(&m).expect("nonempty").bits != tap_encode(&m) {
            return Err(format!("input {m:?}"));
        }
    }
    Ok("impulse + 500 inputs".into())
}

fn viterbi_ml(seed: u64, tie: TieRule) -> Check {
    let mut r = rng(seed, 3);
    let k = 9;
    let codewords: Vec<Vec<u8>> = (0u32..1 << k)
        .map(|m| {
            let msg: Vec<u8> = (0..k).map(|i| ((m >> i) & 1) as u8).collect();
            conv_encode(&msg).expect("nonempty").bits
        })
        .collect();
    for trial in 0..300 {
        // Coarse integer LLRs produce frequent metric ties.
        let llrs: Vec<f64> = (0..2 * (k + 6))
            .map(|_| {
                if trial % 2 == 0 {
                    f64::from(r.random_range(-2i8..=2))
                } else {
                    r.random_range(-3.0..3.0)
                }
            })
            .collect();
        let best = codewords
            .iter()
            .map(|cw| correlation(cw, &llrs))
            .fold(f64::NEG_INFINITY, f64::max);
        let decoded = viterbi_decode_with(&SoftBits::new(llrs.clone()), tie);
        let got = correlation(&conv_encode(&decoded).expect("nonempty").bits, &llrs);
        if (got - best).abs() > 1e-9 {
            return Err(format!(
                "llrs={llrs:?}: viterbi metric {got}, ML metric {best}"
            ));
        }
    }
    Ok(format!("300 trials, {} candidates each", codewords.len()))
}

fn viterbi_ties(tie: TieRule) -> Check {
    for k in [1usize, 5, 20] {
        let out = viterbi_decode_with(&SoftBits::new(vec![0.0; 2 * (k + 6)]), tie);
        if out.iter().any(|&b| b != 0) {
            return Err(format!(
                "all-zero LLRs with {k} info bits decoded to {out:?}"
            ));
        }
    }
    Ok("zero LLRs decode to zeros".into())
}

/// Eq.-level exact LLR, written as a direct sum over transmit tuples.
fn exact_llr_direct(
    y: [Complex64; ANTENNAS],
    h: &[[Complex64; ANTENNAS]; 3],
    noise_var: [f64; ANTENNAS],
    schemes: [ModulationScheme; 3],
    product: &[(User, Rail)],
) -> f64 {
    let alph = schemes.map(|s| s.alphabet());
    let (mut pos, mut neg) = (0.0f64, 0.0f64);
    for xa in alph[0] {
        for xb in alph[1] {
            for xc in alph[2] {
                let x = [*xa, *xb, *xc];
                let d: f64 = (0..ANTENNAS)
                    .map(|r| {
                        let s: Complex64 = (0..3).map(|u| h[u][r] * x[u]).sum();
                        (y[r] - s).norm_sqr() / noise_var[r]
                    })
                    .sum();
                let sign: f64 = product
                    .iter()
                    .map(|(u, rail)| rail.of(x[u.index()]))
                    .product();
                if sign > 0.0 {
                    pos += (-d).exp();
                } else {
                    neg += (-d).exp();
                }
            }
        }
    }
    pos.ln() - neg.ln()
}

fn llr_exact_vs_direct(seed: u64) -> Check {
    let mut r = rng(seed, 4);
    let mut max_err = 0.0f64;
    for mode in DecoderMode::ALL {
        let schemes = mode.schemes();
        let params = ChannelParams::new([0.0, 1.0, 2.0], schemes);
        for trial in 0..20 {
            let real = draw_realization(&params, derive_seed(seed, &[5, trial]));
            let y: [Complex64; ANTENNAS] = std::array::from_fn(|_| {
                Complex64::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0))
            });
            for target in mode.bank() {
                let products = target
                    .rail_products(&schemes)
                    .expect("bank targets are valid");
                let got = llr_per_symbol(y, &real, schemes, &target, LlrMetric::Exact)
                    .expect("valid channel");
                for (p, g) in products.iter().zip(&got) {
                    let want = exact_llr_direct(y, &real.gains, real.noise_var, schemes, p);
                    let err = (g - want).abs();
                    max_err = max_err.max(err);
                    if err > 1e-9 * want.abs().max(1.0) {
                        return Err(format!(
                            "{} target {} y={y:?}: {g} vs {want}",
                            mode.name(),
                            target.label
                        ));
                    }
                }
            }
        }
    }
    Ok(format!("max abs error {max_err:.2e}"))
}

fn llr_logmax_agreement(seed: u64) -> Check {
    let mut r = rng(seed, 6);
    let mode = DecoderMode::SrNcma;
    let schemes = mode.schemes();
    let params = ChannelParams::new([10.0; 3], schemes);
    let (mut agree, mut total) = (0usize, 0usize);
    for trial in 0..20 {
        let real = draw_realization(&params, derive_seed(seed, &[7, trial]));
        for _ in 0..100 {
            let x: Vec<Complex64> = (0..3)
                .map(|u| {
                    let a = schemes[u].alphabet();
                    a[r.random_range(0..a.len())]
                })
                .collect();
            let clean: [Complex64; ANTENNAS] =
                std::array::from_fn(|ant| (0..3).map(|u| real.gains[u][ant] * x[u]).sum());
            let noisy: [Complex64; ANTENNAS] = std::array::from_fn(|ant| {
                clean[ant] + crate::channel::complex_noise(&mut r, real.noise_var[ant])
            });
            for target in mode.bank() {
                let lm = llr_per_symbol(noisy, &real, schemes, &target, LlrMetric::LogMax)
                    .expect("valid channel");
                let ex = llr_per_symbol(noisy, &real, schemes, &target, LlrMetric::Exact)
                    .expect("valid channel");
                total += 1;
                agree += usize::from((lm[0] >= 0.0) == (ex[0] >= 0.0));
                let lm0 = llr_per_symbol(clean, &real, schemes, &target, LlrMetric::LogMax)
                    .expect("valid channel");
                let ex0 = llr_per_symbol(clean, &real, schemes, &target, LlrMetric::Exact)
                    .expect("valid channel");
                if lm0[0].signum() != ex0[0].signum() {
                    return Err(format!(
                        "noiseless sign mismatch on {} x={x:?}",
                        target.label
                    ));
                }
            }
        }
    }
    let rate = agree as f64 / total as f64;
    if rate < 0.99 {
        return Err(format!("agreement {rate:.4} over {total} bits"));
    }
    Ok(format!("agreement {rate:.4} over {total} bits"))
}

/// Unknowns recoverable from the given equations by trying every XOR
/// combination.
pub fn brute_force_recoverable(eqs: &[DecodedEquation]) -> BTreeMap<usize, Vec<u8>> {
    let mut found = BTreeMap::new();
    for combo in 1u32..(1 << eqs.len()) {
        let mut c = 0u8;
        let mut p = vec![0u8; eqs[0].payload.len()];
        for (i, e) in eqs.iter().enumerate() {
            if combo & (1 << i) != 0 {
                c ^= e.coeffs;
                bits::xor_in_place(&mut p, &e.payload);
            }
        }
        if c.count_ones() == 1 {
            found.entry(c.trailing_zeros() as usize).or_insert(p);
        }
    }
    found
}

/// Runs bridging on every subset of the SR decoder bank's equations for one
/// random payload instance. Returns (matching subsets, total subsets).
pub fn bridging_sweep(seed: u64) -> (usize, usize, Option<String>) {
    let mode = DecoderMode::SrNcma;
    let mut r = rng(seed, 8);
    let truth: Vec<Vec<u8>> = (0..mode.n_unknowns())
        .map(|_| bits::random(&mut r, 48))
        .collect();
    let all: Vec<DecodedEquation> = mode
        .bank()
        .iter()
        .map(|t| {
            let coeffs = mode.coeffs_of(t);
            let mut payload = vec![0u8; 48];
            for (i, t) in truth.iter().enumerate() {
                if coeffs & (1 << i) != 0 {
                    bits::xor_in_place(&mut payload, t);
                }
            }
            DecodedEquation {
                coeffs,
                payload,
                slot: 0,
                source: t.label.clone(),
            }
        })
        .collect();
    let total = 1usize << all.len();
    let mut matches = 0;
    let mut first_bad = None;
    for subset in 0..total {
        let eqs: Vec<DecodedEquation> = all
            .iter()
            .enumerate()
            .filter(|(i, _)| subset & (1 << i) != 0)
            .map(|(_, e)| e.clone())
            .collect();
        let want = if eqs.is_empty() {
            BTreeMap::new()
        } else {
            brute_force_recoverable(&eqs)
        };
        let outcome = phy_bridge(&eqs);
        let got: BTreeMap<usize, Vec<u8>> = outcome
            .natives
            .into_iter()
            .map(|n| (n.unknown, n.payload))
            .collect();
        if got == want && outcome.anomalies == 0 {
            matches += 1;
        } else if first_bad.is_none() {
            first_bad = Some(format!(
                "subset {:?}: bridging {:?}, brute force {:?}",
                eqs.iter().map(|e| e.source.as_str()).collect::<Vec<_>>(),
                got.keys().collect::<Vec<_>>(),
                want.keys().collect::<Vec<_>>()
            ));
        }
    }
    (matches, total, first_bad)
}

fn bridging(seed: u64) -> Check {
    match bridging_sweep(seed) {
        (m, t, None) => Ok(format!("{m}/{t} subsets")),
        (m, t, Some(bad)) => Err(format!("{m}/{t} subsets; {bad}")),
    }
}

/// Solves the Vandermonde system for the message polynomial and evaluates
/// it at the systematic points.
pub fn vandermonde_decode(l: usize, packets: &[(usize, Vec<u8>)]) -> Vec<u8> {
    let width = packets[0].1.len();
    let mut rows: Vec<(Vec<u8>, Vec<u8>)> = packets
        .iter()
        .take(l)
        .map(|(i, p)| {
            let x = (*i - 1) as u8;
            let mut pow = 1u8;
            let v = (0..l)
                .map(|_| {
                    let cur = pow;
                    pow = gf256::mul(pow, x);
                    cur
                })
                .collect();
            (v, p.clone())
        })
        .collect();
    for col in 0..l {
        let pivot = (col..l)
            .find(|&r| rows[r].0[col] != 0)
            .expect("distinct points give a nonsingular system");
        rows.swap(col, pivot);
        let scale = gf256::inv(rows[col].0[col]);
        let (v, p) = &mut rows[col];
        for e in v.iter_mut().chain(p.iter_mut()) {
            *e = gf256::mul(*e, scale);
        }
        let (pv, pp) = rows[col].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            let f = row.0[col];
            if r != col && f != 0 {
                gf256::mul_acc(&mut row.0, &pv, f);
                gf256::mul_acc(&mut row.1, &pp, f);
            }
        }
    }
    let mut data = Vec::with_capacity(l * width);
    for j in 0..l {
        let x = j as u8;
        let mut acc = vec![0u8; width];
        let mut pow = 1u8;
        for (_, coeff) in &rows {
            gf256::mul_acc(&mut acc, coeff, pow);
            pow = gf256::mul(pow, x);
        }
        data.extend(acc);
    }
    data
}

fn rs_vs_solve(seed: u64) -> Check {
    let mut r = rng(seed, 9);
    for trial in 0..200 {
        let l = r.random_range(2..=8);
        let n_max = 4 * l;
        let mut data = vec![0u8; l * 4];
        r.fill(&mut data[..]);
        let msg = Message {
            user: User::A,
            msg_id: trial,
            data,
        };
        let stream = RsStream::new(msg, l, n_max).expect("valid shape");
        let mut idx: Vec<usize> = (1..=n_max).collect();
        for i in 0..l {
            let j = r.random_range(i..n_max);
            idx.swap(i, j);
        }
        idx.truncate(l);
        let bytes: Vec<(usize, Vec<u8>)> = idx
            .iter()
            .map(|&i| (i, stream.packet_bytes(i).expect("in range")))
            .collect();
        let packets: BTreeMap<usize, Vec<u8>> = idx
            .iter()
            .map(|&i| (i, rs_encode(&stream, i).expect("in range").payload))
            .collect();
        let oracle = vandermonde_decode(l, &bytes);
        let got = rs_decode(l, &packets);
        if got.as_ref() != Some(&oracle) || oracle != stream.message.data {
            return Err(format!("L={l} indices {idx:?}"));
        }
    }
    Ok("200 random subsets".into())
}

/// Remainder of `bits · x^32` modulo the generator, by long division.
fn crc_long_division(payload: &[u8]) -> u32 {
    let mut rem: Vec<u8> = payload.to_vec();
    rem.extend([0u8; 32]);
    let gen: Vec<u8> = (0..=32)
        .rev()
        .map(|i| ((0x1_0000_0000u64 | u64::from(CRC_POLY)) >> i) as u8 & 1)
        .collect();
    for i in 0..payload.len() {
        if rem[i] == 1 {
            for (j, g) in gen.iter().enumerate() {
                rem[i + j] ^= g;
            }
        }
    }
    rem[payload.len()..]
        .iter()
        .fold(0u32, |acc, &b| (acc << 1) | u32::from(b))
}

fn crc_division(seed: u64) -> Check {
    let mut r = rng(seed, 10);
    for _ in 0..300 {
        let n = r.random_range(1..300);
        let p = bits::random(&mut r, n);
        if crc32(&p) != crc_long_division(&p) {
            return Err(format!("payload {p:?}"));
        }
    }
    Ok("300 payloads".into())
}

fn run(name: &'static str, check: Check) -> OracleResult {
    let (passed, detail) = match check {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    OracleResult {
        name,
        passed,
        detail,
    }
}

/// Runs every oracle with the given Viterbi tie rule.
pub fn oracle_suite_with(seed: u64, tie: TieRule) -> OracleReport {
    OracleReport {
        seed,
        results: vec![
            run("encoder_linearity", encoder_linearity(seed)),
            run("encoder_taps", encoder_taps(seed)),
            run("viterbi_vs_ml", viterbi_ml(seed, tie)),
            run("viterbi_tie_rule", viterbi_ties(tie)),
            run("llr_exact_vs_direct", llr_exact_vs_direct(seed)),
            run("llr_logmax_agreement", llr_logmax_agreement(seed)),
            run("bridging_vs_brute_force", bridging(seed)),
            run("rs_vs_linear_solve", rs_vs_solve(seed)),
            run("crc_vs_long_division", crc_division(seed)),
        ],
    }
}

pub fn oracle_suite(seed: u64) -> OracleReport {
    oracle_suite_with(seed, TieRule::PreferZero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = oracle_suite(3);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn corrupted_tie_rule_is_named() {
        let report = oracle_suite_with(3, TieRule::PreferOne);
        let failed: Vec<&str> = report.failures().map(|r| r.name).collect();
        assert!(failed.contains(&"viterbi_tie_rule"), "{report}");
    }

    #[test]
    fn crc_long_division_matches_known_value() {
        // A single leading 1 leaves x^32 mod g = g without its top term.
        assert_eq!(crc_long_division(&[1]), CRC_POLY);
    }
}

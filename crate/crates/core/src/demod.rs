//! Joint-constellation soft demodulation for MUD and PNC targets.
//!
//! Every target bit is a product of ±1 rail values of the transmitted
//! symbols: `x_A` for a MUD decoder of A, `x_A · Re(x_C)` for `A ⊕ C_I`, and
//! so on. For each received sample pair the demodulator enumerates all
//! joint transmit tuples `(x_A, x_B, x_C)`, splits them by the sign of that
//! product, and compares the two sets.
//!
//! The default metric is log-max:
//!
//! ```text
//! LLR = min_{χ-} D(x) - min_{χ+} D(x),   D(x) = Σ_r |y_r - Σ_s h_{s,r} x_s|²
//! ```
//!
//! which needs no noise variance. The exact log-sum-exp form with `σ_r²` is
//! kept alongside as a reference.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, RxSlot, ANTENNAS};
use crate::fec::SoftBits;
use crate::modem::{ModulationScheme, Rail};
use crate::{Error, Result, User};

/// Default LLR saturation applied before Viterbi decoding.
pub const DEFAULT_LLR_CLIP: f64 = 50.0;

/// A GF(2) combination `a·A ⊕ b·B ⊕ c·C` to be demodulated.
///
/// `component` selects the I or Q half-packet of a symbol-splitting QPSK
/// user C; it must be `None` for any other scheme.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecodeTarget {
    pub coeffs: [bool; 3],
    pub component: Option<Rail>,
    pub label: String,
}

impl DecodeTarget {
    pub fn new(coeffs: [bool; 3], component: Option<Rail>) -> Result<Self> {
        let label = Self::make_label(coeffs, component);
        if !coeffs.iter().any(|&c| c) {
            return Err(Error::InvalidTarget {
                label,
                reason: "no user selected".into(),
            });
        }
        if component.is_some() && !coeffs[2] {
            return Err(Error::InvalidTarget {
                label,
                reason: "rail component given without user C".into(),
            });
        }
        Ok(DecodeTarget {
            coeffs,
            component,
            label,
        })
    }

    pub fn mud(user: User) -> Self {
        let mut coeffs = [false; 3];
        coeffs[user.index()] = true;
        Self::new(coeffs, None).expect("single-user target is valid")
    }

    pub fn users(&self) -> impl Iterator<Item = User> + '_ {
        User::ALL.into_iter().filter(|u| self.coeffs[u.index()])
    }

    pub fn is_mud(&self) -> bool {
        self.coeffs.iter().filter(|&&c| c).count() == 1
    }

    fn make_label(coeffs: [bool; 3], component: Option<Rail>) -> String {
        let parts: Vec<String> = User::ALL
            .into_iter()
            .filter(|u| coeffs[u.index()])
            .map(|u| match (u, component) {
                (User::C, Some(Rail::I)) => "C_I".to_string(),
                (User::C, Some(Rail::Q)) => "C_Q".to_string(),
                _ => u.to_string(),
            })
            .collect();
        parts.join("⊕")
    }

    /// The rail products defining each codeword bit carried by one symbol:
    /// one product for BPSK/split targets, I then Q for standard-QPSK ones.
    pub fn rail_products(&self, schemes: &[ModulationScheme; 3]) -> Result<Vec<Vec<(User, Rail)>>> {
        let invalid = |reason: &str| Error::InvalidTarget {
            label: self.label.clone(),
            reason: reason.to_string(),
        };
        let involved: Vec<User> = self.users().collect();
        let standard = involved
            .iter()
            .filter(|u| schemes[u.index()] == ModulationScheme::QpskStandard)
            .count();
        if standard > 0 {
            if standard != involved.len() {
                return Err(invalid(
                    "standard QPSK has no XOR mapping with a differently coded user",
                ));
            }
            if self.component.is_some() {
                return Err(invalid("standard QPSK target takes no rail component"));
            }
            return Ok([Rail::I, Rail::Q]
                .into_iter()
                .map(|rail| involved.iter().map(|&u| (u, rail)).collect())
                .collect());
        }
        let c_split = schemes[User::C.index()] == ModulationScheme::QpskSplit;
        if self.coeffs[User::C.index()] && c_split != self.component.is_some() {
            return Err(invalid(
                "rail component required exactly when user C uses symbol splitting",
            ));
        }
        let mut product = Vec::with_capacity(involved.len());
        for &u in &involved {
            let rail = match schemes[u.index()] {
                ModulationScheme::Bpsk => Rail::I,
                ModulationScheme::QpskSplit => {
                    self.component.ok_or_else(|| invalid("missing rail"))?
                }
                ModulationScheme::QpskStandard => unreachable!(),
            };
            product.push((u, rail));
        }
        Ok(vec![product])
    }
}

/// All joint transmit tuples for a modulation scenario.
#[derive(Debug, Clone)]
pub struct JointConstellation {
    pub schemes: [ModulationScheme; 3],
    pub points: Vec<[Complex64; 3]>,
}

impl JointConstellation {
    pub fn new(schemes: [ModulationScheme; 3]) -> Self {
        let mut points = Vec::new();
        for &a in schemes[0].alphabet() {
            for &b in schemes[1].alphabet() {
                for &c in schemes[2].alphabet() {
                    points.push([a, b, c]);
                }
            }
        }
        JointConstellation { schemes, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bitmask over points whose rail product is +1 (target bit 0).
    pub fn positive_mask(&self, product: &[(User, Rail)]) -> u64 {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                product
                    .iter()
                    .map(|&(u, rail)| rail.of(p[u.index()]))
                    .product::<f64>()
                    > 0.0
            })
            .fold(0u64, |m, (i, _)| m | (1 << i))
    }

    pub fn full_mask(&self) -> u64 {
        if self.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.len()) - 1
        }
    }

    /// Noiseless received images of every point on each antenna.
    pub fn images(&self, real: &ChannelRealization) -> Vec<[Complex64; ANTENNAS]> {
        self.points
            .iter()
            .map(|p| std::array::from_fn(|r| (0..3).map(|s| real.gains[s][r] * p[s]).sum()))
            .collect()
    }
}

/// Which LLR formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LlrMetric {
    #[default]
    LogMax,
    Exact,
}

fn masked_min(d: &[f64], mut mask: u64) -> f64 {
    let mut best = f64::INFINITY;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        best = best.min(d[i]);
        mask &= mask - 1;
    }
    best
}

/// `log Σ exp(-d_i)` over the masked points.
fn masked_log_sum_exp(d: &[f64], mask: u64) -> f64 {
    let floor = masked_min(d, mask);
    let mut sum = 0.0;
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        sum += (floor - d[i]).exp();
        m &= m - 1;
    }
    -floor + sum.ln()
}

fn llr_from_distances(d: &[f64], pos: u64, full: u64, metric: LlrMetric) -> f64 {
    let neg = full & !pos;
    match metric {
        LlrMetric::LogMax => masked_min(d, neg) - masked_min(d, pos),
        LlrMetric::Exact => masked_log_sum_exp(d, pos) - masked_log_sum_exp(d, neg),
    }
}

/// Per-slot demodulator: distances from every received sample pair to every
/// constellation image, shared by all targets of the decoder bank.
#[derive(Debug, Clone)]
pub struct SlotMetrics {
    constellation: JointConstellation,
    active: [bool; 3],
    metric: LlrMetric,
    /// Row-major `[symbol][point]`.
    distances: Vec<f64>,
    n_symbols: usize,
}

impl SlotMetrics {
    pub fn new(rx: &RxSlot, metric: LlrMetric) -> Result<Self> {
        let real = &rx.realization;
        if real.is_degenerate() {
            return Err(Error::DegenerateChannel);
        }
        let schemes = std::array::from_fn(|s| rx.truth[s].scheme);
        let constellation = JointConstellation::new(schemes);
        let images = constellation.images(real);
        let n_points = constellation.len();
        let n_symbols = rx.len();
        let weights: [f64; ANTENNAS] = match metric {
            LlrMetric::LogMax => [1.0; ANTENNAS],
            LlrMetric::Exact => std::array::from_fn(|r| 1.0 / real.noise_var[r]),
        };
        let mut distances = Vec::with_capacity(n_symbols * n_points);
        for k in 0..n_symbols {
            let y: [Complex64; ANTENNAS] = std::array::from_fn(|r| rx.y[r][k]);
            distances.extend(images.iter().map(|img| {
                (0..ANTENNAS)
                    .map(|r| weights[r] * (y[r] - img[r]).norm_sqr())
                    .sum::<f64>()
            }));
        }
        let active = std::array::from_fn(|s| real.gains[s].iter().any(|h| h.norm_sqr() > 0.0));
        Ok(SlotMetrics {
            constellation,
            active,
            metric,
            distances,
            n_symbols,
        })
    }

    pub fn constellation(&self) -> &JointConstellation {
        &self.constellation
    }

    /// Per-symbol LLRs for `target`, in codeword-bit order, clipped to `±clip`.
    pub fn soft_bits(&self, target: &DecodeTarget, clip: f64) -> Result<SoftBits> {
        if let Some(u) = target.users().find(|u| !self.active[u.index()]) {
            return Err(Error::InvalidTarget {
                label: target.label.clone(),
                reason: format!("user {u} is not active in this slot"),
            });
        }
        let products = target.rail_products(&self.constellation.schemes)?;
        let masks: Vec<u64> = products
            .iter()
            .map(|p| self.constellation.positive_mask(p))
            .collect();
        let full = self.constellation.full_mask();
        let n_points = self.constellation.len();
        let mut llrs = Vec::with_capacity(self.n_symbols * masks.len());
        for d in self.distances.chunks_exact(n_points) {
            for &pos in &masks {
                let l = llr_from_distances(d, pos, full, self.metric);
                llrs.push(l.clamp(-clip, clip));
            }
        }
        Ok(SoftBits::new(llrs))
    }
}

/// LLRs of one received sample pair for `target` (one value, or I and Q for
/// a standard-QPSK target).
pub fn llr_per_symbol(
    y: [Complex64; ANTENNAS],
    real: &ChannelRealization,
    schemes: [ModulationScheme; 3],
    target: &DecodeTarget,
    metric: LlrMetric,
) -> Result<Vec<f64>> {
    if real.is_degenerate() {
        return Err(Error::DegenerateChannel);
    }
    let constellation = JointConstellation::new(schemes);
    let weights: [f64; ANTENNAS] = match metric {
        LlrMetric::LogMax => [1.0; ANTENNAS],
        LlrMetric::Exact => std::array::from_fn(|r| 1.0 / real.noise_var[r]),
    };
    let d: Vec<f64> = constellation
        .images(real)
        .iter()
        .map(|img| {
            (0..ANTENNAS)
                .map(|r| weights[r] * (y[r] - img[r]).norm_sqr())
                .sum()
        })
        .collect();
    let full = constellation.full_mask();
    Ok(target
        .rail_products(&schemes)?
        .iter()
        .map(|p| llr_from_distances(&d, constellation.positive_mask(p), full, metric))
        .collect())
}

/// Log-max soft bits for a single target.
pub fn demod_stream(rx: &RxSlot, target: &DecodeTarget) -> Result<SoftBits> {
    SlotMetrics::new(rx, LlrMetric::LogMax)?.soft_bits(target, DEFAULT_LLR_CLIP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits;
    use crate::channel::{draw_realization, transmit, ChannelParams};
    use crate::fec::{conv_encode, crc_attach};
    use crate::modem::{modulate_packets, ModulationScheme::*};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SR: [ModulationScheme; 3] = [Bpsk, Bpsk, QpskSplit];

    fn target(a: bool, b: bool, c: bool, comp: Option<Rail>) -> DecodeTarget {
        DecodeTarget::new([a, b, c], comp).unwrap()
    }

    fn noiseless_params(snr_db: [f64; 3], schemes: [ModulationScheme; 3]) -> ChannelParams {
        ChannelParams::new(snr_db, schemes)
    }

    #[test]
    fn constellation_sizes() {
        assert_eq!(JointConstellation::new(SR).len(), 16);
        assert_eq!(JointConstellation::new([QpskStandard; 3]).len(), 64);
        assert_eq!(JointConstellation::new([Bpsk; 3]).len(), 8);
        assert_eq!(
            JointConstellation::new([QpskStandard; 3]).full_mask(),
            u64::MAX
        );
    }

    #[test]
    fn target_validation() {
        assert!(DecodeTarget::new([false; 3], None).is_err());
        assert!(DecodeTarget::new([true, false, false], Some(Rail::I)).is_err());
        let dr = [Bpsk, Bpsk, QpskStandard];
        assert!(target(true, false, true, None).rail_products(&dr).is_err());
        assert!(target(false, false, true, None).rail_products(&SR).is_err());
        assert!(target(false, false, true, Some(Rail::I))
            .rail_products(&dr)
            .is_err());
        assert_eq!(target(true, false, true, Some(Rail::Q)).label, "A⊕C_Q");
        assert_eq!(
            target(true, true, true, None)
                .rail_products(&[QpskStandard; 3])
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn partitions_are_complete_and_disjoint() {
        let cons = JointConstellation::new(SR);
        let full = cons.full_mask();
        for t in [
            target(true, false, false, None),
            target(true, true, false, None),
            target(true, false, true, Some(Rail::I)),
            target(true, true, true, Some(Rail::Q)),
        ] {
            let p = cons.positive_mask(&t.rail_products(&SR).unwrap()[0]);
            let n = full & !p;
            assert_eq!(p | n, full);
            assert_eq!(p & n, 0);
            assert_eq!(p.count_ones(), 8);
        }
    }

    #[test]
    fn noiseless_placement_signs_match_truth() {
        let real = draw_realization(&noiseless_params([7.0, 7.0, 15.0], SR), 31);
        let cons = JointConstellation::new(SR);
        let images = cons.images(&real);
        let targets = [
            target(true, false, false, None),
            target(false, true, false, None),
            target(false, false, true, Some(Rail::I)),
            target(false, false, true, Some(Rail::Q)),
            target(true, true, false, None),
            target(true, false, true, Some(Rail::I)),
            target(false, true, true, Some(Rail::Q)),
            target(true, true, true, Some(Rail::I)),
        ];
        for (p, y) in cons.points.iter().zip(&images) {
            for t in &targets {
                let product: f64 = t.rail_products(&SR).unwrap()[0]
                    .iter()
                    .map(|&(u, rail)| rail.of(p[u.index()]))
                    .product();
                let llr = llr_per_symbol(*y, &real, SR, t, LlrMetric::LogMax).unwrap()[0];
                assert!(
                    llr * product > 0.0,
                    "{}: llr {llr} product {product}",
                    t.label
                );
            }
        }
    }

    #[test]
    fn equidistant_sample_gives_zero() {
        // Single active BPSK user; y halfway between its two images.
        let mut real = draw_realization(&noiseless_params([0.0; 3], [Bpsk; 3]), 1);
        real.gains[1] = [Complex64::new(0.0, 0.0); 2];
        real.gains[2] = [Complex64::new(0.0, 0.0); 2];
        let y = [Complex64::new(0.0, 0.0); 2];
        let llr = llr_per_symbol(
            y,
            &real,
            [Bpsk; 3],
            &DecodeTarget::mud(User::A),
            LlrMetric::LogMax,
        )
        .unwrap()[0];
        assert_eq!(llr, 0.0);
    }

    #[test]
    fn log_max_ignores_noise_variance() {
        let mut params = noiseless_params([5.0, 6.0, 9.0], SR);
        let real_a = draw_realization(&params, 8);
        params.noise_var = [40.0, 40.0];
        let mut real_b = draw_realization(&params, 8);
        real_b.gains = real_a.gains;
        let y = [Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.1)];
        let t = target(true, false, true, Some(Rail::I));
        let a = llr_per_symbol(y, &real_a, SR, &t, LlrMetric::LogMax).unwrap();
        let b = llr_per_symbol(y, &real_b, SR, &t, LlrMetric::LogMax).unwrap();
        assert_eq!(a, b);
        let ea = llr_per_symbol(y, &real_a, SR, &t, LlrMetric::Exact).unwrap();
        let eb = llr_per_symbol(y, &real_b, SR, &t, LlrMetric::Exact).unwrap();
        assert_ne!(ea, eb);
    }

    #[test]
    fn swapping_sets_negates_llr() {
        let real = draw_realization(&noiseless_params([5.0, 6.0, 9.0], SR), 4);
        let cons = JointConstellation::new(SR);
        let y = [Complex64::new(0.7, 0.4), Complex64::new(-1.1, 0.2)];
        let d: Vec<f64> = cons
            .images(&real)
            .iter()
            .map(|img| (0..2).map(|r| (y[r] - img[r]).norm_sqr()).sum())
            .collect();
        let full = cons.full_mask();
        let pos = cons.positive_mask(&[(User::A, Rail::I), (User::C, Rail::I)]);
        for metric in [LlrMetric::LogMax, LlrMetric::Exact] {
            let l = llr_from_distances(&d, pos, full, metric);
            let swapped = llr_from_distances(&d, full & !pos, full, metric);
            assert_eq!(l, -swapped);
        }
    }

    #[test]
    fn degenerate_channel_rejected() {
        let mut real = draw_realization(&noiseless_params([0.0; 3], SR), 0);
        real.gains = [[Complex64::new(0.0, 0.0); 2]; 3];
        let y = [Complex64::new(0.0, 0.0); 2];
        assert!(matches!(
            llr_per_symbol(y, &real, SR, &DecodeTarget::mud(User::A), LlrMetric::LogMax),
            Err(Error::DegenerateChannel)
        ));
    }

    fn sr_slot(seed: u64, noise_var: f64) -> (RxSlot, [Vec<u8>; 4]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pkts: Vec<_> = (0..4)
            .map(|_| crc_attach(&bits::random(&mut rng, 64)))
            .collect();
        let cws: [Vec<u8>; 4] = std::array::from_fn(|i| conv_encode(&pkts[i].bits()).unwrap().bits);
        let streams = [
            modulate_packets(Bpsk, &pkts[0..1]).unwrap(),
            modulate_packets(Bpsk, &pkts[1..2]).unwrap(),
            modulate_packets(QpskSplit, &pkts[2..4]).unwrap(),
        ];
        let mut real = draw_realization(&noiseless_params([10.0, 10.0, 13.0], SR), seed);
        real.noise_var = [noise_var; 2];
        (transmit(streams, &real, &mut rng).unwrap(), cws)
    }

    #[test]
    fn noiseless_stream_hard_decisions() {
        let (rx, cws) = sr_slot(12, 0.0);
        let metrics = SlotMetrics::new(&rx, LlrMetric::LogMax).unwrap();
        let a = metrics
            .soft_bits(&DecodeTarget::mud(User::A), DEFAULT_LLR_CLIP)
            .unwrap();
        assert_eq!(a.hard_decisions(), cws[0]);
        let aci = metrics
            .soft_bits(&target(true, false, true, Some(Rail::I)), DEFAULT_LLR_CLIP)
            .unwrap();
        assert_eq!(aci.hard_decisions(), bits::xor(&cws[0], &cws[2]));
        let abcq = metrics
            .soft_bits(&target(true, true, true, Some(Rail::Q)), DEFAULT_LLR_CLIP)
            .unwrap();
        let expected = bits::xor(&bits::xor(&cws[0], &cws[1]), &cws[3]);
        assert_eq!(abcq.hard_decisions(), expected);
        assert!(a.llrs.iter().all(|l| l.abs() <= DEFAULT_LLR_CLIP));
    }

    #[test]
    fn standard_qpsk_targets_give_two_llrs_per_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let halves: Vec<_> = (0..2)
            .map(|_| crc_attach(&bits::random(&mut rng, 64)))
            .collect();
        let one = [crc_attach(&bits::random(&mut rng, 64))];
        let schemes = [Bpsk, Bpsk, QpskStandard];
        let streams = [
            modulate_packets(Bpsk, &one).unwrap(),
            modulate_packets(Bpsk, &one).unwrap(),
            modulate_packets(QpskStandard, &halves).unwrap(),
        ];
        let mut real = draw_realization(&noiseless_params([10.0, 10.0, 13.0], schemes), 3);
        real.noise_var = [0.0; 2];
        let rx = transmit(streams, &real, &mut rng).unwrap();
        let soft = demod_stream(&rx, &DecodeTarget::mud(User::C)).unwrap();
        assert_eq!(soft.llrs.len(), 2 * rx.len());
        assert_eq!(soft.hard_decisions(), rx.truth[2].hard_bits());
    }

    #[test]
    fn inactive_user_rejected() {
        let (mut rx, _) = sr_slot(5, 1.0);
        rx.realization.gains[1] = [Complex64::new(0.0, 0.0); 2];
        assert!(demod_stream(&rx, &DecodeTarget::mud(User::B)).is_err());
        assert!(demod_stream(&rx, &DecodeTarget::mud(User::A)).is_ok());
    }
}

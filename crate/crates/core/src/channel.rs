//! Three-user, two-antenna block-fading multiple access channel.
//!
//! Each slot draws one complex gain per (user, antenna) pair. The magnitude
//! is fixed by the configured SNR and the phase is uniform on `[0, 2π)`.
//! SNR is per transmitted symbol: `|h|² · E_s / σ²`, with `E_s = 1` for BPSK
//! and `E_s = 2` for QPSK (either mapping), so a QPSK user at the same SNR
//! as a BPSK user has half the per-rail energy.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::modem::{ModulationScheme, SymbolStream};
use crate::{Error, Result, User};

pub const ANTENNAS: usize = 2;

/// Inputs to [`draw_realization`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub snr_db: [f64; 3],
    pub schemes: [ModulationScheme; 3],
    /// Noise variance per antenna (linear).
    pub noise_var: [f64; ANTENNAS],
}

impl ChannelParams {
    pub fn new(snr_db: [f64; 3], schemes: [ModulationScheme; 3]) -> Self {
        ChannelParams {
            snr_db,
            schemes,
            noise_var: [1.0; ANTENNAS],
        }
    }
}

/// Per-slot channel state, known exactly at the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `gains[user][antenna]`.
    pub gains: [[Complex64; ANTENNAS]; 3],
    pub noise_var: [f64; ANTENNAS],
}

impl ChannelRealization {
    pub fn gain(&self, user: User, antenna: usize) -> Complex64 {
        self.gains[user.index()][antenna]
    }

    /// Linear per-symbol SNR of `user` on `antenna` for the given scheme.
    pub fn snr(&self, user: User, antenna: usize, scheme: ModulationScheme) -> f64 {
        self.gain(user, antenna).norm_sqr() * scheme.symbol_energy() / self.noise_var[antenna]
    }

    pub fn is_degenerate(&self) -> bool {
        self.gains.iter().flatten().all(|h| h.norm_sqr() == 0.0)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Draws gains with deterministic magnitudes and independent uniform phases.
pub fn draw_realization(params: &ChannelParams, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gains = [[Complex64::new(0.0, 0.0); ANTENNAS]; 3];
    for (s, row) in gains.iter_mut().enumerate() {
        let snr = db_to_linear(params.snr_db[s]);
        for (r, h) in row.iter_mut().enumerate() {
            let mag = (snr * params.noise_var[r] / params.schemes[s].symbol_energy()).sqrt();
            let phase: f64 = rng.random_range(0.0..TAU);
            *h = Complex64::from_polar(mag, phase);
        }
    }
    ChannelRealization {
        gains,
        noise_var: params.noise_var,
    }
}

/// Received samples for one slot.
#[derive(Debug, Clone)]
pub struct RxSlot {
    /// `y[antenna][k]`.
    pub y: [Vec<Complex64>; ANTENNAS],
    pub realization: ChannelRealization,
    /// Transmitted streams, kept for test oracles.
    pub truth: [SymbolStream; 3],
}

impl RxSlot {
    pub fn len(&self) -> usize {
        self.y[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.y[0].is_empty()
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_noise<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let sd = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * sd, im * sd)
}

/// Superimposes the three streams on both antennas and adds noise.
pub fn transmit<R: Rng + ?Sized>(
    streams: [SymbolStream; 3],
    real: &ChannelRealization,
    rng: &mut R,
) -> Result<RxSlot> {
    let n = streams[0].len();
    for s in &streams[1..] {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: s.len(),
            });
        }
    }
    let y = std::array::from_fn(|r| {
        (0..n)
            .map(|k| {
                let signal: Complex64 = streams
                    .iter()
                    .zip(&real.gains)
                    .map(|(s, h)| h[r] * s.symbols[k])
                    .sum();
                if real.noise_var[r] > 0.0 {
                    signal + complex_noise(rng, real.noise_var[r])
                } else {
                    signal
                }
            })
            .collect()
    });
    Ok(RxSlot {
        y,
        realization: real.clone(),
        truth: streams,
    })
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a run seed and a path of indices.
pub fn derive_seed(run_seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(run_seed), |acc, &p| mix(acc ^ mix(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::ModulationScheme::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn stream(values: &[Complex64], scheme: ModulationScheme) -> SymbolStream {
        SymbolStream {
            symbols: values.to_vec(),
            scheme,
        }
    }

    fn q(x: f64) -> f64 {
        1.0 - Normal::standard().cdf(x)
    }

    #[test]
    fn zero_db_bpsk_has_unit_gain() {
        let params = ChannelParams::new([0.0, 0.0, 0.0], [Bpsk, Bpsk, QpskSplit]);
        let real = draw_realization(&params, 1);
        for r in 0..ANTENNAS {
            assert!((real.gain(User::A, r).norm() - 1.0).abs() < 1e-12);
            assert!((real.gain(User::C, r).norm_sqr() - 0.5).abs() < 1e-12);
            assert!((real.snr(User::C, r, QpskSplit) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn realization_is_seeded() {
        let params = ChannelParams::new([7.0, 7.0, 12.0], [Bpsk, Bpsk, QpskSplit]);
        assert_eq!(draw_realization(&params, 42), draw_realization(&params, 42));
        assert_ne!(draw_realization(&params, 42), draw_realization(&params, 43));
    }

    #[test]
    fn noiseless_superposition() {
        let params = ChannelParams::new([3.0, 5.0, 9.0], [Bpsk, Bpsk, QpskSplit]);
        let mut real = draw_realization(&params, 5);
        real.noise_var = [0.0; 2];
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let qp = Complex64::new(-1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let solo = transmit(
            [
                stream(&[zero, zero], Bpsk),
                stream(&[one, -one], Bpsk),
                stream(&[zero, zero], QpskSplit),
            ],
            &real,
            &mut rng,
        )
        .unwrap();
        for r in 0..ANTENNAS {
            assert!(real.gains[1][r].norm() > 1.0);
            assert_eq!(solo.y[r][0], real.gains[1][r]);
            assert_eq!(solo.y[r][1], -real.gains[1][r]);
        }

        let all = transmit(
            [
                stream(&[one], Bpsk),
                stream(&[-one], Bpsk),
                stream(&[qp], QpskSplit),
            ],
            &real,
            &mut rng,
        )
        .unwrap();
        for r in 0..ANTENNAS {
            let expected = real.gains[0][r] - real.gains[1][r] + real.gains[2][r] * qp;
            assert!((all.y[r][0] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let real = draw_realization(&ChannelParams::new([0.0; 3], [Bpsk; 3]), 0);
        let one = Complex64::new(1.0, 0.0);
        let err = transmit(
            [
                stream(&[one, one], Bpsk),
                stream(&[one], Bpsk),
                stream(&[one, one], Bpsk),
            ],
            &real,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn noise_moments() {
        let n = 100_000;
        let params = ChannelParams {
            noise_var: [1.7, 1.7],
            ..ChannelParams::new([0.0; 3], [Bpsk; 3])
        };
        let real = draw_realization(&params, 3);
        let zeros = stream(&vec![Complex64::new(0.0, 0.0); n], Bpsk);
        let rx = transmit(
            [zeros.clone(), zeros.clone(), zeros],
            &real,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        for r in 0..ANTENNAS {
            let w = &rx.y[r];
            let var = w.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
            assert!((var / 1.7 - 1.0).abs() < 0.02, "variance {var}");
            // Lag-1 sample autocorrelation, normalized.
            let lag1: Complex64 = w.windows(2).map(|p| p[1] * p[0].conj()).sum();
            let rho = lag1.norm() / (n as f64 * var);
            assert!(rho < 5.0 / (n as f64).sqrt(), "lag-1 correlation {rho}");
        }
    }

    #[test]
    fn single_user_bpsk_ber_matches_q_function() {
        let snr_db = 7.0;
        let n = 1_000_000;
        let params = ChannelParams::new([snr_db, 0.0, 0.0], [Bpsk; 3]);
        let real = draw_realization(&params, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let bits: Vec<u8> = crate::bits::random(&mut rng, n);
        let tx: Vec<Complex64> = bits
            .iter()
            .map(|&b| Complex64::new(1.0 - 2.0 * f64::from(b), 0.0))
            .collect();
        let silent = stream(&vec![Complex64::new(0.0, 0.0); n], Bpsk);
        let rx = transmit([stream(&tx, Bpsk), silent.clone(), silent], &real, &mut rng).unwrap();
        // ML detection from antenna 1 alone: sign of Re(h* y).
        let h = real.gain(User::A, 0);
        let errors = rx.y[0]
            .iter()
            .zip(&bits)
            .filter(|(y, &b)| u8::from((h.conj() * **y).re < 0.0) != b)
            .count();
        let ber = errors as f64 / n as f64;
        let theory = q((2.0 * db_to_linear(snr_db)).sqrt());
        let sigma = (theory / n as f64).sqrt();
        assert!(
            (ber - theory).abs() < 4.0 * sigma,
            "ber {ber:.3e} vs theory {theory:.3e}"
        );
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
    }
}

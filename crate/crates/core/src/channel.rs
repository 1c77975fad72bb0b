//! BPSK over the real AWGN channel `y = x + z`, `z ~ N(0, sigma^2)`.
//!
//! Bit `0` maps to `+1` and bit `1` to `-1` everywhere in the crate, and
//! `Es/N0 = 1 / (2 sigma^2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::scalar::Real;

/// Noise level, kept consistent in both linear (`sigma`) and dB form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams<R> {
    sigma: R,
    esn0_db: R,
}

impl<R: Real> ChannelParams<R> {
    pub fn from_esn0_db(esn0_db: R) -> Result<Self> {
        if !esn0_db.is_finite() {
            return Err(Error::InvalidParameter(format!("Es/N0 {esn0_db} dB")));
        }
        let esn0 = R::lit(10.0).powf(esn0_db / R::lit(10.0));
        let sigma = (R::one() / (R::lit(2.0) * esn0)).sqrt();
        Ok(Self { sigma, esn0_db })
    }

    pub fn from_sigma(sigma: R) -> Result<Self> {
        if !(sigma > R::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise standard deviation must be positive and finite, got {sigma}"
            )));
        }
        let esn0_db = R::lit(10.0) * (R::one() / (R::lit(2.0) * sigma * sigma)).log10();
        Ok(Self { sigma, esn0_db })
    }

    #[inline]
    pub fn sigma(&self) -> R {
        self.sigma
    }

    #[inline]
    pub fn variance(&self) -> R {
        self.sigma * self.sigma
    }

    #[inline]
    pub fn esn0_db(&self) -> R {
        self.esn0_db
    }

    /// Linear `Es/N0`.
    pub fn esn0(&self) -> R {
        R::one() / (R::lit(2.0) * self.variance())
    }
}

/// Identifies one reproducible random stream: the same `(seed, stream)` pair
/// always yields the same draws, and distinct stream ids never overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derives an independent family of streams keyed by `tag`; used to give
    /// each message class its own frame streams under one master seed.
    pub fn derive_seed(seed: u64, tag: u64) -> u64 {
        splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `0 -> +1`, `1 -> -1`.
pub fn modulate_bpsk<R: Real>(bits: &BitVector) -> Vec<R> {
    bits.iter()
        .map(|b| if b { -R::one() } else { R::one() })
        .collect()
}

/// Sign decision, the inverse of [`modulate_bpsk`] on noiseless symbols.
pub fn hard_decision<R: Real>(y: &[R]) -> BitVector {
    BitVector::from_bools(y.iter().map(|&v| v < R::zero()))
}

/// Adds white Gaussian noise drawn from `rng`.
pub fn add_noise<R: Real, G: Rng + ?Sized>(symbols: &[R], params: &ChannelParams<R>, rng: &mut G) -> Vec<R> {
    symbols
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            x + params.sigma() * R::lit(z)
        })
        .collect()
}

/// `y = x + z` with noise drawn from `stream`; pure in its arguments.
pub fn transmit<R: Real>(symbols: &[R], params: &ChannelParams<R>, stream: &RngStream) -> Vec<R> {
    add_noise(symbols, params, &mut stream.rng())
}

/// Per-symbol `log P(bit=0|y) / P(bit=1|y) = 2 y / sigma^2`.
pub fn llr<R: Real>(y: &[R], params: &ChannelParams<R>) -> Vec<R> {
    let scale = R::lit(2.0) / params.variance();
    y.iter().map(|&v| scale * v).collect()
}

/// [`llr`] for a bare noise standard deviation.
pub fn llr_from_sigma<R: Real>(y: &[R], sigma: R) -> Vec<R> {
    let scale = R::lit(2.0) / (sigma * sigma);
    y.iter().map(|&v| scale * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn modulation_map() {
        assert_eq!(modulate_bpsk::<f64>(&"000".parse().unwrap()), vec![1.0, 1.0, 1.0]);
        assert_eq!(modulate_bpsk::<f64>(&"101".parse().unwrap()), vec![-1.0, 1.0, -1.0]);
        assert!(modulate_bpsk::<f32>(&BitVector::ones(9)).iter().all(|&s| s == -1.0));
    }

    #[test]
    fn params_validation_and_conversion() {
        assert!(ChannelParams::from_sigma(0.0f64).is_err());
        assert!(ChannelParams::from_sigma(-1.0f64).is_err());
        assert!(ChannelParams::from_esn0_db(f64::NAN).is_err());
        let p = ChannelParams::from_esn0_db(0.0f64).unwrap();
        assert!((p.variance() - 0.5).abs() < 1e-15);
        let p = ChannelParams::from_sigma(1.0f64).unwrap();
        assert!((p.esn0_db() - 10.0 * 0.5f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn vanishing_noise_returns_input() {
        let p = ChannelParams::from_sigma(1e-13f64).unwrap();
        let x = modulate_bpsk::<f64>(&"0110100".parse().unwrap());
        let y = transmit(&x, &p, &RngStream::new(3, 0));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn noise_moments() {
        let p = ChannelParams::from_sigma(0.8f64).unwrap();
        let x = vec![1.0f64; 1_000_000];
        let y = transmit(&x, &p, &RngStream::new(17, 4));
        let z: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
        assert!(mean.abs() < 5e-3, "mean {mean}");
        assert!((var / 0.64 - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let p = ChannelParams::from_sigma(1.0f64).unwrap();
        let x = vec![0.0f64; 16];
        let a = transmit(&x, &p, &RngStream::new(9, 1));
        let b = transmit(&x, &p, &RngStream::new(9, 1));
        let c = transmit(&x, &p, &RngStream::new(9, 2));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngStream::derive_seed(1, 0), RngStream::derive_seed(1, 1));
    }

    #[test]
    fn llr_examples() {
        let p = ChannelParams::from_sigma(0.7f64).unwrap();
        let s2 = p.variance();
        let l = llr(&[0.0, s2 / 2.0], &p);
        assert_eq!(l[0], 0.0);
        assert!((l[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn llr_sign_matches_nearest_symbol() {
        let p = ChannelParams::from_sigma(1.3f64).unwrap();
        let mut rng = RngStream::new(1, 1).rng();
        let y: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let l = llr(&y, &p);
        for (yi, li) in y.iter().zip(&l) {
            // nearest symbol +1 <=> bit 0 <=> positive LLR
            let nearest_plus = (yi - 1.0).abs() < (yi + 1.0).abs();
            assert_eq!(nearest_plus, *li > 0.0);
        }
    }

    proptest! {
        #[test]
        fn db_sigma_roundtrip(db in -20.0f64..20.0) {
            let p = ChannelParams::from_esn0_db(db).unwrap();
            let q = ChannelParams::from_sigma(p.sigma()).unwrap();
            prop_assert!((q.esn0_db() - db).abs() < 1e-12);
        }

        #[test]
        fn noiseless_hard_decision_is_identity(bits in proptest::collection::vec(0u8..2, 1..200)) {
            let v = BitVector::from_bits(&bits);
            prop_assert_eq!(hard_decision(&modulate_bpsk::<f64>(&v)), v);
        }

        #[test]
        fn llr_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, sigma in 0.1f64..3.0) {
            let p = ChannelParams::from_sigma(sigma).unwrap();
            let l = llr(&[a, b, a + b], &p);
            prop_assert!((l[2] - l[0] - l[1]).abs() < 1e-9 * (1.0 + l[2].abs()));
            prop_assert!((l[0] - 2.0 * a / (sigma * sigma)).abs() < 1e-12 * (1.0 + l[0].abs()));
        }
    }
}

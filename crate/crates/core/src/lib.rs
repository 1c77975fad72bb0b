//! Unequal message protection with coset codes on the binary-input AWGN
//! channel: GF(2) tools, convolutional and CRC-aided polar component codes,
//! two-class receivers, a normal-approximation benchmark and a Monte Carlo
//! engine.
//!
//! Signal-processing code is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the precision for the common cases.

pub mod channel;
pub mod error;
pub mod gf2;
pub mod na;
pub mod polar;
pub mod scalar;
pub mod sim;
pub mod ump;
pub mod ztcc;

pub use channel::{llr, modulate_bpsk, transmit, ChannelParams, RngStream};
pub use error::{Error, Result};
pub use gf2::{coset_intersection, BitMatrix, BitVector, CosetIntersection};
pub use na::{na_min_snr, NaClass, NaProblem, NaSolution};
pub use polar::{ca_polar_encode, scl_decode, CrcSpec, PolarSpec, SclOutcome};
pub use scalar::Real;
pub use sim::{find_max_rates, find_min_snr, ExperimentConfig, Experiment};
pub use ump::{CosetCode, DecodeOutcome, Family, Hypothesis, TestMode, UmpCode};
pub use ztcc::{Trellis, ZtccSpec};

pub type ChannelParamsF64 = ChannelParams<f64>;
pub type ChannelParamsF32 = ChannelParams<f32>;
pub type SclDecoderF64 = polar::SclDecoder<f64>;
pub type SclDecoderF32 = polar::SclDecoder<f32>;
pub type ViterbiOutputF64 = ztcc::ViterbiOutput<f64>;
pub type ViterbiOutputF32 = ztcc::ViterbiOutput<f32>;

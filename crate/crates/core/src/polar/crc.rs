//! Cyclic redundancy check over GF(2), MSB-first long division from a zero
//! register, parity appended after the message.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gf2::BitVector;

/// Generator polynomial written with its leading term, so `0xE21` is the
/// degree-11 polynomial `x¹¹ + x¹⁰ + x⁹ + x⁵ + 1` and `0x61` is `x⁶ + x⁵ + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CrcSpec {
    poly: u64,
    degree: usize,
}

impl CrcSpec {
    pub fn new(poly: u64) -> Result<Self> {
        if poly < 2 {
            return Err(Error::InvalidParameter(format!(
                "CRC polynomial {poly:#x} has degree below 1"
            )));
        }
        let degree = 63 - poly.leading_zeros() as usize;
        if degree > 32 {
            return Err(Error::InvalidParameter(format!(
                "CRC polynomial {poly:#x} exceeds degree 32"
            )));
        }
        Ok(Self { poly, degree })
    }

    /// Polynomial including the leading term.
    pub fn polynomial(&self) -> u64 {
        self.poly
    }

    /// Number of parity bits.
    pub fn len(&self) -> usize {
        self.degree
    }

    pub fn is_empty(&self) -> bool {
        self.degree == 0
    }

    /// `m(x) x^r mod g(x)` with the first message bit as the highest power.
    pub fn remainder(&self, bits: impl IntoIterator<Item = bool>) -> u64 {
        let r = self.degree;
        let mask = (1u64 << r) - 1;
        let low = self.poly & mask;
        let mut reg = 0u64;
        for b in bits {
            let feedback = ((reg >> (r - 1)) & 1 == 1) ^ b;
            reg = (reg << 1) & mask;
            if feedback {
                reg ^= low;
            }
        }
        reg
    }

    /// The `r` parity bits for `msg`, most significant first.
    pub fn parity(&self, msg: &BitVector) -> BitVector {
        let rem = self.remainder(msg.iter());
        BitVector::from_bools((0..self.degree).rev().map(|i| rem >> i & 1 == 1))
    }

    pub fn encode(&self, msg: &BitVector) -> BitVector {
        msg.concat(&self.parity(msg))
    }

    /// Whether the trailing `r` bits of `word` are the parity of the rest.
    pub fn check(&self, word: &BitVector) -> bool {
        if word.len() < self.degree {
            return false;
        }
        let split = word.len() - self.degree;
        let parity = (split..word.len()).fold(0u64, |acc, i| acc << 1 | u64::from(word.get(i)));
        self.remainder((0..split).map(|i| word.get(i))) == parity
    }
}

impl fmt::Display for CrcSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#X}", self.poly)
    }
}

impl FromStr for CrcSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t
            .strip_prefix("0x")
            .or_else(|| t.strip_prefix("0X"))
            .unwrap_or(t);
        let poly = u64::from_str_radix(digits, 16)
            .map_err(|e| Error::Parse(format!("CRC polynomial {s:?} is not hexadecimal: {e}")))?;
        Self::new(poly)
    }
}

pub fn crc_encode(msg: &BitVector, crc: &CrcSpec) -> BitVector {
    crc.encode(msg)
}

pub fn crc_check(word: &BitVector, crc: &CrcSpec) -> bool {
    crc.check(word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook long division of `m(x) x^r` by `g(x)` on coefficient vectors,
    /// highest power first.
    fn long_division(msg: &[u8], poly: &[u8]) -> Vec<u8> {
        let r = poly.len() - 1;
        let mut work: Vec<u8> = msg.iter().copied().chain(std::iter::repeat_n(0, r)).collect();
        for i in 0..msg.len() {
            if work[i] == 1 {
                for (j, &p) in poly.iter().enumerate() {
                    work[i + j] ^= p;
                }
            }
        }
        work[msg.len()..].to_vec()
    }

    fn poly_bits(poly: u64) -> Vec<u8> {
        let d = 63 - poly.leading_zeros();
        (0..=d).rev().map(|i| (poly >> i & 1) as u8).collect()
    }

    #[test]
    fn parsing_and_degree() {
        let c: CrcSpec = "0xE21".parse().unwrap();
        assert_eq!(c.len(), 11);
        assert_eq!(c.polynomial(), 0xE21);
        assert_eq!("0x61".parse::<CrcSpec>().unwrap().len(), 6);
        assert_eq!("61".parse::<CrcSpec>().unwrap().len(), 6);
        assert!("0xZZ".parse::<CrcSpec>().is_err());
        assert!(CrcSpec::new(1).is_err());
        assert_eq!(c.to_string(), "0xE21");
    }

    #[test]
    fn zero_message_has_zero_parity() {
        let c: CrcSpec = "0xE21".parse().unwrap();
        assert!(c.parity(&BitVector::zeros(40)).is_zero());
    }

    #[test]
    fn bytes_01_to_08_match_long_division() {
        let bits: Vec<u8> = (1u8..=8)
            .flat_map(|byte| (0..8).rev().map(move |i| byte >> i & 1))
            .collect();
        for poly in [0xE21u64, 0x61] {
            let c = CrcSpec::new(poly).unwrap();
            let parity = c.parity(&BitVector::from_bits(&bits)).to_bits();
            assert_eq!(parity, long_division(&bits, &poly_bits(poly)));
        }
    }

    #[test]
    fn single_bit_errors_are_detected() {
        let c: CrcSpec = "0x61".parse().unwrap();
        let msg: BitVector = "1011001110001111010".parse().unwrap();
        let word = c.encode(&msg);
        assert!(c.check(&word));
        for i in 0..word.len() {
            let mut bad = word.clone();
            bad.flip(i);
            assert!(!c.check(&bad), "flip at {i} undetected");
        }
    }

    proptest! {
        #[test]
        fn encode_then_check(bits in proptest::collection::vec(0u8..2, 1..120), wide in any::<bool>()) {
            let c = CrcSpec::new(if wide { 0xE21 } else { 0x61 }).unwrap();
            let msg = BitVector::from_bits(&bits);
            let word = crc_encode(&msg, &c);
            prop_assert_eq!(word.len(), bits.len() + c.len());
            prop_assert!(crc_check(&word, &c));
            prop_assert_eq!(c.parity(&msg).to_bits(), long_division(&bits, &poly_bits(c.polynomial())));
        }
    }
}

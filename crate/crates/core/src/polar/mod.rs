//! CRC-aided polar codes: natural-order transform `x = u F^{⊗m}` with the
//! kernel `F = [[1, 0], [1, 1]]`, information set from a reliability order,
//! and successive-cancellation list decoding with a CRC-filtered output.

mod crc;
mod reliability;
mod scl;

pub use crc::{crc_check, crc_encode, CrcSpec};
pub use reliability::{nr5g_order, NR5G_RELIABILITY};
pub use scl::{scl_decode, SclDecoder, SclOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};

/// How synthetic channels are ranked when choosing the information set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    /// 5G NR universal sequence, valid up to `n = 1024`.
    #[default]
    Nr5g,
    /// Bhattacharyya-parameter recursion at the given design `Es/N0`.
    Bhattacharyya { design_esn0_db: f64 },
}

impl Construction {
    /// All indices `0..n`, least reliable first.
    pub fn order(&self, n: usize) -> Result<Vec<usize>> {
        match *self {
            Construction::Nr5g => {
                if n > NR5G_RELIABILITY.len() {
                    return Err(Error::InvalidParameter(format!(
                        "the 5G NR sequence covers n <= 1024, got {n}"
                    )));
                }
                Ok(nr5g_order(n))
            }
            Construction::Bhattacharyya { design_esn0_db } => {
                let z = bhattacharyya_parameters(n, 10f64.powf(design_esn0_db / 10.0));
                let mut idx: Vec<usize> = (0..n).collect();
                // larger Z is less reliable
                idx.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
                Ok(idx)
            }
        }
    }
}

/// Bhattacharyya parameters of the `n` synthetic channels, index bits read
/// from the most significant: bit 0 gives `2z − z²`, bit 1 gives `z²`.
pub fn bhattacharyya_parameters(n: usize, esn0: f64) -> Vec<f64> {
    let m = n.trailing_zeros();
    let z0 = (-esn0).exp();
    (0..n)
        .map(|i| {
            (0..m).rev().fold(z0, |z, b| {
                if i >> b & 1 == 1 {
                    z * z
                } else {
                    2.0 * z - z * z
                }
            })
        })
        .collect()
}

fn check_power_of_two(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "polar length must be a power of two >= 2, got {n}"
        )));
    }
    Ok(())
}

/// In-place `x = u F^{⊗m}` on a bit slice; the map is its own inverse.
pub fn polar_transform_in_place(bits: &mut [u8]) {
    let n = bits.len();
    let mut h = 1;
    while h < n {
        for block in bits.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x ^= *y;
            }
        }
        h *= 2;
    }
}

pub fn polar_transform(u: &BitVector) -> Result<BitVector> {
    check_power_of_two(u.len())?;
    let mut bits = u.to_bits();
    polar_transform_in_place(&mut bits);
    Ok(BitVector::from_bits(&bits))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolarSpec {
    n: usize,
    k: usize,
    crc: CrcSpec,
    list_size: usize,
    construction: Construction,
    info_set: Vec<usize>,
    frozen: Vec<bool>,
}

impl PolarSpec {
    /// Code built on the 5G NR reliability sequence.
    pub fn new(n: usize, k: usize, crc: CrcSpec, list_size: usize) -> Result<Self> {
        Self::with_construction(n, k, crc, list_size, Construction::Nr5g)
    }

    pub fn with_construction(
        n: usize,
        k: usize,
        crc: CrcSpec,
        list_size: usize,
        construction: Construction,
    ) -> Result<Self> {
        check_power_of_two(n)?;
        if k == 0 || k + crc.len() > n {
            return Err(Error::InvalidParameter(format!(
                "payload {k} plus {} CRC bits must lie in 1..={n}",
                crc.len()
            )));
        }
        if list_size == 0 {
            return Err(Error::InvalidParameter("list size must be positive".into()));
        }
        let order = construction.order(n)?;
        let mut info_set = order[n - k - crc.len()..].to_vec();
        info_set.sort_unstable();
        let mut frozen = vec![true; n];
        for &i in &info_set {
            frozen[i] = false;
        }
        Ok(Self {
            n,
            k,
            crc,
            list_size,
            construction,
            info_set,
            frozen,
        })
    }

    /// Same code, different list size.
    pub fn with_list_size(mut self, list_size: usize) -> Result<Self> {
        if list_size == 0 {
            return Err(Error::InvalidParameter("list size must be positive".into()));
        }
        self.list_size = list_size;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn crc(&self) -> &CrcSpec {
        &self.crc
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Information positions in ascending order (`k` payload then CRC bits).
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_set(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.frozen[i]).collect()
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn encode(&self, msg: &BitVector) -> Result<BitVector> {
        if msg.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "message has {} bits, code expects {}",
                msg.len(),
                self.k
            )));
        }
        let word = self.crc.encode(msg);
        let mut u = vec![0u8; self.n];
        for (j, &i) in self.info_set.iter().enumerate() {
            u[i] = u8::from(word.get(j));
        }
        polar_transform_in_place(&mut u);
        Ok(BitVector::from_bits(&u))
    }

    /// `k x n` generator matrix of the CRC-aided code (the CRC is linear).
    pub fn generator_matrix(&self) -> BitMatrix {
        let rows: Vec<BitVector> = (0..self.k)
            .map(|i| {
                let mut e = BitVector::zeros(self.k);
                e.set(i, true);
                self.encode(&e).expect("unit vector has the payload length")
            })
            .collect();
        BitMatrix::from_rows(&rows, self.n).expect("encodings have the blocklength")
    }

    /// Recovers the payload from a codeword if it satisfies the frozen and
    /// CRC constraints.
    pub fn extract_message(&self, codeword: &BitVector) -> Option<BitVector> {
        if codeword.len() != self.n {
            return None;
        }
        let mut u = codeword.to_bits();
        polar_transform_in_place(&mut u);
        if (0..self.n).any(|i| self.frozen[i] && u[i] == 1) {
            return None;
        }
        let word = BitVector::from_bools(self.info_set.iter().map(|&i| u[i] == 1));
        self.crc
            .check(&word)
            .then(|| BitVector::from_bools(word.iter().take(self.k)))
    }
}

pub fn ca_polar_encode(spec: &PolarSpec, msg: &BitVector) -> Result<BitVector> {
    spec.encode(msg)
}

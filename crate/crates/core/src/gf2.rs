//! Dense linear algebra over GF(2).
//!
//! Vectors and matrices are bit-packed into `u64` words, row-major. Every
//! operation is defined on logical bits; padding bits past the logical length
//! are kept at zero so word-level comparisons and popcounts stay exact.
//!
//! Besides the usual rank / solve / kernel routines, this module certifies
//! whether two affine codes `{u G_i + v_i}` share a codeword, using only their
//! parity-check matrices `H_i` and syndromes `s_i = v_i H_i^T`: the common
//! codewords are exactly the solutions of `[H_0; H_1] x^T = [s_0; s_1]`.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

#[inline]
fn tail_mask(bits: usize) -> u64 {
    match bits % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// A fixed-length vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self {
            len,
            words: vec![u64::MAX; words_for(len)],
        };
        v.clear_padding();
        v
    }

    /// Builds a vector from `0`/`1` bytes; any nonzero byte counts as `1`.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        v
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<u8> = bits.into_iter().map(u8::from).collect();
        Self::from_bits(&bits)
    }

    /// Lowest `len` bits of `value`, bit `i` of the integer becoming element `i`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD_BITS);
        let mut v = Self::zeros(len);
        if len > 0 {
            v.words[0] = value & tail_mask(len);
        }
        v
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self {
            len,
            words: (0..words_for(len)).map(|_| rng.gen()).collect(),
        };
        v.clear_padding();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if bit {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / WORD_BITS] ^= 1 << (i % WORD_BITS);
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &Self) -> bool {
        assert_eq!(self.len, other.len, "dot of vectors with different lengths");
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Bits as `0`/`1` bytes.
    pub fn to_bits(&self) -> Vec<u8> {
        self.iter().map(u8::from).collect()
    }

    /// Elements at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self::from_bools(indices.iter().map(|&i| self.get(i)))
    }

    pub fn concat(&self, other: &Self) -> Self {
        Self::from_bools(self.iter().chain(other.iter()))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn clear_padding(&mut self) {
        if let Some(last) = self.words.last_mut() {
            *last &= tail_mask(self.len);
        }
    }
}

impl BitXorAssign<&BitVector> for BitVector {
    fn bitxor_assign(&mut self, rhs: &BitVector) {
        assert_eq!(self.len, rhs.len, "xor of vectors with different lengths");
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a ^= b;
        }
    }
}

impl BitXor for &BitVector {
    type Output = BitVector;

    fn bitxor(self, rhs: &BitVector) -> BitVector {
        let mut out = self.clone();
        out ^= rhs;
        out
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;

    /// Parses a string of `0`/`1` characters; whitespace and `_` are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                '_' => {}
                c if c.is_whitespace() => {}
                c => return Err(Error::Parse(format!("invalid bit character {c:?}"))),
            }
        }
        Ok(Self::from_bits(&bits))
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A dense `rows x cols` matrix over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Stacks row vectors. `cols` is needed so that an empty row list still
    /// has a well-defined width.
    pub fn from_rows(rows: &[BitVector], cols: usize) -> Result<Self> {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            m.row_words_mut(i).copy_from_slice(r.words());
        }
        Ok(m)
    }

    /// Parses rows written as `0`/`1` strings.
    pub fn parse_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let parsed: Vec<BitVector> = rows
            .iter()
            .map(|r| r.as_ref().parse())
            .collect::<Result<_>>()?;
        let cols = parsed.first().map_or(0, BitVector::len);
        Self::from_rows(&parsed, cols)
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let v: Vec<BitVector> = (0..rows).map(|_| BitVector::random(cols, rng)).collect();
        Self::from_rows(&v, cols).expect("rows have the requested width")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols);
        self.data[r * self.stride + c / WORD_BITS] >> (c % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, bit: bool) {
        assert!(r < self.rows && c < self.cols);
        let idx = r * self.stride + c / WORD_BITS;
        let mask = 1u64 << (c % WORD_BITS);
        if bit {
            self.data[idx] |= mask;
        } else {
            self.data[idx] &= !mask;
        }
    }

    #[inline]
    fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> BitVector {
        BitVector {
            len: self.cols,
            words: self.row_words(r).to_vec(),
        }
    }

    pub fn row_vectors(&self) -> Vec<BitVector> {
        (0..self.rows).map(|r| self.row(r)).collect()
    }

    /// `[self; other]`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack {} columns on {} columns",
                other.cols, self.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            stride: self.stride,
            data,
        })
    }

    /// `[self | v^T]`: appends `v` as an extra column.
    pub fn augment(&self, v: &BitVector) -> Result<Self> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "augmenting column of length {} onto {} rows",
                v.len(),
                self.rows
            )));
        }
        let mut m = Self::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            let (src, dst) = (self.row_words(r).to_vec(), m.row_words_mut(r));
            dst[..src.len()].copy_from_slice(&src);
            if v.get(r) {
                m.set(r, self.cols, true);
            }
        }
        Ok(m)
    }

    /// `self * v^T`, a vector of length `rows`. This is the syndrome map
    /// when `self` is a parity-check matrix.
    pub fn mul_vec(&self, v: &BitVector) -> BitVector {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        let mut out = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            let parity = self
                .row_words(r)
                .iter()
                .zip(v.words())
                .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones());
            if parity & 1 == 1 {
                out.set(r, true);
            }
        }
        out
    }

    /// `u * self`, a vector of length `cols`. This is encoding when `self`
    /// is a generator matrix.
    pub fn vec_mul(&self, u: &BitVector) -> BitVector {
        assert_eq!(u.len(), self.rows, "vector-matrix dimension mismatch");
        let mut out = BitVector::zeros(self.cols);
        for r in (0..self.rows).filter(|&r| u.get(r)) {
            for (o, w) in out.words.iter_mut().zip(self.row_words(r)) {
                *o ^= w;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.data.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    /// In-place reduction to reduced row echelon form. Pivots are taken
    /// column by column, choosing the first row at or below the current one
    /// with a nonzero entry, so the result is deterministic. Returns the
    /// pivot column of each of the first `rank` rows.
    fn reduce(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let (w, mask) = (c / WORD_BITS, 1u64 << (c % WORD_BITS));
            let Some(p) = (r..self.rows).find(|&i| self.data[i * self.stride + w] & mask != 0)
            else {
                continue;
            };
            self.swap_rows(r, p);
            for i in 0..self.rows {
                if i != r && self.data[i * self.stride + w] & mask != 0 {
                    // row r is zero left of column c
                    for k in w..self.stride {
                        let src = self.data[r * self.stride + k];
                        self.data[i * self.stride + k] ^= src;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    /// Reduced row echelon form and its pivot columns.
    pub fn rref(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.reduce();
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }
}

impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            writeln!(f, "{}", self.row(r))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        fmt::Display::fmt(self, f)
    }
}

/// GF(2) rank.
pub fn rank(m: &BitMatrix) -> usize {
    m.rank()
}

/// Solution set of `a x^T = b^T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AffineSolution {
    Inconsistent,
    /// Every solution is `particular + span(kernel)`; `kernel` is a basis of
    /// the right nullspace of `a` with `cols - rank(a)` vectors.
    Consistent {
        particular: BitVector,
        kernel: Vec<BitVector>,
    },
}

impl AffineSolution {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Self::Consistent { .. })
    }
}

/// Solves `a x^T = b^T`. Free variables of the particular solution are zero.
pub fn solve_affine(a: &BitMatrix, b: &BitVector) -> Result<AffineSolution> {
    let n = a.cols();
    let aug = a.augment(b)?;
    let (reduced, pivots) = aug.rref();
    if pivots.last() == Some(&n) {
        return Ok(AffineSolution::Inconsistent);
    }
    let mut particular = BitVector::zeros(n);
    for (i, &p) in pivots.iter().enumerate() {
        if reduced.get(i, n) {
            particular.set(p, true);
        }
    }
    Ok(AffineSolution::Consistent {
        particular,
        kernel: kernel_from_rref(&reduced, &pivots, n),
    })
}

/// Basis of the right nullspace `{x : m x^T = 0}`.
pub fn nullspace(m: &BitMatrix) -> Vec<BitVector> {
    let (reduced, pivots) = m.rref();
    kernel_from_rref(&reduced, &pivots, m.cols())
}

fn kernel_from_rref(reduced: &BitMatrix, pivots: &[usize], n: usize) -> Vec<BitVector> {
    let mut is_pivot = vec![false; n];
    for &p in pivots {
        is_pivot[p] = true;
    }
    (0..n)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut x = BitVector::zeros(n);
            x.set(f, true);
            for (i, &p) in pivots.iter().enumerate() {
                if reduced.get(i, f) {
                    x.set(p, true);
                }
            }
            x
        })
        .collect()
}

/// Parity-check matrix `H` of the code generated by the rows of `g`.
///
/// `g` is brought to reduced echelon form; its pivot columns play the role of
/// the systematic positions and every non-pivot column `f` yields one check
/// `x_f + sum_i A[i][f] x_{p_i} = 0`. The column permutation this implies is
/// never materialised, so `H` comes out in the original column order with
/// `n - k` rows, full row rank and `g H^T = 0`.
pub fn parity_check_from_generator(g: &BitMatrix) -> Result<BitMatrix> {
    let (reduced, pivots) = g.rref();
    if pivots.len() != g.rows() {
        return Err(Error::RankDeficient {
            rank: pivots.len(),
            rows: g.rows(),
        });
    }
    let checks = kernel_from_rref(&reduced, &pivots, g.cols());
    BitMatrix::from_rows(&checks, g.cols())
}

/// `dim(C_0 ∩ C_1) = n - rank([H_0; H_1])` for two linear codes given by
/// their parity-check matrices.
pub fn linear_intersection_dim(h0: &BitMatrix, h1: &BitMatrix) -> Result<usize> {
    let stacked = h0.vstack(h1)?;
    Ok(stacked.cols() - stacked.rank())
}

/// `s = v H^T`.
pub fn syndrome(h: &BitMatrix, v: &BitVector) -> BitVector {
    h.mul_vec(v)
}

/// Verdict on the intersection of two affine codes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum CosetIntersection {
    Empty,
    /// The intersection is an affine space of dimension `dim` containing
    /// `witness`, so it holds `2^dim` words.
    Nonempty { dim: usize, witness: BitVector },
}

impl CosetIntersection {
    pub fn is_empty(&self) -> bool {
        matches!(self, Self::Empty)
    }

    /// Number of shared codewords.
    pub fn size(&self) -> u128 {
        match self {
            Self::Empty => 0,
            Self::Nonempty { dim, .. } => 1u128 << dim,
        }
    }
}

impl fmt::Display for CosetIntersection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => f.write_str("empty"),
            Self::Nonempty { dim, .. } => write!(f, "nonempty, dim {dim}"),
        }
    }
}

/// Intersection of `{x : H_0 x^T = s_0^T}` and `{x : H_1 x^T = s_1^T}`.
pub fn coset_intersection(
    h0: &BitMatrix,
    s0: &BitVector,
    h1: &BitMatrix,
    s1: &BitVector,
) -> Result<CosetIntersection> {
    if s0.len() != h0.rows() || s1.len() != h1.rows() {
        return Err(Error::DimensionMismatch(format!(
            "syndrome lengths ({}, {}) do not match check counts ({}, {})",
            s0.len(),
            s1.len(),
            h0.rows(),
            h1.rows()
        )));
    }
    let stacked = h0.vstack(h1)?;
    match solve_affine(&stacked, &s0.concat(s1))? {
        AffineSolution::Inconsistent => Ok(CosetIntersection::Empty),
        AffineSolution::Consistent { particular, kernel } => Ok(CosetIntersection::Nonempty {
            dim: kernel.len(),
            witness: particular,
        }),
    }
}

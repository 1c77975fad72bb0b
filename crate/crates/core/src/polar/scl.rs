//! Successive-cancellation list decoding.
//!
//! Each path keeps, per tree layer `λ` (node size `s = n >> λ`), its LLRs and
//! the partial sums of the last decided left child in `[s, 2s)` of a `2n`
//! buffer; layer 0 is the channel itself. Path metrics add `|L|` whenever a
//! decision disagrees with the sign of its LLR.

use std::cmp::Ordering;

use super::{CrcSpec, PolarSpec};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SclOutcome {
    Decoded { codeword: BitVector, message: BitVector },
    Erasure,
}

impl SclOutcome {
    pub fn is_erasure(&self) -> bool {
        matches!(self, SclOutcome::Erasure)
    }

    pub fn codeword(&self) -> Option<&BitVector> {
        match self {
            SclOutcome::Decoded { codeword, .. } => Some(codeword),
            SclOutcome::Erasure => None,
        }
    }

    pub fn message(&self) -> Option<&BitVector> {
        match self {
            SclOutcome::Decoded { message, .. } => Some(message),
            SclOutcome::Erasure => None,
        }
    }
}

#[derive(Clone)]
struct Path<R> {
    alpha: Vec<R>,
    left: Vec<u8>,
    u: Vec<u8>,
    codeword: Vec<u8>,
    metric: R,
}

impl<R: Real> Path<R> {
    fn new(n: usize) -> Self {
        Self {
            alpha: vec![R::zero(); 2 * n],
            left: vec![0; 2 * n],
            u: vec![0; n],
            codeword: vec![0; n],
            metric: R::zero(),
        }
    }

    fn copy_from(&mut self, other: &Self) {
        self.alpha.copy_from_slice(&other.alpha);
        self.left.copy_from_slice(&other.left);
        self.u.copy_from_slice(&other.u);
        self.metric = other.metric;
    }

    /// LLR of leaf `phi`, updating only the layers that changed since `phi − 1`.
    fn leaf_llr(&mut self, channel: &[R], phi: usize, m: usize) -> R {
        let n = channel.len();
        let start = if phi == 0 {
            1
        } else {
            m - phi.trailing_zeros() as usize
        };
        for layer in start..=m {
            let s = n >> layer;
            let (lo, hi) = self.alpha.split_at_mut(2 * s);
            let out = &mut lo[s..];
            let parent = if layer == 1 { channel } else { &hi[..2 * s] };
            let (a, b) = parent.split_at(s);
            if layer == start && phi != 0 {
                let bits = &self.left[s..2 * s];
                for i in 0..s {
                    out[i] = if bits[i] == 0 { b[i] + a[i] } else { b[i] - a[i] };
                }
            } else {
                for i in 0..s {
                    let mag = a[i].abs().min(b[i].abs());
                    out[i] = if (a[i] < R::zero()) != (b[i] < R::zero()) { -mag } else { mag };
                }
            }
        }
        self.alpha[1]
    }

    /// Records `u_phi` and folds completed subtrees into partial sums.
    fn commit(&mut self, phi: usize, bit: u8, m: usize, a: &mut Vec<u8>, b: &mut Vec<u8>) {
        let n = self.u.len();
        self.u[phi] = bit;
        a.clear();
        a.push(bit);
        let mut layer = m;
        loop {
            if layer == 0 {
                self.codeword.copy_from_slice(a);
                return;
            }
            let s = n >> layer;
            if (phi >> (m - layer)) & 1 == 0 {
                self.left[s..2 * s].copy_from_slice(a);
                return;
            }
            b.clear();
            b.extend(self.left[s..2 * s].iter().zip(a.iter()).map(|(l, c)| l ^ c));
            b.extend_from_slice(a);
            std::mem::swap(a, b);
            layer -= 1;
        }
    }
}

/// Reusable SCL workspace for one code; each worker owns its own.
pub struct SclDecoder<R> {
    spec: PolarSpec,
    pool: Vec<Path<R>>,
    live: Vec<usize>,
    scratch: (Vec<u8>, Vec<u8>),
}

impl<R: Real> SclDecoder<R> {
    pub fn new(spec: &PolarSpec) -> Self {
        Self {
            spec: spec.clone(),
            pool: Vec::new(),
            live: Vec::new(),
            scratch: (Vec::new(), Vec::new()),
        }
    }

    pub fn spec(&self) -> &PolarSpec {
        &self.spec
    }

    fn free_slot(&mut self, used: &[bool]) -> usize {
        match (0..self.pool.len()).find(|&i| !used[i]) {
            Some(i) => i,
            None => {
                self.pool.push(Path::new(self.spec.n()));
                self.pool.len() - 1
            }
        }
    }

    /// Decodes channel LLRs (`log P(0)/P(1)` per position).
    pub fn decode(&mut self, llrs: &[R]) -> Result<SclOutcome> {
        let n = self.spec.n();
        if llrs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "received {} LLRs, blocklength is {n}",
                llrs.len()
            )));
        }
        let m = n.trailing_zeros() as usize;
        let list_size = self.spec.list_size();
        if self.pool.is_empty() {
            self.pool.push(Path::new(n));
        }
        self.pool[0].metric = R::zero();
        self.live.clear();
        self.live.push(0);
        let (mut sa, mut sb) = std::mem::take(&mut self.scratch);
        let mut leaf = Vec::new();
        let mut candidates: Vec<(R, usize, u8)> = Vec::new();

        for phi in 0..n {
            leaf.clear();
            for &p in &self.live {
                leaf.push(self.pool[p].leaf_llr(llrs, phi, m));
            }
            if self.spec.is_frozen(phi) {
                for (&p, &l) in self.live.iter().zip(&leaf) {
                    let path = &mut self.pool[p];
                    if l < R::zero() {
                        path.metric += -l;
                    }
                    path.commit(phi, 0, m, &mut sa, &mut sb);
                }
                continue;
            }
            candidates.clear();
            for (pos, (&p, &l)) in self.live.iter().zip(&leaf).enumerate() {
                let metric = self.pool[p].metric;
                let (pen0, pen1) = if l < R::zero() { (-l, R::zero()) } else { (R::zero(), l) };
                candidates.push((metric + pen0, pos, 0));
                candidates.push((metric + pen1, pos, 1));
            }
            if candidates.len() > list_size {
                candidates.sort_by(|x, y| {
                    x.0.partial_cmp(&y.0)
                        .unwrap_or(Ordering::Equal)
                        .then(x.1.cmp(&y.1))
                        .then(x.2.cmp(&y.2))
                });
                candidates.truncate(list_size);
            }
            let mut keep = vec![[None::<R>; 2]; self.live.len()];
            for &(metric, pos, bit) in &candidates {
                keep[pos][bit as usize] = Some(metric);
            }
            let mut used = vec![false; self.pool.len()];
            for (pos, k) in keep.iter().enumerate() {
                if k[0].is_some() || k[1].is_some() {
                    used[self.live[pos]] = true;
                }
            }
            let mut next_live = Vec::with_capacity(candidates.len());
            for (pos, k) in keep.iter().enumerate() {
                let p = self.live[pos];
                match (k[0], k[1]) {
                    (Some(m0), Some(m1)) => {
                        let q = self.free_slot(&used);
                        if q >= used.len() {
                            used.resize(q + 1, false);
                        }
                        used[q] = true;
                        let (src, dst) = if p < q {
                            let (x, y) = self.pool.split_at_mut(q);
                            (&x[p], &mut y[0])
                        } else {
                            let (x, y) = self.pool.split_at_mut(p);
                            (&y[0], &mut x[q])
                        };
                        dst.copy_from(src);
                        self.pool[p].metric = m0;
                        self.pool[p].commit(phi, 0, m, &mut sa, &mut sb);
                        self.pool[q].metric = m1;
                        self.pool[q].commit(phi, 1, m, &mut sa, &mut sb);
                        next_live.push(p);
                        next_live.push(q);
                    }
                    (Some(metric), None) | (None, Some(metric)) => {
                        let bit = u8::from(k[0].is_none());
                        self.pool[p].metric = metric;
                        self.pool[p].commit(phi, bit, m, &mut sa, &mut sb);
                        next_live.push(p);
                    }
                    (None, None) => {}
                }
            }
            self.live = next_live;
        }
        self.scratch = (sa, sb);
        Ok(self.select(llrs))
    }

    /// Most likely CRC-valid list entry, or an erasure.
    fn select(&self, llrs: &[R]) -> SclOutcome {
        let crc: &CrcSpec = self.spec.crc();
        let info = self.spec.info_set();
        let mut best: Option<(R, usize)> = None;
        for &p in &self.live {
            let path = &self.pool[p];
            let word = BitVector::from_bools(info.iter().map(|&i| path.u[i] == 1));
            if !crc.check(&word) {
                continue;
            }
            let score = llrs
                .iter()
                .zip(&path.codeword)
                .fold(R::zero(), |acc, (&l, &c)| if c == 1 { acc - l } else { acc + l });
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, p));
            }
        }
        match best {
            None => SclOutcome::Erasure,
            Some((_, p)) => {
                let path = &self.pool[p];
                SclOutcome::Decoded {
                    codeword: BitVector::from_bits(&path.codeword),
                    message: BitVector::from_bools(
                        info.iter().take(self.spec.k()).map(|&i| path.u[i] == 1),
                    ),
                }
            }
        }
    }
}

/// One-shot decoding; keep an [`SclDecoder`] around when decoding many frames.
pub fn scl_decode<R: Real>(spec: &PolarSpec, llrs: &[R]) -> Result<SclOutcome> {
    SclDecoder::new(spec).decode(llrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{llr, modulate_bpsk, transmit, ChannelParams, RngStream};
    use crate::polar::Construction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn crc6() -> CrcSpec {
        CrcSpec::new(0x61).unwrap()
    }

    #[test]
    fn noiseless_codewords_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, k, l) in [(16, 4, 4), (128, 40, 8), (256, 60, 32)] {
            let spec = PolarSpec::new(n, k, crc6(), l).unwrap();
            let mut dec = SclDecoder::<f64>::new(&spec);
            for _ in 0..5 {
                let msg = BitVector::random(k, &mut rng);
                let c = spec.encode(&msg).unwrap();
                let llrs: Vec<f64> = modulate_bpsk::<f64>(&c).iter().map(|v| 4.0 * v).collect();
                let out = dec.decode(&llrs).unwrap();
                assert_eq!(out.codeword(), Some(&c));
                assert_eq!(out.message(), Some(&msg));
            }
        }
    }

    #[test]
    fn list_of_one_is_successive_cancellation() {
        // plain SC: hard decisions on each leaf LLR, computed by direct recursion
        fn sc(llr: &[f64], frozen: &[bool]) -> (Vec<u8>, Vec<u8>) {
            let n = llr.len();
            if n == 1 {
                let u = if frozen[0] { 0 } else { u8::from(llr[0] < 0.0) };
                return (vec![u], vec![u]);
            }
            let h = n / 2;
            let f: Vec<f64> = (0..h)
                .map(|i| llr[i].signum() * llr[h + i].signum() * llr[i].abs().min(llr[h + i].abs()))
                .collect();
            let (ul, xl) = sc(&f, &frozen[..h]);
            let g: Vec<f64> = (0..h)
                .map(|i| llr[h + i] + if xl[i] == 0 { llr[i] } else { -llr[i] })
                .collect();
            let (ur, xr) = sc(&g, &frozen[h..]);
            let x = xl.iter().zip(&xr).map(|(a, b)| a ^ b).chain(xr.iter().copied()).collect();
            (ul.into_iter().chain(ur).collect(), x)
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = PolarSpec::new(64, 20, crc6(), 1).unwrap();
        let frozen: Vec<bool> = (0..64).map(|i| spec.is_frozen(i)).collect();
        let mut dec = SclDecoder::<f64>::new(&spec);
        for _ in 0..200 {
            let llrs: Vec<f64> = (0..64).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (u, x) = sc(&llrs, &frozen);
            dec.decode(&llrs).unwrap();
            let path = &dec.pool[dec.live[0]];
            assert_eq!(path.u, u);
            assert_eq!(path.codeword, x);
        }
    }

    #[test]
    fn saturated_list_is_ml_over_crc_valid_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 3;
        let spec = PolarSpec::with_construction(
            16,
            k,
            crc6(),
            1 << (k + 6),
            Construction::Bhattacharyya { design_esn0_db: 0.0 },
        )
        .unwrap();
        let book: Vec<BitVector> = (0..1u64 << k)
            .map(|m| spec.encode(&BitVector::from_u64(m, k)).unwrap())
            .collect();
        let mut dec = SclDecoder::<f64>::new(&spec);
        for _ in 0..300 {
            let llrs: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let score = |c: &BitVector| -> f64 {
                llrs.iter().zip(c.iter()).map(|(l, b)| if b { -l } else { *l }).sum()
            };
            let best = book
                .iter()
                .max_by(|a, b| score(a).partial_cmp(&score(b)).unwrap())
                .unwrap();
            assert_eq!(dec.decode(&llrs).unwrap().codeword(), Some(best));
        }
    }

    #[test]
    fn garbage_is_mostly_erased() {
        // a wrong-length CRC-valid output slips through with probability about L 2^-r
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = PolarSpec::new(128, 40, CrcSpec::new(0xE21).unwrap(), 4).unwrap();
        let mut dec = SclDecoder::<f64>::new(&spec);
        let trials = 2000;
        let mut erasures = 0;
        for _ in 0..trials {
            let llrs: Vec<f64> = (0..128).map(|_| if rng.gen() { 50.0 } else { -50.0 }).collect();
            if dec.decode(&llrs).unwrap().is_erasure() {
                erasures += 1;
            }
        }
        let p_pass = 1.0 - erasures as f64 / trials as f64;
        let bound = 4.0 / 2048.0;
        assert!(p_pass <= bound + 4.0 * (bound / trials as f64).sqrt(), "{p_pass}");
    }

    #[test]
    fn decoded_words_satisfy_constraints() {
        let spec = PolarSpec::new(128, 50, crc6(), 8).unwrap();
        let mut dec = SclDecoder::<f32>::new(&spec);
        let params = ChannelParams::from_esn0_db(0.0f32).unwrap();
        for f in 0..200 {
            let c = spec.encode(&BitVector::from_u64(f, 50)).unwrap();
            let y = transmit(&modulate_bpsk::<f32>(&c), &params, &RngStream::new(5, f));
            if let SclOutcome::Decoded { codeword, message } = dec.decode(&llr(&y, &params)).unwrap() {
                assert_eq!(spec.extract_message(&codeword), Some(message));
            }
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let spec = PolarSpec::new(16, 4, crc6(), 2).unwrap();
        assert!(scl_decode(&spec, &[0.0f64; 8]).is_err());
    }
}

//! Zero-tail terminated convolutional codes with puncturing.
//!
//! A rate `1/n_i` feedforward encoder of memory `ν` is fed `k` message bits
//! followed by `ν` zeros, producing `(k + ν) n_i` bits; `(k + ν) n_i − n` of
//! them are then deleted to reach blocklength `n`.
//!
//! Generators are written in octal with the most significant digit holding
//! the lowest-degree taps (`[133, 171]` for the classic `ν = 6` code). With
//! the shift register packed as `r = u_t 2^ν + u_{t−1} 2^(ν−1) + … + u_{t−ν}`,
//! generator `g` then outputs `parity(r & g)` directly.
//!
//! Decoding works on the trellis: Viterbi for the ML codeword and a
//! log-sum-exp forward recursion for the log of the summed likelihoods of all
//! codewords. Punctured positions contribute nothing to any branch metric.

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};
use crate::scalar::Real;

const MAX_MEMORY: usize = 16;
const MAX_OUTPUTS: usize = 12;

/// Parses `"133,171"` (optionally bracketed) as octal generator polynomials.
pub fn parse_octal_generators(text: &str) -> Result<Vec<u32>> {
    let trimmed = text.trim().trim_start_matches('[').trim_end_matches(']');
    trimmed
        .split(',')
        .map(|g| {
            let g = g.trim();
            u32::from_str_radix(g, 8)
                .map_err(|e| Error::Parse(format!("generator {g:?} is not octal: {e}")))
        })
        .collect()
}

pub fn format_octal_generators(generators: &[u32]) -> String {
    generators
        .iter()
        .map(|g| format!("{g:o}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Evenly spread puncturing: the `P = total − n` dropped positions are
/// `⌊l · total / P⌋` for `l = 0 .. P`.
pub fn even_puncture_pattern(total: usize, n: usize) -> Vec<usize> {
    let p = total.saturating_sub(n);
    (0..p).map(|l| l * total / p).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZtccSpec {
    generators: Vec<u32>,
    memory: usize,
    k: usize,
    n: usize,
    puncture: Vec<usize>,
}

impl ZtccSpec {
    /// Code with the evenly spread puncturing pattern.
    pub fn new(generators: Vec<u32>, memory: usize, k: usize, n: usize) -> Result<Self> {
        if generators.is_empty() || generators.len() > MAX_OUTPUTS {
            return Err(Error::InvalidParameter(format!(
                "between 1 and {MAX_OUTPUTS} generators are supported, got {}",
                generators.len()
            )));
        }
        if memory == 0 || memory > MAX_MEMORY {
            return Err(Error::InvalidParameter(format!(
                "memory must be in 1..={MAX_MEMORY}, got {memory}"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("message length must be positive".into()));
        }
        for &g in &generators {
            if g == 0 || g >> (memory + 1) != 0 {
                return Err(Error::InvalidParameter(format!(
                    "generator {g:o} (octal) does not fit memory {memory}"
                )));
            }
        }
        let total = (k + memory) * generators.len();
        if total < n {
            return Err(Error::InvalidParameter(format!(
                "unpunctured length {total} is shorter than the blocklength {n}"
            )));
        }
        let puncture = even_puncture_pattern(total, n);
        Ok(Self {
            generators,
            memory,
            k,
            n,
            puncture,
        })
    }

    /// Replaces the puncturing pattern; positions index the unpunctured
    /// output stream.
    pub fn with_puncture_pattern(mut self, mut pattern: Vec<usize>) -> Result<Self> {
        pattern.sort_unstable();
        pattern.dedup();
        let total = self.unpunctured_len();
        if pattern.len() != total - self.n || pattern.last().is_some_and(|&p| p >= total) {
            return Err(Error::InvalidParameter(format!(
                "puncture pattern must drop exactly {} distinct positions below {total}",
                total - self.n
            )));
        }
        self.puncture = pattern;
        Ok(self)
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Outputs per trellis section.
    pub fn outputs(&self) -> usize {
        self.generators.len()
    }

    pub fn sections(&self) -> usize {
        self.k + self.memory
    }

    pub fn unpunctured_len(&self) -> usize {
        self.sections() * self.outputs()
    }

    pub fn puncture_pattern(&self) -> &[usize] {
        &self.puncture
    }

    /// Section output label for register contents `r`.
    #[inline]
    fn label(&self, register: u32) -> u32 {
        self.generators
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &g)| acc | ((register & g).count_ones() & 1) << j)
    }

    pub fn encode(&self, msg: &BitVector) -> Result<BitVector> {
        if msg.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "message has {} bits, code expects {}",
                msg.len(),
                self.k
            )));
        }
        let mut out = Vec::with_capacity(self.unpunctured_len());
        let mut state = 0u32;
        for t in 0..self.sections() {
            let u = u32::from(t < self.k && msg.get(t));
            let register = u << self.memory | state;
            let label = self.label(register);
            out.extend((0..self.outputs()).map(|j| (label >> j & 1) as u8));
            state = register >> 1;
        }
        let mut punctured = vec![false; out.len()];
        for &p in &self.puncture {
            punctured[p] = true;
        }
        let kept: Vec<u8> = out
            .into_iter()
            .zip(punctured)
            .filter_map(|(b, p)| (!p).then_some(b))
            .collect();
        Ok(BitVector::from_bits(&kept))
    }

    /// `k x n` generator matrix, row `i` being the encoding of unit vector `e_i`.
    pub fn generator_matrix(&self) -> BitMatrix {
        let rows: Vec<BitVector> = (0..self.k)
            .map(|i| {
                let mut e = BitVector::zeros(self.k);
                e.set(i, true);
                self.encode(&e).expect("unit vector has the message length")
            })
            .collect();
        BitMatrix::from_rows(&rows, self.n).expect("encodings have the blocklength")
    }
}

/// ML decision of the Viterbi decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ViterbiOutput<R> {
    pub message: BitVector,
    pub codeword: BitVector,
    /// `⟨y, modulate(codeword)⟩ / σ²`, the log-likelihood up to a constant
    /// shared by every codeword.
    pub metric: R,
}

/// State-transition structure of a [`ZtccSpec`], shared read-only by decoders.
///
/// State `j` holds the last `ν` inputs with the most recent one in bit
/// `ν − 1`. The two predecessors of `j` are `((j << 1) & mask) | b`, both
/// reached with input `j >> (ν − 1)`; they differ in the oldest input `b`.
#[derive(Clone, Debug)]
pub struct Trellis {
    spec: ZtccSpec,
    num_states: usize,
    /// Output label of the branch from predecessor `b` into state `j`, at `2 j + b`.
    pred_label: Vec<u32>,
    /// For each unpunctured output position, its index in the received vector.
    positions: Vec<Option<usize>>,
}

impl Trellis {
    pub fn new(spec: &ZtccSpec) -> Self {
        let nu = spec.memory;
        let num_states = 1usize << nu;
        let mask = num_states - 1;
        let mut pred_label = Vec::with_capacity(2 * num_states);
        for j in 0..num_states {
            let u = (j >> (nu - 1)) as u32;
            for b in 0..2 {
                let pred = ((j << 1) & mask | b) as u32;
                pred_label.push(spec.label(u << nu | pred));
            }
        }
        let mut positions = vec![None; spec.unpunctured_len()];
        let mut punctured = vec![false; spec.unpunctured_len()];
        for &p in &spec.puncture {
            punctured[p] = true;
        }
        let mut next = 0;
        for (slot, p) in positions.iter_mut().zip(punctured) {
            if !p {
                *slot = Some(next);
                next += 1;
            }
        }
        Self {
            spec: spec.clone(),
            num_states,
            pred_label,
            positions,
        }
    }

    pub fn spec(&self) -> &ZtccSpec {
        &self.spec
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Predecessor states of `state`, with the output label of each branch.
    pub fn predecessors(&self, state: usize) -> [(usize, u32); 2] {
        let base = (state << 1) & (self.num_states - 1);
        [
            (base, self.pred_label[2 * state]),
            (base | 1, self.pred_label[2 * state + 1]),
        ]
    }

    fn check_len<R>(&self, y: &[R]) -> Result<()> {
        if y.len() != self.spec.n {
            return Err(Error::DimensionMismatch(format!(
                "received {} values, blocklength is {}",
                y.len(),
                self.spec.n
            )));
        }
        Ok(())
    }

    /// Branch metrics `⟨y_t, x⟩ / σ²` of section `t` for every label `x`.
    fn branch_metrics<R: Real>(&self, y: &[R], inv_var: R, t: usize, out: &mut [R]) {
        let outputs = self.spec.outputs();
        let mut vals = [R::zero(); MAX_OUTPUTS];
        for (j, v) in vals.iter_mut().enumerate().take(outputs) {
            *v = match self.positions[t * outputs + j] {
                Some(i) => y[i] * inv_var,
                None => R::zero(),
            };
        }
        for (label, m) in out.iter_mut().enumerate() {
            *m = (0..outputs).fold(R::zero(), |acc, j| {
                if label >> j & 1 == 1 {
                    acc - vals[j]
                } else {
                    acc + vals[j]
                }
            });
        }
    }

    /// `log Σ_c exp(⟨y, modulate(c)⟩ / σ²)` over all codewords, by the
    /// forward recursion `M_{t+1}(j) = log Σ_{i → j} exp(M_t(i) + μ_t(i → j))`
    /// from `M_0(0) = 0`, read off at state 0 after the tail.
    pub fn forward_log_likelihood<R: Real>(&self, y: &[R], sigma: R) -> Result<R> {
        self.check_len(y)?;
        let inv_var = (sigma * sigma).recip();
        let s = self.num_states;
        let half = s >> 1;
        let mut bm = vec![R::zero(); 1 << self.spec.outputs()];
        let mut cur = vec![R::neg_infinity(); s];
        let mut next = vec![R::neg_infinity(); s];
        cur[0] = R::zero();
        for t in 0..self.spec.sections() {
            self.branch_metrics(y, inv_var, t, &mut bm);
            // tail sections only admit input 0, i.e. the lower half of states
            let live = if t < self.spec.k { s } else { half };
            for j in 0..live {
                let base = (j << 1) & (s - 1);
                let a = cur[base] + bm[self.pred_label[2 * j] as usize];
                let b = cur[base | 1] + bm[self.pred_label[2 * j + 1] as usize];
                next[j] = R::log_add_exp(a, b);
            }
            next[live..].fill(R::neg_infinity());
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur[0])
    }

    /// ML codeword by the Viterbi algorithm. On equal path metrics the
    /// survivor whose oldest register bit is 0 is kept.
    pub fn viterbi<R: Real>(&self, y: &[R], sigma: R) -> Result<ViterbiOutput<R>> {
        self.check_len(y)?;
        let inv_var = (sigma * sigma).recip();
        let s = self.num_states;
        let half = s >> 1;
        let sections = self.spec.sections();
        let mut bm = vec![R::zero(); 1 << self.spec.outputs()];
        let mut cur = vec![R::neg_infinity(); s];
        let mut next = vec![R::neg_infinity(); s];
        let mut survivors = vec![0u8; sections * s];
        cur[0] = R::zero();
        for t in 0..sections {
            self.branch_metrics(y, inv_var, t, &mut bm);
            let live = if t < self.spec.k { s } else { half };
            let row = &mut survivors[t * s..(t + 1) * s];
            for j in 0..live {
                let base = (j << 1) & (s - 1);
                let a = cur[base] + bm[self.pred_label[2 * j] as usize];
                let b = cur[base | 1] + bm[self.pred_label[2 * j + 1] as usize];
                if b > a {
                    next[j] = b;
                    row[j] = 1;
                } else {
                    next[j] = a;
                    row[j] = 0;
                }
            }
            next[live..].fill(R::neg_infinity());
            std::mem::swap(&mut cur, &mut next);
        }
        let nu = self.spec.memory;
        let mut message = BitVector::zeros(self.spec.k);
        let mut state = 0usize;
        for t in (0..sections).rev() {
            if t < self.spec.k && state >> (nu - 1) & 1 == 1 {
                message.set(t, true);
            }
            state = (state << 1) & (s - 1) | survivors[t * s + state] as usize;
        }
        let codeword = self.spec.encode(&message)?;
        let metric = correlation(y, &codeword) * inv_var;
        Ok(ViterbiOutput {
            message,
            codeword,
            metric,
        })
    }
}

/// `⟨y, modulate(c)⟩`, accumulated in position order.
pub fn correlation<R: Real>(y: &[R], codeword: &BitVector) -> R {
    y.iter()
        .zip(codeword.iter())
        .fold(R::zero(), |acc, (&v, bit)| if bit { acc - v } else { acc + v })
}

/// One-shot Viterbi decoding; build a [`Trellis`] once when decoding many frames.
pub fn viterbi_decode<R: Real>(spec: &ZtccSpec, y: &[R], sigma: R) -> Result<ViterbiOutput<R>> {
    Trellis::new(spec).viterbi(y, sigma)
}

/// One-shot forward recursion; see [`Trellis::forward_log_likelihood`].
pub fn forward_log_likelihood<R: Real>(spec: &ZtccSpec, y: &[R], sigma: R) -> Result<R> {
    Trellis::new(spec).forward_log_likelihood(y, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::modulate_bpsk;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nasa(k: usize) -> ZtccSpec {
        ZtccSpec::new(vec![0o133, 0o171], 6, k, 2 * (k + 6)).unwrap()
    }

    /// Independent shift-register model: taps listed lowest degree first.
    fn shift_register(taps: &[Vec<u8>], msg: &[u8], memory: usize) -> Vec<u8> {
        let mut reg = vec![0u8; memory + 1];
        let mut out = vec![];
        for &u in msg.iter().chain(std::iter::repeat_n(&0, memory)) {
            reg.rotate_right(1);
            reg[0] = u;
            for g in taps {
                out.push(g.iter().zip(&reg).map(|(a, b)| a & b).sum::<u8>() % 2);
            }
        }
        out
    }

    #[test]
    fn octal_parsing() {
        assert_eq!(parse_octal_generators("133,171").unwrap(), vec![0o133, 0o171]);
        assert_eq!(
            parse_octal_generators("[117, 127,155,171]").unwrap(),
            vec![0o117, 0o127, 0o155, 0o171]
        );
        assert!(parse_octal_generators("138").is_err());
        assert_eq!(format_octal_generators(&[0o133, 0o171]), "133,171");
    }

    #[test]
    fn spec_validation() {
        assert!(ZtccSpec::new(vec![0o1333], 6, 8, 14).is_err()); // degree 9
        assert!(ZtccSpec::new(vec![0o133, 0o171], 0, 8, 14).is_err());
        assert!(ZtccSpec::new(vec![0o133, 0o171], 6, 8, 40).is_err()); // too long
        let s = ZtccSpec::new(vec![0o133, 0o171], 6, 8, 20).unwrap();
        assert_eq!(s.puncture_pattern().len(), 8);
        assert!(s.clone().with_puncture_pattern(vec![0, 1]).is_err());
        assert!(s.with_puncture_pattern((20..28).collect()).is_ok());
    }

    #[test]
    fn puncture_pattern_is_spread() {
        let p = even_puncture_pattern(152, 128);
        assert_eq!(p.len(), 24);
        assert_eq!(&p[..4], &[0, 6, 12, 19]);
        let mut d = p.clone();
        d.dedup();
        assert_eq!(d.len(), p.len());
        assert!(even_puncture_pattern(10, 10).is_empty());
    }

    #[test]
    fn impulse_response_matches_generators() {
        let spec = nasa(8);
        let mut msg = BitVector::zeros(8);
        msg.set(0, true);
        let c = spec.encode(&msg).unwrap().to_bits();
        // 133 -> taps 1011011, 171 -> taps 1111001 (lowest degree first)
        let expected = [1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1];
        assert_eq!(&c[..14], &expected);
        assert!(c[14..].iter().all(|&b| b == 0));
        let oracle = shift_register(
            &[vec![1, 0, 1, 1, 0, 1, 1], vec![1, 1, 1, 1, 0, 0, 1]],
            &msg.to_bits(),
            6,
        );
        assert_eq!(c, oracle);
    }

    #[test]
    fn encoder_matches_shift_register_on_random_messages() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = ZtccSpec::new(vec![0o117, 0o127, 0o155, 0o171], 6, 10, 64).unwrap();
        let taps: Vec<Vec<u8>> = spec
            .generators()
            .iter()
            .map(|&g| (0..=6).map(|d| (g >> (6 - d) & 1) as u8).collect())
            .collect();
        for _ in 0..20 {
            let msg = BitVector::random(10, &mut rng);
            let full = shift_register(&taps, &msg.to_bits(), 6);
            let kept: Vec<u8> = full
                .iter()
                .enumerate()
                .filter(|(i, _)| !spec.puncture_pattern().contains(i))
                .map(|(_, &b)| b)
                .collect();
            assert_eq!(spec.encode(&msg).unwrap().to_bits(), kept);
        }
    }

    #[test]
    fn encoding_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ZtccSpec::new(vec![0o133, 0o171], 6, 20, 48).unwrap();
        assert!(spec.encode(&BitVector::zeros(20)).unwrap().is_zero());
        for _ in 0..100 {
            let a = BitVector::random(20, &mut rng);
            let b = BitVector::random(20, &mut rng);
            let lhs = &spec.encode(&a).unwrap() ^ &spec.encode(&b).unwrap();
            assert_eq!(lhs, spec.encode(&(&a ^ &b)).unwrap());
        }
        assert!(spec.encode(&BitVector::zeros(3)).is_err());
    }

    #[test]
    fn generator_matrix_reproduces_encoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = ZtccSpec::new(vec![0o133, 0o171], 6, 12, 30).unwrap();
        let g = spec.generator_matrix();
        for _ in 0..10 {
            let m = BitVector::random(12, &mut rng);
            assert_eq!(g.vec_mul(&m), spec.encode(&m).unwrap());
        }
    }

    #[test]
    fn trellis_predecessors_are_consistent() {
        let spec = ZtccSpec::new(vec![0o5, 0o7], 2, 4, 12).unwrap();
        let t = Trellis::new(&spec);
        for j in 0..t.num_states() {
            for (p, label) in t.predecessors(j) {
                let u = (j >> 1) as u32;
                let reg = u << 2 | p as u32;
                assert_eq!(reg >> 1, j as u32);
                assert_eq!(label, spec.label(reg));
            }
        }
    }

    #[test]
    fn viterbi_recovers_noiseless_codeword() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = ZtccSpec::new(vec![0o133, 0o171], 6, 30, 64).unwrap();
        let trellis = Trellis::new(&spec);
        for _ in 0..10 {
            let msg = BitVector::random(30, &mut rng);
            let c = spec.encode(&msg).unwrap();
            let out = trellis.viterbi(&modulate_bpsk::<f64>(&c), 0.8).unwrap();
            assert_eq!(out.codeword, c);
            assert_eq!(out.message, msg);
        }
    }

    #[test]
    fn toy_forward_is_two_term_logsumexp() {
        // k = 1, ν = 1, generators 3,1: codewords 00|00 and 10|11 (no puncturing)
        let spec = ZtccSpec::new(vec![0o3, 0o1], 1, 1, 4).unwrap();
        let c1 = spec.encode(&BitVector::from_bits(&[1])).unwrap();
        assert_eq!(c1.to_bits(), vec![1, 0, 1, 1]);
        let y = [0.3f64, -1.2, 0.4, 2.0];
        let sigma = 0.9f64;
        let m0 = y.iter().sum::<f64>() / (sigma * sigma);
        let m1 = (-y[0] + y[1] - y[2] - y[3]) / (sigma * sigma);
        let direct = (m0.exp() + m1.exp()).ln();
        let f = forward_log_likelihood(&spec, &y, sigma).unwrap();
        assert!((f - direct).abs() < 1e-12);
    }

    #[test]
    fn forward_bounded_by_viterbi() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = ZtccSpec::new(vec![0o13, 0o15, 0o17], 3, 9, 30).unwrap();
        let trellis = Trellis::new(&spec);
        for _ in 0..50 {
            let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = trellis.forward_log_likelihood(&y, 1.0).unwrap();
            let v = trellis.viterbi(&y, 1.0).unwrap().metric;
            assert!(f >= v - 1e-9);
            assert!(f <= v + (9.0 + 3.0) * 2f64.ln() + 1e-9);
        }
    }

    #[test]
    fn viterbi_argmax_invariant_to_positive_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = ZtccSpec::new(vec![0o133, 0o171], 6, 16, 40).unwrap();
        let trellis = Trellis::new(&spec);
        for _ in 0..20 {
            let y: Vec<f64> = (0..40).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = trellis.viterbi(&y, 1.0).unwrap();
            let scaled: Vec<f64> = y.iter().map(|v| v * 3.7).collect();
            let b = trellis.viterbi(&scaled, 1.0).unwrap();
            assert_eq!(a.codeword, b.codeword);
        }
    }

    #[test]
    fn forward_stable_at_high_snr() {
        let spec = nasa(20);
        let c = spec.encode(&BitVector::zeros(20)).unwrap();
        let y = modulate_bpsk::<f64>(&c);
        let f = forward_log_likelihood(&spec, &y, 0.01).unwrap();
        assert!(f.is_finite());
        assert!((f - 52.0 / 1e-4).abs() / f < 1e-9);
        let f32v = forward_log_likelihood(&spec, &modulate_bpsk::<f32>(&c), 0.1f32).unwrap();
        assert!(f32v.is_finite());
    }

    #[test]
    fn decoders_reject_wrong_length() {
        let spec = nasa(4);
        assert!(viterbi_decode(&spec, &[0.0f64; 3], 1.0).is_err());
        assert!(forward_log_likelihood(&spec, &[0.0f64; 3], 1.0).is_err());
    }
}

//! Two-class unequal-message-protection codes built from cosets of linear
//! codes, with hypothesis-test-then-decode receivers.
//!
//! Class `i` uses the affine codebook `{u G_i ⊕ v_i}`. The receiver first
//! decides which class was sent by comparing a log statistic `Λ` with an
//! operational log threshold (`Λ ≥ log T` declares class 0) and then outputs
//! a codeword of the declared class:
//!
//! * LRT (convolutional only): `Λ = ℓ_0 − ℓ_1` with `ℓ_i` the log of the
//!   summed likelihoods over codebook `i`, from the trellis forward recursion.
//! * ALRT: `Λ` is the log-likelihood ratio of the two per-class ML codewords.
//!   For polar codes the per-class estimates come from CRC-aided list
//!   decoding and may be erasures; a single erasure hands the decision to the
//!   other class, a double erasure is an erasure outcome.
//!
//! Offsets are applied at the receiver by flipping the sign of channel values
//! (or LLRs) wherever `v_i` is 1, which maps the coset onto the linear code.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::llr_from_sigma;
use crate::error::{Error, Result};
use crate::gf2::{coset_intersection, parity_check_from_generator, syndrome, BitMatrix, BitVector, CosetIntersection};
use crate::polar::{PolarSpec, SclDecoder, SclOutcome};
use crate::scalar::Real;
use crate::ztcc::{correlation, Trellis, ZtccSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ztcc,
    Polar,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Ztcc => "ztcc",
            Family::Polar => "polar",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ztcc" => Ok(Family::Ztcc),
            "polar" => Ok(Family::Polar),
            _ => Err(Error::Parse(format!("unknown code family {s:?} (ztcc, polar)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMode {
    Lrt,
    Alrt,
}

impl fmt::Display for TestMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMode::Lrt => "lrt",
            TestMode::Alrt => "alrt",
        })
    }
}

impl FromStr for TestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lrt" => Ok(TestMode::Lrt),
            "alrt" => Ok(TestMode::Alrt),
            _ => Err(Error::Parse(format!("unknown test mode {s:?} (lrt, alrt)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaseCode {
    Ztcc(ZtccSpec),
    Polar(PolarSpec),
}

impl BaseCode {
    pub fn family(&self) -> Family {
        match self {
            BaseCode::Ztcc(_) => Family::Ztcc,
            BaseCode::Polar(_) => Family::Polar,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            BaseCode::Ztcc(s) => s.n(),
            BaseCode::Polar(s) => s.n(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            BaseCode::Ztcc(s) => s.k(),
            BaseCode::Polar(s) => s.k(),
        }
    }

    pub fn encode(&self, msg: &BitVector) -> Result<BitVector> {
        match self {
            BaseCode::Ztcc(s) => s.encode(msg),
            BaseCode::Polar(s) => s.encode(msg),
        }
    }

    pub fn generator_matrix(&self) -> BitMatrix {
        match self {
            BaseCode::Ztcc(s) => s.generator_matrix(),
            BaseCode::Polar(s) => s.generator_matrix(),
        }
    }
}

/// A linear base code shifted by an offset `v`.
#[derive(Clone, Debug)]
pub struct CosetCode {
    base: BaseCode,
    generator: BitMatrix,
    parity_check: BitMatrix,
    offset: BitVector,
    syndrome: BitVector,
}

impl CosetCode {
    /// The base code itself (zero offset).
    pub fn linear(base: BaseCode) -> Result<Self> {
        let generator = base.generator_matrix();
        let parity_check = parity_check_from_generator(&generator)?;
        let n = base.n();
        Ok(Self {
            syndrome: BitVector::zeros(parity_check.rows()),
            offset: BitVector::zeros(n),
            base,
            generator,
            parity_check,
        })
    }

    pub fn new(base: BaseCode, offset: BitVector) -> Result<Self> {
        Self::linear(base)?.with_offset(offset)
    }

    /// Same base code, new offset.
    pub fn with_offset(&self, offset: BitVector) -> Result<Self> {
        if offset.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "offset has {} bits, blocklength is {}",
                offset.len(),
                self.n()
            )));
        }
        Ok(Self {
            syndrome: syndrome(&self.parity_check, &offset),
            offset,
            ..self.clone()
        })
    }

    pub fn base(&self) -> &BaseCode {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn k(&self) -> usize {
        self.base.k()
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    pub fn parity_check(&self) -> &BitMatrix {
        &self.parity_check
    }

    pub fn offset(&self) -> &BitVector {
        &self.offset
    }

    pub fn syndrome(&self) -> &BitVector {
        &self.syndrome
    }

    pub fn encode(&self, msg: &BitVector) -> Result<BitVector> {
        Ok(&self.base.encode(msg)? ^ &self.offset)
    }

    /// Membership test `H xᵀ = s`.
    pub fn contains(&self, x: &BitVector) -> bool {
        x.len() == self.n() && syndrome(&self.parity_check, x) == self.syndrome
    }

    /// `ỹ_j = (1 − 2 v_j) y_j`, turning the coset into the linear code.
    pub fn remove_offset<R: Real>(&self, y: &[R]) -> Vec<R> {
        y.iter()
            .zip(self.offset.iter())
            .map(|(&v, flip)| if flip { -v } else { v })
            .collect()
    }
}

/// Draws random offsets until the two cosets are certified disjoint.
pub fn search_disjoint_offsets<G: Rng + ?Sized>(
    code0: &CosetCode,
    code1: &CosetCode,
    rng: &mut G,
    max_tries: usize,
) -> Result<(BitVector, BitVector)> {
    if code0.n() != code1.n() {
        return Err(Error::DimensionMismatch(format!(
            "blocklengths {} and {} differ",
            code0.n(),
            code1.n()
        )));
    }
    if max_tries == 0 {
        return Err(Error::InvalidParameter("max_tries must be at least 1".into()));
    }
    let n = code0.n();
    let mut last = CosetIntersection::Empty;
    for _ in 0..max_tries {
        let v0 = BitVector::random(n, rng);
        let v1 = BitVector::random(n, rng);
        let s0 = syndrome(code0.parity_check(), &v0);
        let s1 = syndrome(code1.parity_check(), &v1);
        last = coset_intersection(code0.parity_check(), &s0, code1.parity_check(), &s1)?;
        if last.is_empty() {
            return Ok((v0, v1));
        }
    }
    Err(Error::OffsetSearchFailed {
        tries: max_tries,
        last,
    })
}

/// `|A| / M_0`: the class-0 error floor when the `|A|` shared codewords are
/// assigned to class 1.
pub fn error_floor_prediction(intersection_size: u128, m0: u128) -> f64 {
    intersection_size as f64 / m0 as f64
}

/// `log T_op = log T + (k_0 − k_1) ln 2`, mapping a threshold on the ratio of
/// average likelihoods to the threshold on the ratio of summed likelihoods
/// used by the decoders.
pub fn operational_log_threshold(log_t_avg: f64, k0: usize, k1: usize) -> f64 {
    log_t_avg + (k0 as f64 - k1 as f64) * std::f64::consts::LN_2
}

pub fn average_log_threshold(log_t_op: f64, k0: usize, k1: usize) -> f64 {
    log_t_op - (k0 as f64 - k1 as f64) * std::f64::consts::LN_2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
    Erasure,
}

impl Hypothesis {
    pub fn class(&self) -> Option<usize> {
        match self {
            Hypothesis::H0 => Some(0),
            Hypothesis::H1 => Some(1),
            Hypothesis::Erasure => None,
        }
    }
}

/// A per-class codeword estimate (offset included).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub codeword: BitVector,
    pub message: BitVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeOutcome {
    pub hypothesis: Hypothesis,
    pub codeword: Option<BitVector>,
    pub message: Option<BitVector>,
    /// `Λ`; `±∞` when one class is ruled out, `None` on a double erasure.
    pub statistic: Option<f64>,
    /// Per-class estimates; a class may be missing when it was erased or,
    /// for a plain decode, when its decoder was not needed.
    pub candidates: [Option<Candidate>; 2],
}

/// Class decision for statistic `Λ`; ties go to class 0.
pub fn decide(statistic: Option<f64>, log_threshold: f64) -> Hypothesis {
    match statistic {
        None => Hypothesis::Erasure,
        Some(s) if s >= log_threshold => Hypothesis::H0,
        Some(_) => Hypothesis::H1,
    }
}

#[derive(Clone, Debug)]
pub struct UmpCode {
    classes: [CosetCode; 2],
    log_threshold: f64,
    mode: TestMode,
    certificate: CosetIntersection,
    shared_to_class1: bool,
    trellises: Option<[Trellis; 2]>,
}

impl UmpCode {
    /// Builds the code, refusing overlapping codebooks.
    pub fn new(class0: CosetCode, class1: CosetCode, log_threshold: f64, mode: TestMode) -> Result<Self> {
        let code = Self::build(class0, class1, log_threshold, mode)?;
        if !code.certificate.is_empty() {
            return Err(Error::Overlap(code.certificate));
        }
        Ok(code)
    }

    /// Builds the code even if the codebooks share words; every shared word
    /// is then attributed to class 1 by the receiver, which makes
    /// [`UmpCode::error_floor`] the limiting class-0 error rate.
    pub fn with_overlap(class0: CosetCode, class1: CosetCode, log_threshold: f64, mode: TestMode) -> Result<Self> {
        let mut code = Self::build(class0, class1, log_threshold, mode)?;
        code.shared_to_class1 = !code.certificate.is_empty();
        Ok(code)
    }

    fn build(class0: CosetCode, class1: CosetCode, log_threshold: f64, mode: TestMode) -> Result<Self> {
        if class0.n() != class1.n() {
            return Err(Error::DimensionMismatch(format!(
                "class blocklengths {} and {} differ",
                class0.n(),
                class1.n()
            )));
        }
        if log_threshold.is_nan() {
            return Err(Error::InvalidParameter("threshold is NaN".into()));
        }
        let trellises = match (class0.base(), class1.base()) {
            (BaseCode::Ztcc(a), BaseCode::Ztcc(b)) => Some([Trellis::new(a), Trellis::new(b)]),
            (BaseCode::Polar(_), BaseCode::Polar(_)) => {
                if mode == TestMode::Lrt {
                    return Err(Error::InvalidParameter(
                        "the exact likelihood-ratio test needs a trellis; use alrt for polar codes".into(),
                    ));
                }
                None
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "both classes must use the same code family".into(),
                ))
            }
        };
        let certificate = coset_intersection(
            class0.parity_check(),
            class0.syndrome(),
            class1.parity_check(),
            class1.syndrome(),
        )?;
        Ok(Self {
            classes: [class0, class1],
            log_threshold,
            mode,
            certificate,
            shared_to_class1: false,
            trellises,
        })
    }

    pub fn class(&self, i: usize) -> &CosetCode {
        &self.classes[i]
    }

    pub fn family(&self) -> Family {
        self.classes[0].base().family()
    }

    pub fn n(&self) -> usize {
        self.classes[0].n()
    }

    pub fn k(&self, class: usize) -> usize {
        self.classes[class].k()
    }

    pub fn mode(&self) -> TestMode {
        self.mode
    }

    pub fn certificate(&self) -> &CosetIntersection {
        &self.certificate
    }

    /// Operational log threshold compared against `Λ`.
    pub fn log_threshold(&self) -> f64 {
        self.log_threshold
    }

    /// The same threshold expressed on the ratio of average likelihoods.
    pub fn average_log_threshold(&self) -> f64 {
        average_log_threshold(self.log_threshold, self.k(0), self.k(1))
    }

    pub fn set_log_threshold(&mut self, log_threshold: f64) {
        self.log_threshold = log_threshold;
    }

    pub fn with_log_threshold(mut self, log_threshold: f64) -> Self {
        self.log_threshold = log_threshold;
        self
    }

    pub fn with_mode(mut self, mode: TestMode) -> Result<Self> {
        if mode == TestMode::Lrt && self.trellises.is_none() {
            return Err(Error::InvalidParameter(
                "the exact likelihood-ratio test needs a trellis; use alrt for polar codes".into(),
            ));
        }
        self.mode = mode;
        Ok(self)
    }

    /// `|A| / M_0` for this pair.
    pub fn error_floor(&self) -> f64 {
        error_floor_prediction(self.certificate.size(), 1u128 << self.k(0))
    }

    pub fn encode(&self, class: usize, msg: &BitVector) -> Result<BitVector> {
        if class > 1 {
            return Err(Error::InvalidParameter(format!("class must be 0 or 1, got {class}")));
        }
        self.classes[class].encode(msg)
    }

    /// Per-worker decoding state.
    pub fn decoder<R: Real>(&self) -> UmpDecoder<'_, R> {
        let scl = match (self.classes[0].base(), self.classes[1].base()) {
            (BaseCode::Polar(a), BaseCode::Polar(b)) => Some([SclDecoder::new(a), SclDecoder::new(b)]),
            _ => None,
        };
        UmpDecoder { code: self, scl }
    }

    /// Decodes channel outputs `y` received with noise level `sigma`.
    pub fn decode<R: Real>(&self, y: &[R], sigma: R) -> Result<DecodeOutcome> {
        self.decoder().decode(y, sigma)
    }
}

/// Receiver for one [`UmpCode`], holding list-decoder workspaces.
pub struct UmpDecoder<'a, R> {
    code: &'a UmpCode,
    scl: Option<[SclDecoder<R>; 2]>,
}

impl<R: Real> UmpDecoder<'_, R> {
    /// Decision and declared-class codeword, running only the decoders the
    /// decision needs.
    pub fn decode(&mut self, y: &[R], sigma: R) -> Result<DecodeOutcome> {
        self.run(y, sigma, [false, false])
    }

    /// Like [`UmpDecoder::decode`] but always estimates both classes, so the
    /// outcome can be re-decided for any threshold with [`redecide`].
    pub fn decode_full(&mut self, y: &[R], sigma: R) -> Result<DecodeOutcome> {
        self.run(y, sigma, [true, true])
    }

    /// Statistic plus the estimate of class `class` whatever the decision;
    /// enough to score a frame of that class at every threshold.
    pub fn decode_for_class(&mut self, y: &[R], sigma: R, class: usize) -> Result<DecodeOutcome> {
        let mut need = [false, false];
        need[class.min(1)] = true;
        self.run(y, sigma, need)
    }

    fn run(&mut self, y: &[R], sigma: R, need: [bool; 2]) -> Result<DecodeOutcome> {
        let code = self.code;
        if y.len() != code.n() {
            return Err(Error::DimensionMismatch(format!(
                "received {} values, blocklength is {}",
                y.len(),
                code.n()
            )));
        }
        let mut outcome = match (&code.trellises, &mut self.scl) {
            (Some(trellises), _) => ztcc_outcome(code, trellises, y, sigma, need)?,
            (None, Some(decoders)) => {
                let llrs = llr_from_sigma(y, sigma);
                polar_outcome(code, decoders, &llrs)?
            }
            (None, None) => unreachable!("every family has a decoder"),
        };
        apply_shared_rule(code, &mut outcome);
        finish(code, &mut outcome, y, sigma)?;
        Ok(outcome)
    }

    /// Polar receiver on channel LLRs.
    pub fn decode_llrs(&mut self, llrs: &[R]) -> Result<DecodeOutcome> {
        let code = self.code;
        let decoders = self.scl.as_mut().ok_or_else(|| {
            Error::InvalidParameter("LLR decoding is only defined for polar classes".into())
        })?;
        if llrs.len() != code.n() {
            return Err(Error::DimensionMismatch(format!(
                "received {} LLRs, blocklength is {}",
                llrs.len(),
                code.n()
            )));
        }
        let mut outcome = polar_outcome(code, decoders, llrs)?;
        apply_shared_rule(code, &mut outcome);
        outcome.hypothesis = decide(outcome.statistic, code.log_threshold);
        select_declared(&mut outcome);
        Ok(outcome)
    }
}

/// Shared codewords belong to class 1: a class-0 estimate that also lies in
/// the class-1 codebook rules class 0 out.
fn apply_shared_rule(code: &UmpCode, outcome: &mut DecodeOutcome) {
    if !code.shared_to_class1 {
        return;
    }
    if let Some(c0) = &outcome.candidates[0] {
        if code.classes[1].contains(&c0.codeword) {
            outcome.statistic = Some(f64::NEG_INFINITY);
        }
    }
}

fn ztcc_candidate<R: Real>(code: &UmpCode, trellises: &[Trellis; 2], class: usize, y: &[R], sigma: R) -> Result<(Candidate, R)> {
    let adjusted = code.classes[class].remove_offset(y);
    let out = trellises[class].viterbi(&adjusted, sigma)?;
    let codeword = &out.codeword ^ code.classes[class].offset();
    Ok((
        Candidate {
            codeword,
            message: out.message,
        },
        out.metric,
    ))
}

fn ztcc_outcome<R: Real>(
    code: &UmpCode,
    trellises: &[Trellis; 2],
    y: &[R],
    sigma: R,
    need: [bool; 2],
) -> Result<DecodeOutcome> {
    let mut candidates = [None, None];
    let statistic = match code.mode {
        TestMode::Lrt => {
            let l0 = trellises[0].forward_log_likelihood(&code.classes[0].remove_offset(y), sigma)?;
            let l1 = trellises[1].forward_log_likelihood(&code.classes[1].remove_offset(y), sigma)?;
            if need[0] || code.shared_to_class1 {
                candidates[0] = Some(ztcc_candidate(code, trellises, 0, y, sigma)?.0);
            }
            if need[1] {
                candidates[1] = Some(ztcc_candidate(code, trellises, 1, y, sigma)?.0);
            }
            (l0 - l1).to_f64_lossy()
        }
        TestMode::Alrt => {
            let (c0, m0) = ztcc_candidate(code, trellises, 0, y, sigma)?;
            let (c1, m1) = ztcc_candidate(code, trellises, 1, y, sigma)?;
            candidates = [Some(c0), Some(c1)];
            (m0 - m1).to_f64_lossy()
        }
    };
    Ok(DecodeOutcome {
        hypothesis: Hypothesis::Erasure,
        codeword: None,
        message: None,
        statistic: Some(statistic),
        candidates,
    })
}

fn polar_outcome<R: Real>(code: &UmpCode, decoders: &mut [SclDecoder<R>; 2], llrs: &[R]) -> Result<DecodeOutcome> {
    let mut candidates = [None, None];
    for class in 0..2 {
        let adjusted = code.classes[class].remove_offset(llrs);
        if let SclOutcome::Decoded { codeword, message } = decoders[class].decode(&adjusted)? {
            candidates[class] = Some(Candidate {
                codeword: &codeword ^ code.classes[class].offset(),
                message,
            });
        }
    }
    // ln p(y|x̂0) − ln p(y|x̂1) = (⟨L, s(x̂0)⟩ − ⟨L, s(x̂1)⟩) / 2
    let statistic = match (&candidates[0], &candidates[1]) {
        (None, None) => None,
        (Some(_), None) => Some(f64::INFINITY),
        (None, Some(_)) => Some(f64::NEG_INFINITY),
        (Some(a), Some(b)) => Some(
            ((correlation(llrs, &a.codeword) - correlation(llrs, &b.codeword)) * R::lit(0.5)).to_f64_lossy(),
        ),
    };
    Ok(DecodeOutcome {
        hypothesis: Hypothesis::Erasure,
        codeword: None,
        message: None,
        statistic,
        candidates,
    })
}

fn finish<R: Real>(code: &UmpCode, outcome: &mut DecodeOutcome, y: &[R], sigma: R) -> Result<()> {
    outcome.hypothesis = decide(outcome.statistic, code.log_threshold);
    if let (Some(class), Some(trellises)) = (outcome.hypothesis.class(), &code.trellises) {
        if outcome.candidates[class].is_none() {
            outcome.candidates[class] = Some(ztcc_candidate(code, trellises, class, y, sigma)?.0);
        }
    }
    select_declared(outcome);
    Ok(())
}

fn select_declared(outcome: &mut DecodeOutcome) {
    let chosen = outcome
        .hypothesis
        .class()
        .and_then(|c| outcome.candidates[c].clone());
    outcome.codeword = chosen.as_ref().map(|c| c.codeword.clone());
    outcome.message = chosen.map(|c| c.message);
}

/// Re-applies the class decision of a fully decoded outcome at a new threshold.
pub fn redecide(outcome: &DecodeOutcome, log_threshold: f64) -> DecodeOutcome {
    let mut out = outcome.clone();
    out.hypothesis = decide(out.statistic, log_threshold);
    select_declared(&mut out);
    out
}

/// ZTCC receiver; see [`UmpCode::decode`].
pub fn decode_ztcc<R: Real>(code: &UmpCode, y: &[R], sigma: R) -> Result<DecodeOutcome> {
    if code.family() != Family::Ztcc {
        return Err(Error::InvalidParameter("code is not convolutional".into()));
    }
    code.decode(y, sigma)
}

/// Polar receiver on channel LLRs; see [`UmpCode::decode`].
pub fn decode_polar<R: Real>(code: &UmpCode, llrs: &[R]) -> Result<DecodeOutcome> {
    code.decoder().decode_llrs(llrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{modulate_bpsk, transmit, ChannelParams, RngStream};
    use crate::polar::CrcSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_ztcc_pair(seed: u64) -> UmpCode {
        let z0 = ZtccSpec::new(vec![0o13, 0o15, 0o17], 3, 4, 20).unwrap();
        let z1 = ZtccSpec::new(vec![0o13, 0o17], 3, 8, 20).unwrap();
        let c0 = CosetCode::linear(BaseCode::Ztcc(z0)).unwrap();
        let c1 = CosetCode::linear(BaseCode::Ztcc(z1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v0, v1) = search_disjoint_offsets(&c0, &c1, &mut rng, 100).unwrap();
        UmpCode::new(c0.with_offset(v0).unwrap(), c1.with_offset(v1).unwrap(), 0.0, TestMode::Lrt).unwrap()
    }

    #[test]
    fn parsing() {
        assert_eq!("LRT".parse::<TestMode>().unwrap(), TestMode::Lrt);
        assert_eq!("polar".parse::<Family>().unwrap(), Family::Polar);
        assert!("x".parse::<TestMode>().is_err());
        assert_eq!(TestMode::Alrt.to_string(), "alrt");
    }

    #[test]
    fn zero_offsets_overlap() {
        let z = ZtccSpec::new(vec![0o13, 0o17], 3, 4, 14).unwrap();
        let c = CosetCode::linear(BaseCode::Ztcc(z)).unwrap();
        let err = UmpCode::new(c.clone(), c.clone(), 0.0, TestMode::Alrt).unwrap_err();
        assert!(matches!(err, Error::Overlap(_)));
        let code = UmpCode::with_overlap(c.clone(), c, 0.0, TestMode::Alrt).unwrap();
        assert_eq!(code.error_floor(), 1.0);
    }

    #[test]
    fn floor_formula() {
        assert_eq!(error_floor_prediction(0, 16), 0.0);
        assert_eq!(error_floor_prediction(16, 16), 1.0);
        assert_eq!(error_floor_prediction(1, 16), 1.0 / 16.0);
    }

    #[test]
    fn threshold_conventions_roundtrip() {
        let op = operational_log_threshold(0.3, 10, 14);
        assert!((op - (0.3 - 4.0 * std::f64::consts::LN_2)).abs() < 1e-15);
        assert!((average_log_threshold(op, 10, 14) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn encode_zero_message_gives_offset_and_membership() {
        let code = small_ztcc_pair(1);
        for class in 0..2 {
            let k = code.k(class);
            let zero = code.encode(class, &BitVector::zeros(k)).unwrap();
            assert_eq!(&zero, code.class(class).offset());
            let mut rng = ChaCha8Rng::seed_from_u64(class as u64);
            for _ in 0..20 {
                let x = code.encode(class, &BitVector::random(k, &mut rng)).unwrap();
                assert!(code.class(class).contains(&x));
                assert!(!code.class(1 - class).contains(&x));
                let linear = &x ^ code.class(class).offset();
                assert!(code.class(class).parity_check().mul_vec(&linear).is_zero());
            }
        }
        assert!(code.encode(2, &BitVector::zeros(4)).is_err());
        assert!(code.encode(0, &BitVector::zeros(5)).is_err());
    }

    #[test]
    fn noiseless_transmissions_decode_correctly() {
        let mut code = small_ztcc_pair(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [TestMode::Lrt, TestMode::Alrt] {
            code = code.with_mode(mode).unwrap();
            for class in 0..2 {
                let msg = BitVector::random(code.k(class), &mut rng);
                let x = code.encode(class, &msg).unwrap();
                let out = code.decode(&modulate_bpsk::<f64>(&x), 0.5).unwrap();
                assert_eq!(out.hypothesis.class(), Some(class));
                assert_eq!(out.message.as_ref(), Some(&msg));
                assert_eq!(out.codeword.as_ref(), Some(&x));
            }
        }
    }

    #[test]
    fn extreme_thresholds_force_the_decision() {
        let code = small_ztcc_pair(4);
        let params = ChannelParams::from_esn0_db(0.0f64).unwrap();
        for mode in [TestMode::Lrt, TestMode::Alrt] {
            for f in 0..20 {
                let x = code.encode(f as usize % 2, &BitVector::zeros(code.k(f as usize % 2))).unwrap();
                let y = transmit(&modulate_bpsk::<f64>(&x), &params, &RngStream::new(1, f));
                let hi = code.clone().with_mode(mode).unwrap().with_log_threshold(f64::INFINITY);
                let lo = code.clone().with_mode(mode).unwrap().with_log_threshold(f64::NEG_INFINITY);
                assert_eq!(hi.decode(&y, params.sigma()).unwrap().hypothesis, Hypothesis::H1);
                assert_eq!(lo.decode(&y, params.sigma()).unwrap().hypothesis, Hypothesis::H0);
            }
        }
    }

    #[test]
    fn redecide_matches_direct_decoding() {
        let code = small_ztcc_pair(5).with_mode(TestMode::Alrt).unwrap();
        let params = ChannelParams::from_esn0_db(1.0f64).unwrap();
        let mut dec = code.decoder::<f64>();
        for f in 0..30 {
            let x = code.encode(1, &BitVector::from_u64(f, 8)).unwrap();
            let y = transmit(&modulate_bpsk::<f64>(&x), &params, &RngStream::new(2, f));
            let full = dec.decode_full(&y, params.sigma()).unwrap();
            for t in [-3.0, -0.5, 0.0, 0.7, 4.0] {
                let direct = code.clone().with_log_threshold(t).decode(&y, params.sigma()).unwrap();
                let re = redecide(&full, t);
                assert_eq!(re.hypothesis, direct.hypothesis);
                assert_eq!(re.codeword, direct.codeword);
            }
        }
    }

    #[test]
    fn polar_pair_noiseless_and_erasure() {
        let crc = CrcSpec::new(0x61).unwrap();
        let p0 = PolarSpec::new(64, 10, crc, 4).unwrap();
        let p1 = PolarSpec::new(64, 20, crc, 4).unwrap();
        let c0 = CosetCode::linear(BaseCode::Polar(p0)).unwrap();
        let c1 = CosetCode::linear(BaseCode::Polar(p1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (v0, v1) = search_disjoint_offsets(&c0, &c1, &mut rng, 100).unwrap();
        let code = UmpCode::new(c0.with_offset(v0).unwrap(), c1.with_offset(v1).unwrap(), 0.0, TestMode::Alrt).unwrap();
        assert!(UmpCode::new(code.class(0).clone(), code.class(1).clone(), 0.0, TestMode::Lrt).is_err());
        let msg = BitVector::random(20, &mut rng);
        let x = code.encode(1, &msg).unwrap();
        let out = code.decode(&modulate_bpsk::<f64>(&x), 0.6).unwrap();
        assert_eq!(out.hypothesis, Hypothesis::H1);
        assert_eq!(out.message, Some(msg));

        let mut erased = 0;
        for _ in 0..50 {
            let llrs: Vec<f64> = (0..64).map(|_| if rng.gen() { 40.0 } else { -40.0 }).collect();
            let out = decode_polar(&code, &llrs).unwrap();
            if out.hypothesis == Hypothesis::Erasure {
                assert!(out.codeword.is_none() && out.statistic.is_none());
                erased += 1;
            }
        }
        assert!(erased > 30);
    }

    #[test]
    fn offset_search_fails_when_dimensions_force_overlap() {
        let z0 = ZtccSpec::new(vec![0o13, 0o17], 3, 4, 14).unwrap();
        // single tap on the current input, tail dropped: the identity code
        let z1 = ZtccSpec::new(vec![0o2], 1, 14, 14)
            .unwrap()
            .with_puncture_pattern(vec![14])
            .unwrap();
        let c0 = CosetCode::linear(BaseCode::Ztcc(z0)).unwrap();
        let c1 = CosetCode::linear(BaseCode::Ztcc(z1)).unwrap();
        assert_eq!(c1.parity_check().rows(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // the second codebook is the whole space, so every coset meets it
        let err = search_disjoint_offsets(&c0, &c1, &mut rng, 5).unwrap_err();
        assert!(matches!(err, Error::OffsetSearchFailed { tries: 5, .. }));
    }
}

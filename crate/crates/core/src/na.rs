//! Normal-approximation benchmark for two-or-more-class UMP codes on the
//! binary-input AWGN channel.
//!
//! The per-class message size is approximated by
//!
//! ```text
//! k_i ≈ n C − sqrt(n V) Q⁻¹(ε_i) − ½ log2 n + log2(1/λ_i),   Σ λ_i = 1
//! ```
//!
//! with `C`/`V` the mean/variance of the information density
//! `i(x; y) = 1 − log2(1 + exp(−2 x y / σ²))`, evaluated by Gauss–Hermite
//! quadrature. Everything here is `f64`: the quadrature tolerance (1e-9) and
//! the `Q⁻¹` round-trip (1e-10) are below `f32` resolution.

use std::sync::OnceLock;

use serde::Serialize;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

const QUAD_TOL: f64 = 1e-9;
const MIN_NODES: usize = 64;
const MAX_DOUBLINGS: usize = 7; // 64 .. 8192 nodes

/// Gauss–Hermite rule for the weight `exp(-x²)`.
struct HermiteRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl HermiteRule {
    /// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix (zero
    /// diagonal, off-diagonal `sqrt(j/2)`), weights are `sqrt(π)` times the
    /// squared first eigenvector components. Implicit QL only needs to carry
    /// the first row of the eigenvector matrix, so the cost is `O(n²)`.
    fn new(n: usize) -> Self {
        let mut d = vec![0.0f64; n];
        let mut e: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { ((i + 1) as f64 / 2.0).sqrt() } else { 0.0 })
            .collect();
        let mut z = vec![0.0f64; n];
        z[0] = 1.0;
        tridiagonal_ql(&mut d, &mut e, &mut z);
        let mut pairs: Vec<(f64, f64)> = d
            .into_iter()
            .zip(z)
            .map(|(x, v)| (x, std::f64::consts::PI.sqrt() * v * v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    fn cached(doubling: usize) -> &'static HermiteRule {
        static RULES: [OnceLock<HermiteRule>; MAX_DOUBLINGS] = [const { OnceLock::new() }; MAX_DOUBLINGS];
        RULES[doubling].get_or_init(|| HermiteRule::new(MIN_NODES << doubling))
    }

    /// `E[f(Z)]` for standard normal `Z`.
    fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| if w == 0.0 { 0.0 } else { w * f(std::f64::consts::SQRT_2 * x) })
            .sum();
        s / std::f64::consts::PI.sqrt()
    }
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix with
/// diagonal `d` and sub-diagonal `e` (`e[n-1]` unused). On return `d` holds
/// the eigenvalues and `z` the first row of the eigenvector matrix, given the
/// first row of the identity on input.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Information density of the biAWGN channel for `x = +1` and output `y`.
pub fn information_density(y: f64, variance: f64) -> f64 {
    1.0 - softplus(-2.0 * y / variance) / std::f64::consts::LN_2
}

fn check_snr(esn0: f64) -> Result<()> {
    if esn0 > 0.0 && esn0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "linear Es/N0 must be positive and finite, got {esn0}"
        )))
    }
}

/// `(C, V)` in bits and bits² per channel use at linear `Es/N0`.
///
/// The node count doubles from 64 until successive estimates of both moments
/// agree to 1e-9.
pub fn biawgn_moments(esn0: f64) -> Result<(f64, f64)> {
    check_snr(esn0)?;
    let variance = 1.0 / (2.0 * esn0);
    let sigma = variance.sqrt();
    let eval = |rule: &HermiteRule| {
        let m1 = rule.expect(|z| information_density(1.0 + sigma * z, variance));
        let m2 = rule.expect(|z| information_density(1.0 + sigma * z, variance).powi(2));
        (m1, (m2 - m1 * m1).max(0.0))
    };
    let mut prev = eval(HermiteRule::cached(0));
    for d in 1..MAX_DOUBLINGS {
        let next = eval(HermiteRule::cached(d));
        let done = (next.0 - prev.0).abs() < QUAD_TOL && (next.1 - prev.1).abs() < QUAD_TOL;
        prev = next;
        if done {
            return Ok(prev);
        }
    }
    log::debug!("Gauss-Hermite quadrature hit its node cap at Es/N0 = {esn0}");
    Ok(prev)
}

pub fn biawgn_capacity(esn0: f64) -> Result<f64> {
    biawgn_moments(esn0).map(|m| m.0)
}

pub fn biawgn_dispersion(esn0: f64) -> Result<f64> {
    biawgn_moments(esn0).map(|m| m.1)
}

/// Gaussian tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse Gaussian tail, refined with Newton steps on `Q(x) - p`.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Q^-1 needs a probability in (0, 1), got {p}"
        )));
    }
    let mut x = std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density == 0.0 {
            break;
        }
        let step = (q_function(x) - p) / density;
        x += step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Right-hand side of the normal approximation, unrounded, in bits.
pub fn na_message_size(n: usize, esn0: f64, eps: f64, lambda: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("blocklength must be positive".into()));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "class weight must be in (0, 1], got {lambda}"
        )));
    }
    let (c, v) = biawgn_moments(esn0)?;
    let nf = n as f64;
    Ok(nf * c - (nf * v).sqrt() * q_inv(eps)? - 0.5 * nf.log2() + (1.0 / lambda).log2())
}

/// One message class of a benchmark problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NaClass {
    /// Required message size in bits; real-valued on purpose.
    pub k: f64,
    /// Target error probability.
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NaProblem {
    pub n: usize,
    pub classes: Vec<NaClass>,
}

impl NaProblem {
    pub fn new(n: usize, classes: Vec<NaClass>) -> Result<Self> {
        let p = Self { n, classes };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidParameter("at least one class is required".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if !(c.k >= 1.0) {
                return Err(Error::InvalidParameter(format!("class {i}: k = {} < 1", c.k)));
            }
            if c.k >= self.n as f64 {
                return Err(Error::Infeasible(format!(
                    "class {i}: k = {} is not below the blocklength {}",
                    c.k, self.n
                )));
            }
            if !(c.eps > 0.0 && c.eps < 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "class {i}: target error probability {} outside (0, 0.5)",
                    c.eps
                )));
            }
        }
        Ok(())
    }
}

/// Benchmark operating point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NaSolution {
    pub esn0_db: f64,
    pub lambdas: Vec<f64>,
    /// Capacity and dispersion at `esn0_db`.
    pub capacity: f64,
    pub dispersion: f64,
    /// Approximate message sizes at the optimum, one per class.
    pub message_sizes: Vec<f64>,
}

/// Default dB search bracket for threshold inversions.
pub const DEFAULT_BRACKET_DB: (f64, f64) = (-40.0, 40.0);
const SNR_TOL_DB: f64 = 1e-9;

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Smallest SNR in the bracket at which the approximation reaches `k` bits,
/// clamped to the bracket ends.
fn required_snr_db(n: usize, k: f64, eps: f64, lambda: f64, bracket: (f64, f64)) -> Result<f64> {
    let ok = |db: f64| -> Result<bool> { Ok(na_message_size(n, db_to_linear(db), eps, lambda)? >= k) };
    let (mut lo, mut hi) = bracket;
    if ok(lo)? {
        return Ok(lo);
    }
    if !ok(hi)? {
        return Ok(hi);
    }
    while hi - lo > SNR_TOL_DB {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Minimum-SNR benchmark with the default bracket.
pub fn na_min_snr(problem: &NaProblem) -> Result<NaSolution> {
    na_min_snr_with_bracket(problem, DEFAULT_BRACKET_DB)
}

/// Minimises the SNR at which every class meets its `(k_i, ε_i)` pair, over
/// the weights `λ`.
///
/// For two classes the weight of class 0 is bisected (on a logit scale) until
/// the two per-class required SNRs, each itself found by bisection, coincide.
/// Class 0's requirement rises with `λ_0` while class 1's falls, so the
/// crossing is the min-max point. Three or more classes use
/// [`na_min_snr_sum_rule`].
pub fn na_min_snr_with_bracket(problem: &NaProblem, bracket: (f64, f64)) -> Result<NaSolution> {
    problem.validate()?;
    let n = problem.n;
    let (esn0_db, lambdas) = match problem.classes.as_slice() {
        [c] => (required_snr_db(n, c.k, c.eps, 1.0, bracket)?, vec![1.0]),
        [c0, c1] => {
            let lambda0 = |t: f64| 1.0 / (1.0 + (-t).exp());
            let gap = |t: f64| -> Result<(f64, f64)> {
                let s0 = required_snr_db(n, c0.k, c0.eps, lambda0(t), bracket)?;
                let s1 = required_snr_db(n, c1.k, c1.eps, lambda0(-t), bracket)?;
                Ok((s0 - s1, s0.max(s1)))
            };
            let (mut lo, mut hi) = (-40.0f64, 40.0f64);
            let t = if gap(lo)?.0 >= 0.0 {
                lo
            } else if gap(hi)?.0 <= 0.0 {
                hi
            } else {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid)?.0 < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-10 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            };
            (gap(t)?.1, vec![lambda0(t), lambda0(-t)])
        }
        _ => return na_min_snr_sum_rule(problem, bracket),
    };
    solution(problem, esn0_db, lambdas)
}

/// General-`m` solution. Writing `f_i(s)` for the approximation without the
/// `log2(1/λ_i)` term, class `i` is satisfied iff `λ_i ≤ 2^(f_i(s) − k_i)`;
/// weights summing to one exist iff `Σ_i 2^(f_i(s) − k_i) ≥ 1`. The smallest
/// such SNR is found by bisection, and the weights are the normalised terms.
pub fn na_min_snr_sum_rule(problem: &NaProblem, bracket: (f64, f64)) -> Result<NaSolution> {
    problem.validate()?;
    let n = problem.n;
    let terms = |db: f64| -> Result<Vec<f64>> {
        problem
            .classes
            .iter()
            .map(|c| Ok((na_message_size(n, db_to_linear(db), c.eps, 1.0)? - c.k).exp2()))
            .collect()
    };
    let feasible = |db: f64| -> Result<bool> { Ok(terms(db)?.iter().sum::<f64>() >= 1.0) };
    let (mut lo, mut hi) = bracket;
    if !feasible(hi)? {
        return Err(Error::Bracket {
            lo_db: lo,
            hi_db: hi,
            reason: "benchmark not met at the upper end".into(),
        });
    }
    if !feasible(lo)? {
        while hi - lo > SNR_TOL_DB {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        hi = lo;
    }
    let t = terms(hi)?;
    let total: f64 = t.iter().sum();
    solution(problem, hi, t.iter().map(|x| x / total).collect())
}

fn solution(problem: &NaProblem, esn0_db: f64, lambdas: Vec<f64>) -> Result<NaSolution> {
    let esn0 = db_to_linear(esn0_db);
    let (capacity, dispersion) = biawgn_moments(esn0)?;
    let message_sizes = problem
        .classes
        .iter()
        .zip(&lambdas)
        .map(|(c, &l)| na_message_size(problem.n, esn0, c.eps, l))
        .collect::<Result<_>>()?;
    Ok(NaSolution {
        esn0_db,
        lambdas,
        capacity,
        dispersion,
        message_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        for d in 0..4 {
            let rule = HermiteRule::cached(d);
            assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-12);
            assert!(rule.expect(|z| z).abs() < 1e-12);
            assert!((rule.expect(|z| z * z) - 1.0).abs() < 1e-11);
            assert!((rule.expect(|z| z.powi(4)) - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn large_rules_do_not_overflow() {
        let rule = HermiteRule::cached(MAX_DOUBLINGS - 1);
        assert!(rule.weights.iter().all(|w| w.is_finite() && *w >= 0.0));
        assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-10);
        assert!((rule.expect(|z| z * z) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn capacity_limits() {
        let hi = biawgn_capacity(db_to_linear(20.0)).unwrap();
        assert!(hi > 0.999_999 && hi < 1.0 + 1e-12);
        let lo = biawgn_capacity(db_to_linear(-30.0)).unwrap();
        assert!(lo > 0.0 && lo < 0.002);
        assert!(biawgn_capacity(0.0).is_err());
        assert!(biawgn_capacity(-1.0).is_err());
    }

    #[test]
    fn capacity_is_increasing() {
        let mut prev = 0.0;
        for db in (-12..=12).map(f64::from) {
            let c = biawgn_capacity(db_to_linear(db)).unwrap();
            assert!(c > prev, "C({db} dB) = {c}");
            prev = c;
        }
    }

    #[test]
    fn dispersion_limits() {
        let v = biawgn_dispersion(db_to_linear(20.0)).unwrap();
        assert!((0.0..1e-6).contains(&v));
        for db in [-10.0, -3.0, 0.0, 3.0, 8.0] {
            assert!(biawgn_dispersion(db_to_linear(db)).unwrap() > 0.0);
        }
    }

    #[test]
    fn q_inv_examples() {
        assert_eq!(q_inv(0.5).unwrap(), 0.0);
        assert!((q_inv(q_function(1.0)).unwrap() - 1.0).abs() < 1e-10);
        // 40-digit reference values
        assert!((q_inv(1e-3).unwrap() - 3.090_232_306_167_813_5).abs() < 1e-10);
        assert!((q_inv(1e-5).unwrap() - 4.264_890_793_922_825).abs() < 1e-10);
        assert!(q_inv(0.0).is_err());
        assert!(q_inv(1.0).is_err());
        assert!(q_inv(f64::NAN).is_err());
    }

    #[test]
    fn q_inv_roundtrip_relative() {
        for p in [1e-12, 1e-9, 1e-6, 1e-4, 1e-2, 0.1, 0.3, 0.7, 0.99] {
            let q = q_function(q_inv(p).unwrap());
            assert!(((q - p) / p).abs() < 1e-10, "p = {p}, Q(Q^-1(p)) = {q}");
        }
    }

    #[test]
    fn lambda_half_adds_one_bit() {
        let esn0 = db_to_linear(-1.0);
        let a = na_message_size(128, esn0, 1e-3, 1.0).unwrap();
        let b = na_message_size(128, esn0, 1e-3, 0.5).unwrap();
        assert!((b - a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn message_size_increases_with_snr() {
        let mut prev = f64::NEG_INFINITY;
        for tenth in -60..=60 {
            let k = na_message_size(128, db_to_linear(tenth as f64 / 10.0), 1e-3, 0.5).unwrap();
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn problem_validation() {
        let c = |k, eps| NaClass { k, eps };
        assert!(matches!(NaProblem::new(128, vec![c(128.0, 1e-3)]), Err(Error::Infeasible(_))));
        assert!(NaProblem::new(128, vec![c(0.5, 1e-3)]).is_err());
        assert!(NaProblem::new(128, vec![c(10.0, 0.6)]).is_err());
        assert!(NaProblem::new(128, vec![]).is_err());
    }

    #[test]
    fn identical_classes_split_evenly() {
        let c = NaClass { k: 40.0, eps: 1e-3 };
        let sol = na_min_snr(&NaProblem::new(128, vec![c, c]).unwrap()).unwrap();
        assert!((sol.lambdas[0] - 0.5).abs() < 1e-6, "{:?}", sol.lambdas);
    }

    #[test]
    fn single_class_has_unit_weight() {
        let p = NaProblem::new(128, vec![NaClass { k: 64.0, eps: 1e-3 }]).unwrap();
        let sol = na_min_snr(&p).unwrap();
        assert_eq!(sol.lambdas, vec![1.0]);
        assert!((sol.message_sizes[0] - 64.0).abs() < 1e-6);
    }

    #[test]
    fn two_class_routes_agree() {
        let p = NaProblem::new(
            128,
            vec![NaClass { k: 32.0, eps: 1e-5 }, NaClass { k: 64.0, eps: 1e-3 }],
        )
        .unwrap();
        let a = na_min_snr(&p).unwrap();
        let b = na_min_snr_sum_rule(&p, DEFAULT_BRACKET_DB).unwrap();
        assert!((a.esn0_db - b.esn0_db).abs() < 1e-6, "{} vs {}", a.esn0_db, b.esn0_db);
        assert!((a.lambdas[0] - b.lambdas[0]).abs() < 1e-5);
        // both constraints bind at the optimum
        assert!((a.message_sizes[0] - 32.0).abs() < 1e-5);
        assert!((a.message_sizes[1] - 64.0).abs() < 1e-5);
    }

    #[test]
    fn three_classes_meet_all_requirements() {
        let p = NaProblem::new(
            256,
            vec![
                NaClass { k: 20.0, eps: 1e-5 },
                NaClass { k: 60.0, eps: 1e-3 },
                NaClass { k: 90.0, eps: 1e-2 },
            ],
        )
        .unwrap();
        let s = na_min_snr(&p).unwrap();
        assert!((s.lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (c, k) in p.classes.iter().zip(&s.message_sizes) {
            assert!(*k >= c.k - 1e-6);
        }
    }
}

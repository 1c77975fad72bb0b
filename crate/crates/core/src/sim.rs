//! Monte Carlo evaluation of two-class UMP codes.
//!
//! Frames of each class are simulated separately so that `ε_0` and `ε_1` are
//! class-conditional error rates. Frame `f` of class `c` draws its message
//! and noise from its own stream, keyed only by the master seed, `c` and `f`;
//! the same frame index therefore sees the same message and the same
//! standard-normal noise at every SNR, threshold and test mode, and results
//! do not depend on the number of worker threads.
//!
//! Every frame is decoded once; its log statistic and whether its own-class
//! estimate is correct suffice to score it at any threshold, so threshold
//! sweeps reuse the same frames.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_noise, modulate_bpsk, ChannelParams, RngStream};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::na::na_message_size;
use crate::polar::{Construction, CrcSpec, PolarSpec};
use crate::ump::{
    average_log_threshold, search_disjoint_offsets, BaseCode, CosetCode, Family, TestMode, UmpCode,
};
use crate::ztcc::{format_octal_generators, parse_octal_generators, ZtccSpec};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

const CLASS_TAG: [u64; 2] = [0xc1a5_5000, 0xc1a5_5001];
const OFFSET_TAG: u64 = 0x0ff5_e700;

/// Default generator pairs `(G_0, G_1)` in octal, by memory.
pub fn default_generators(nu: usize) -> Option<(&'static str, &'static str)> {
    match nu {
        6 => Some(("117,127,155,171", "133,171")),
        8 => Some(("473,513,671,756", "515,677")),
        10 => Some(("2565,2747,3311,3273", "3645,2671")),
        _ => None,
    }
}

/// Grid of operational log thresholds: a coarse pass over `[lo, hi]`, then
/// a fine pass of step `refine_step` within one coarse step of the optimum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub refine_step: f64,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self {
            lo: -20.0,
            hi: 20.0,
            step: 0.25,
            refine_step: 0.0625,
        }
    }
}

impl ThresholdGrid {
    fn validate(&self) -> Result<()> {
        if !(self.lo <= self.hi && self.step > 0.0 && self.refine_step > 0.0) {
            return Err(Error::InvalidParameter(format!("bad threshold grid {self:?}")));
        }
        Ok(())
    }

    fn coarse(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.lo + i as f64 * self.step).collect()
    }

    fn fine_around(&self, center: f64) -> Vec<f64> {
        let half = (self.step / self.refine_step + 1e-9).floor() as i64;
        (-half..=half)
            .map(|i| center + i as f64 * self.refine_step)
            .filter(|t| *t >= self.lo - 1e-12 && *t <= self.hi + 1e-12)
            .collect()
    }

    /// Same bounds, both steps halved.
    pub fn refined(&self) -> Self {
        Self {
            step: self.step / 2.0,
            refine_step: self.refine_step / 2.0,
            ..*self
        }
    }
}

/// Everything needed to reproduce an experiment; serialized verbatim into
/// every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n: usize,
    /// `(R_0, R_1)`; used when `k0`/`k1` are absent, `k_i = round(R_i n)`.
    pub rates: (f64, f64),
    pub k0: Option<usize>,
    pub k1: Option<usize>,
    pub eps0: f64,
    pub eps1: f64,
    pub mode: TestMode,
    pub list_size: usize,
    pub nu: usize,
    /// Octal generators, e.g. `"133,171"`; defaults depend on `nu`.
    pub generators0: Option<String>,
    pub generators1: Option<String>,
    /// Hexadecimal CRC polynomial with leading term; `0xE21` by default.
    pub crc: Option<String>,
    pub construction: Construction,
    pub esn0_db: Option<f64>,
    pub bracket_db: (f64, f64),
    pub snr_step_db: f64,
    /// Operational log threshold for fixed-threshold runs.
    pub log_threshold: Option<f64>,
    pub threshold_grid: ThresholdGrid,
    pub min_errors: u64,
    pub max_frames: u64,
    pub batch_frames: u64,
    /// Stop sampling once the outcome at the current optimum is certain at
    /// 95% confidence either way.
    pub early_stop: bool,
    /// Zero offsets; the codebooks then share at least the zero word.
    pub overlap: bool,
    pub offset_tries: usize,
    pub threads: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: Family::Ztcc,
            n: 128,
            rates: (0.25, 0.5),
            k0: None,
            k1: None,
            eps0: 1e-5,
            eps1: 1e-3,
            mode: TestMode::Alrt,
            list_size: 32,
            nu: 6,
            generators0: None,
            generators1: None,
            crc: None,
            construction: Construction::Nr5g,
            esn0_db: None,
            bracket_db: (-2.0, 6.0),
            snr_step_db: 0.05,
            log_threshold: None,
            threshold_grid: ThresholdGrid::default(),
            min_errors: 100,
            max_frames: 1_000_000,
            batch_frames: 1000,
            early_stop: true,
            overlap: false,
            offset_tries: 1000,
            threads: 0,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// `(k_0, k_1)` after resolving rates.
    pub fn message_lengths(&self) -> (usize, usize) {
        let k = |explicit: Option<usize>, rate: f64| {
            explicit.unwrap_or_else(|| (rate * self.n as f64).round() as usize)
        };
        (k(self.k0, self.rates.0), k(self.k1, self.rates.1))
    }

    pub fn crc_spec(&self) -> Result<CrcSpec> {
        self.crc.as_deref().unwrap_or("0xE21").parse()
    }

    /// Resolved generator lists `(G_0, G_1)`.
    pub fn generator_lists(&self) -> Result<(Vec<u32>, Vec<u32>)> {
        let defaults = default_generators(self.nu);
        let pick = |explicit: &Option<String>, default: Option<&str>| -> Result<Vec<u32>> {
            match (explicit, default) {
                (Some(g), _) => parse_octal_generators(g),
                (None, Some(g)) => parse_octal_generators(g),
                (None, None) => Err(Error::InvalidParameter(format!(
                    "no default generators for memory {}; pass them explicitly",
                    self.nu
                ))),
            }
        };
        Ok((
            pick(&self.generators0, defaults.map(|d| d.0))?,
            pick(&self.generators1, defaults.map(|d| d.1))?,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        let (k0, k1) = self.message_lengths();
        if k0 == 0 || k1 == 0 || k0 > self.n || k1 > self.n {
            return Err(Error::InvalidParameter(format!(
                "message lengths ({k0}, {k1}) must lie in 1..={}",
                self.n
            )));
        }
        for (name, eps) in [("eps0", self.eps0), ("eps1", self.eps1)] {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {eps} must lie in (0, 1)")));
            }
        }
        if self.family == Family::Polar && self.mode == TestMode::Lrt {
            return Err(Error::InvalidParameter(
                "the exact likelihood-ratio test needs a trellis; use alrt for polar codes".into(),
            ));
        }
        if self.max_frames == 0 || self.batch_frames == 0 || self.min_errors == 0 {
            return Err(Error::InvalidParameter(
                "min_errors, max_frames and batch_frames must be positive".into(),
            ));
        }
        if !(self.snr_step_db > 0.0) || !(self.bracket_db.0 < self.bracket_db.1) {
            return Err(Error::InvalidParameter(format!(
                "bad SNR bracket {:?} or step {}",
                self.bracket_db, self.snr_step_db
            )));
        }
        self.threshold_grid.validate()
    }

    /// Seed of the offset search, derived from the master seed.
    pub fn offset_seed(&self) -> u64 {
        RngStream::derive_seed(self.seed, OFFSET_TAG)
    }
}

/// Builds the class codes and draws certified-disjoint offsets (or zero
/// offsets when `overlap` is set).
pub fn build_code(config: &ExperimentConfig) -> Result<UmpCode> {
    config.validate()?;
    let (k0, k1) = config.message_lengths();
    let bases = match config.family {
        Family::Ztcc => {
            let (g0, g1) = config.generator_lists()?;
            [
                BaseCode::Ztcc(ZtccSpec::new(g0, config.nu, k0, config.n)?),
                BaseCode::Ztcc(ZtccSpec::new(g1, config.nu, k1, config.n)?),
            ]
        }
        Family::Polar => {
            let crc = config.crc_spec()?;
            let spec = |k| PolarSpec::with_construction(config.n, k, crc, config.list_size, config.construction);
            [BaseCode::Polar(spec(k0)?), BaseCode::Polar(spec(k1)?)]
        }
    };
    let [b0, b1] = bases;
    let c0 = CosetCode::linear(b0)?;
    let c1 = CosetCode::linear(b1)?;
    let log_t = config.log_threshold.unwrap_or(0.0);
    if config.overlap {
        return UmpCode::with_overlap(c0, c1, log_t, config.mode);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.offset_seed());
    let (v0, v1) = search_disjoint_offsets(&c0, &c1, &mut rng, config.offset_tries)?;
    UmpCode::new(c0.with_offset(v0)?, c1.with_offset(v1)?, log_t, config.mode)
}

/// Outcome of one simulated frame, independent of the threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameRecord {
    /// `Λ`, or `None` when both classes were erased.
    pub statistic: Option<f64>,
    /// The estimate for the transmitted class equals the sent codeword.
    pub own_correct: bool,
}

/// Error tallies of one class at one threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub frames: u64,
    pub wrong_class: u64,
    pub wrong_codeword: u64,
    pub erasures: u64,
}

impl ErrorCounts {
    pub fn errors(&self) -> u64 {
        self.wrong_class + self.wrong_codeword + self.erasures
    }
}

/// Wilson score interval for `errors` out of `frames` at normal quantile `z`.
pub fn wilson_interval(errors: u64, frames: u64, z: f64) -> (f64, f64) {
    if frames == 0 {
        return (0.0, 1.0);
    }
    let n = frames as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == frames { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub frames: u64,
    pub errors: u64,
    pub wrong_class: u64,
    pub wrong_codeword: u64,
    pub erasures: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl From<ErrorCounts> for ErrorEstimate {
    fn from(c: ErrorCounts) -> Self {
        let errors = c.errors();
        let (ci_low, ci_high) = wilson_interval(errors, c.frames, Z95);
        Self {
            frames: c.frames,
            errors,
            wrong_class: c.wrong_class,
            wrong_codeword: c.wrong_codeword,
            erasures: c.erasures,
            estimate: if c.frames == 0 { 0.0 } else { errors as f64 / c.frames as f64 },
            ci_low,
            ci_high,
        }
    }
}

/// Threshold-indexed view of the frames of one class.
#[derive(Clone, Debug, Default)]
pub struct ClassTally {
    class: usize,
    frames: u64,
    erasures: u64,
    /// Statistics of non-erased frames, sorted.
    all: Vec<f64>,
    /// Statistics of frames whose own-class estimate is wrong, sorted.
    wrong: Vec<f64>,
}

impl ClassTally {
    pub fn new(class: usize, records: &[FrameRecord]) -> Self {
        let mut tally = Self {
            class,
            ..Self::default()
        };
        tally.extend(records);
        tally
    }

    pub fn extend(&mut self, records: &[FrameRecord]) {
        for r in records {
            self.frames += 1;
            match r.statistic {
                None => self.erasures += 1,
                Some(s) => {
                    self.all.push(s);
                    if !r.own_correct {
                        self.wrong.push(s);
                    }
                }
            }
        }
        self.all.sort_by(f64::total_cmp);
        self.wrong.sort_by(f64::total_cmp);
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    /// Counts with class 0 declared iff `Λ ≥ log_t`.
    pub fn counts(&self, log_t: f64) -> ErrorCounts {
        let below = |v: &[f64]| v.partition_point(|&s| s < log_t) as u64;
        let (wrong_class, wrong_codeword) = if self.class == 0 {
            (below(&self.all), self.wrong.len() as u64 - below(&self.wrong))
        } else {
            (self.all.len() as u64 - below(&self.all), below(&self.wrong))
        };
        ErrorCounts {
            frames: self.frames,
            wrong_class,
            wrong_codeword,
            erasures: self.erasures,
        }
    }
}

/// Threshold choice with its per-class estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub esn0_db: f64,
    /// Operational log threshold (`Λ ≥ log_t` declares class 0).
    pub log_t: f64,
    /// The same threshold on the ratio of average likelihoods.
    pub log_t_avg: f64,
    pub class0: ErrorEstimate,
    pub class1: ErrorEstimate,
    /// `max(ε_0/ε_0*, ε_1/ε_1*)` at `log_t`.
    pub objective: f64,
    /// Both 95% upper bounds are within their targets.
    pub satisfied: bool,
    /// Some class has fewer than `min_errors` errors at `log_t`.
    pub low_confidence: bool,
    pub grid: ThresholdGrid,
    pub seed: u64,
}

fn scores(counts: &[ErrorCounts; 2], targets: (f64, f64)) -> (f64, f64) {
    let est = |c: &ErrorCounts| c.errors() as f64 / c.frames.max(1) as f64;
    let up = |c: &ErrorCounts| wilson_interval(c.errors(), c.frames, Z95).1;
    (
        (est(&counts[0]) / targets.0).max(est(&counts[1]) / targets.1),
        (up(&counts[0]) / targets.0).max(up(&counts[1]) / targets.1),
    )
}

/// Minimizer of the point objective over `grid`, ties broken by the
/// upper-bound objective and then by the middle of the tied set.
fn best_on(tallies: &[ClassTally; 2], grid: &[f64], targets: (f64, f64)) -> (f64, (f64, f64)) {
    let scored: Vec<(f64, (f64, f64))> = grid
        .iter()
        .map(|&t| (t, scores(&[tallies[0].counts(t), tallies[1].counts(t)], targets)))
        .collect();
    let best = scored
        .iter()
        .map(|s| s.1)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .expect("grid is non-empty");
    let tied: Vec<&(f64, (f64, f64))> = scored.iter().filter(|s| s.1 == best).collect();
    *tied[tied.len() / 2]
}

/// Optimal threshold for the given frames on a two-pass grid.
pub fn choose_threshold(tallies: &[ClassTally; 2], grid: &ThresholdGrid, targets: (f64, f64)) -> f64 {
    let (coarse, _) = best_on(tallies, &grid.coarse(), targets);
    best_on(tallies, &grid.fine_around(coarse), targets).0
}

/// Per-point Monte Carlo driver for one code.
pub struct Experiment {
    config: ExperimentConfig,
    code: UmpCode,
    pool: Option<rayon::ThreadPool>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let code = build_code(&config)?;
        let pool = if config.threads > 0 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { config, code, pool })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn code(&self) -> &UmpCode {
        &self.code
    }

    fn targets(&self) -> (f64, f64) {
        (self.config.eps0, self.config.eps1)
    }

    /// Simulates frames `range` of `class` at `esn0_db`.
    pub fn sample(&self, class: usize, esn0_db: f64, range: Range<u64>) -> Result<Vec<FrameRecord>> {
        let params = ChannelParams::from_esn0_db(esn0_db)?;
        let seed = RngStream::derive_seed(self.config.seed, CLASS_TAG[class]);
        let code = &self.code;
        let k = code.k(class);
        let run = || {
            range
                .into_par_iter()
                .map_init(
                    || code.decoder::<f64>(),
                    |dec, f| {
                        let mut rng = RngStream::new(seed, f).rng();
                        let msg = BitVector::random(k, &mut rng);
                        let x = code.encode(class, &msg)?;
                        let y = add_noise(&modulate_bpsk::<f64>(&x), &params, &mut rng);
                        let out = dec.decode_for_class(&y, params.sigma(), class)?;
                        Ok(FrameRecord {
                            statistic: out.statistic,
                            own_correct: out.candidates[class].as_ref().is_some_and(|c| c.codeword == x),
                        })
                    },
                )
                .collect::<Result<Vec<_>>>()
        };
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }

    /// Adaptive sampling: each class gets batches of growing size until it
    /// has `min_errors` errors at the current threshold or reaches
    /// `max_frames`. With `early_stop`, sampling also ends as soon as the
    /// 95% intervals settle feasibility at the current threshold, or rule
    /// out every threshold of the grid.
    fn run_point(&self, esn0_db: f64, fixed: Option<f64>) -> Result<ThresholdResult> {
        let cfg = &self.config;
        let targets = self.targets();
        let mut tallies = [ClassTally::new(0, &[]), ClassTally::new(1, &[])];
        let mut next = [0u64; 2];
        let mut batch = [cfg.batch_frames; 2];
        let mut active = [true, true];
        let grid_points = cfg.threshold_grid.coarse();
        loop {
            for class in 0..2 {
                if !active[class] || next[class] >= cfg.max_frames {
                    continue;
                }
                let end = (next[class] + batch[class]).min(cfg.max_frames);
                let records = self.sample(class, esn0_db, next[class]..end)?;
                tallies[class].extend(&records);
                next[class] = end;
                batch[class] = batch[class].saturating_mul(2);
            }
            let log_t = fixed.unwrap_or_else(|| choose_threshold(&tallies, &cfg.threshold_grid, targets));
            let counts = [tallies[0].counts(log_t), tallies[1].counts(log_t)];
            let mut done = true;
            for class in 0..2 {
                active[class] = counts[class].errors() < cfg.min_errors && next[class] < cfg.max_frames;
                done &= !active[class];
            }
            if cfg.early_stop && !done {
                let bounds: Vec<(f64, f64)> = counts
                    .iter()
                    .map(|c| wilson_interval(c.errors(), c.frames, Z95))
                    .collect();
                let feasible = bounds[0].1 <= targets.0 && bounds[1].1 <= targets.1;
                let infeasible_everywhere = match fixed {
                    Some(_) => bounds[0].0 > targets.0 || bounds[1].0 > targets.1,
                    None => grid_points.iter().all(|&t| {
                        let c0 = tallies[0].counts(t);
                        let c1 = tallies[1].counts(t);
                        wilson_interval(c0.errors(), c0.frames, Z95).0 > targets.0
                            || wilson_interval(c1.errors(), c1.frames, Z95).0 > targets.1
                    }),
                };
                done = feasible || infeasible_everywhere;
            }
            if done {
                let [c0, c1] = counts;
                let (objective, _) = scores(&counts, targets);
                let class0 = ErrorEstimate::from(c0);
                let class1 = ErrorEstimate::from(c1);
                let (k0, k1) = (self.code.k(0), self.code.k(1));
                return Ok(ThresholdResult {
                    esn0_db,
                    log_t,
                    log_t_avg: average_log_threshold(log_t, k0, k1),
                    satisfied: class0.ci_high <= targets.0 && class1.ci_high <= targets.1,
                    low_confidence: class0.errors < cfg.min_errors || class1.errors < cfg.min_errors,
                    class0,
                    class1,
                    objective,
                    grid: cfg.threshold_grid,
                    seed: cfg.seed,
                });
            }
        }
    }

    /// Per-class error rates at a fixed operational log threshold.
    pub fn estimate_rates(&self, esn0_db: f64, log_t: f64) -> Result<ThresholdResult> {
        self.run_point(esn0_db, Some(log_t))
    }

    /// Threshold minimizing `max(ε_0/ε_0*, ε_1/ε_1*)` with its estimates.
    pub fn optimize_threshold(&self, esn0_db: f64) -> Result<ThresholdResult> {
        self.run_point(esn0_db, None)
    }

    /// Fixed-size run without stopping rules: `frames` frames per class and
    /// both class tallies, for sweeps over thresholds.
    pub fn tallies(&self, esn0_db: f64, frames: [u64; 2]) -> Result<[ClassTally; 2]> {
        Ok([
            ClassTally::new(0, &self.sample(0, esn0_db, 0..frames[0])?),
            ClassTally::new(1, &self.sample(1, esn0_db, 0..frames[1])?),
        ])
    }
}

pub fn estimate_rates(config: &ExperimentConfig, esn0_db: f64, log_t: f64) -> Result<ThresholdResult> {
    Experiment::new(config.clone())?.estimate_rates(esn0_db, log_t)
}

pub fn optimize_threshold(config: &ExperimentConfig, esn0_db: f64) -> Result<ThresholdResult> {
    Experiment::new(config.clone())?.optimize_threshold(esn0_db)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSnrResult {
    pub esn0_db: f64,
    pub log_t: f64,
    pub log_t_avg: f64,
    pub at_threshold: ThresholdResult,
    /// Every SNR point evaluated, in evaluation order.
    pub points: Vec<ThresholdResult>,
    pub offset_seed: u64,
}

/// Smallest SNR on the `snr_step_db` grid of `bracket_db` at which both
/// targets are met after threshold optimization, by bisection.
pub fn find_min_snr(config: &ExperimentConfig) -> Result<MinSnrResult> {
    let exp = Experiment::new(config.clone())?;
    let (lo_db, hi_db) = config.bracket_db;
    let steps = ((hi_db - lo_db) / config.snr_step_db).round() as i64;
    let snr = |i: i64| lo_db + i as f64 * config.snr_step_db;
    let mut points = Vec::new();
    let mut eval = |i: i64| -> Result<ThresholdResult> {
        let r = exp.optimize_threshold(snr(i))?;
        log::info!(
            "Es/N0 {:.2} dB: log T {:.4}, eps0 {:.3e}, eps1 {:.3e}, satisfied {}",
            r.esn0_db,
            r.log_t,
            r.class0.estimate,
            r.class1.estimate,
            r.satisfied
        );
        points.push(r.clone());
        Ok(r)
    };
    let mut hi_point = eval(steps)?;
    if !hi_point.satisfied {
        return Err(Error::Bracket {
            lo_db,
            hi_db,
            reason: "targets are not met at the upper end".into(),
        });
    }
    if eval(0)?.satisfied {
        return Err(Error::Bracket {
            lo_db,
            hi_db,
            reason: "targets are already met at the lower end".into(),
        });
    }
    let (mut lo, mut hi) = (0i64, steps);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let p = eval(mid)?;
        if p.satisfied {
            hi = mid;
            hi_point = p;
        } else {
            lo = mid;
        }
    }
    Ok(MinSnrResult {
        esn0_db: hi_point.esn0_db,
        log_t: hi_point.log_t,
        log_t_avg: hi_point.log_t_avg,
        at_threshold: hi_point,
        points,
        offset_seed: config.offset_seed(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub k0: usize,
    pub k1: usize,
    pub result: ThresholdResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxRateResult {
    pub esn0_db: f64,
    pub k0: usize,
    pub k1: usize,
    pub r0: f64,
    pub r1: f64,
    /// Normal-approximation starting point.
    pub start: (usize, usize),
    pub points: Vec<RatePoint>,
    pub offset_seed: u64,
}

/// Largest `(k_0, k_1)` meeting both targets at `esn0_db`.
///
/// Starts from the normal-approximation message sizes with equal class
/// weights, steps both sizes down until the pair is feasible, then raises
/// `k_0` and `k_1` alternately, one bit at a time, while feasibility holds.
pub fn find_max_rates(config: &ExperimentConfig, esn0_db: f64) -> Result<MaxRateResult> {
    config.validate()?;
    let n = config.n;
    let esn0 = 10f64.powf(esn0_db / 10.0);
    let redundancy = match config.family {
        Family::Polar => config.crc_spec()?.len(),
        Family::Ztcc => 0,
    };
    let max_k = n - redundancy - 1;
    let na_k = |eps: f64| -> Result<usize> {
        let k = na_message_size(n, esn0, eps, 0.5)?.floor();
        Ok((k.max(1.0) as usize).min(max_k))
    };
    let start = (na_k(config.eps0)?, na_k(config.eps1)?);
    let mut points = Vec::new();
    let mut feasible = |k0: usize, k1: usize| -> Result<bool> {
        let cfg = ExperimentConfig {
            k0: Some(k0),
            k1: Some(k1),
            ..config.clone()
        };
        let r = Experiment::new(cfg)?.optimize_threshold(esn0_db)?;
        log::info!(
            "k = ({k0}, {k1}): log T {:.4}, eps0 {:.3e}, eps1 {:.3e}, satisfied {}",
            r.log_t,
            r.class0.estimate,
            r.class1.estimate,
            r.satisfied
        );
        let ok = r.satisfied;
        points.push(RatePoint { k0, k1, result: r });
        Ok(ok)
    };
    let (mut k0, mut k1) = start;
    while !feasible(k0, k1)? {
        if k0 == 1 && k1 == 1 {
            return Err(Error::Infeasible(format!(
                "targets ({}, {}) are not met even with one-bit messages at {esn0_db} dB",
                config.eps0, config.eps1
            )));
        }
        k0 = k0.saturating_sub(1).max(1);
        k1 = k1.saturating_sub(1).max(1);
    }
    loop {
        let mut improved = false;
        while k0 < max_k && feasible(k0 + 1, k1)? {
            k0 += 1;
            improved = true;
        }
        while k1 < max_k && feasible(k0, k1 + 1)? {
            k1 += 1;
            improved = true;
        }
        if !improved {
            break;
        }
    }
    Ok(MaxRateResult {
        esn0_db,
        k0,
        k1,
        r0: k0 as f64 / n as f64,
        r1: k1 as f64 / n as f64,
        start,
        points,
        offset_seed: config.offset_seed(),
    })
}

const CSV_HEADER: [&str; 27] = [
    "family", "n", "k0", "k1", "mode", "esn0_db", "log_t", "log_t_avg",
    "frames0", "errors0", "wrong_class0", "wrong_codeword0", "erasures0", "eps0", "ci_low0", "ci_high0",
    "frames1", "errors1", "wrong_class1", "wrong_codeword1", "erasures1", "eps1", "ci_low1", "ci_high1",
    "satisfied", "low_confidence", "seed",
];

/// One CSV row per `(k_0, k_1, SNR, threshold)` point, preceded by a
/// `# config:` line holding the resolved configuration as JSON.
pub fn write_csv<P: AsRef<Path>>(
    path: P,
    config: &ExperimentConfig,
    points: &[(usize, usize, &ThresholdResult)],
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# config: {}", config.to_json())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)?;
    for (k0, k1, p) in points {
        let est = |e: &ErrorEstimate| {
            vec![
                e.frames.to_string(),
                e.errors.to_string(),
                e.wrong_class.to_string(),
                e.wrong_codeword.to_string(),
                e.erasures.to_string(),
                format!("{:e}", e.estimate),
                format!("{:e}", e.ci_low),
                format!("{:e}", e.ci_high),
            ]
        };
        let mut row = vec![
            config.family.to_string(),
            config.n.to_string(),
            k0.to_string(),
            k1.to_string(),
            config.mode.to_string(),
            format!("{}", p.esn0_db),
            format!("{}", p.log_t),
            format!("{}", p.log_t_avg),
        ];
        row.extend(est(&p.class0));
        row.extend(est(&p.class1));
        row.extend([p.satisfied.to_string(), p.low_confidence.to_string(), p.seed.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    config: &'a ExperimentConfig,
    generators: Option<(String, String)>,
    result: &'a T,
}

/// JSON document `{config, generators, result}`.
pub fn write_json<P: AsRef<Path>, T: Serialize>(path: P, config: &ExperimentConfig, result: &T) -> Result<()> {
    let generators = match config.family {
        Family::Ztcc => config
            .generator_lists()
            .ok()
            .map(|(a, b)| (format_octal_generators(&a), format_octal_generators(&b))),
        Family::Polar => None,
    };
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        file,
        &Summary {
            config,
            generators,
            result,
        },
    )?;
    Ok(())
}

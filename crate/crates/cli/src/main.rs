//! `ump`: command-line driver for the coset UMP toolkit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ump_core::gf2::{coset_intersection, linear_intersection_dim, parity_check_from_generator, syndrome};
use ump_core::na::{na_min_snr, NaClass, NaProblem};
use ump_core::polar::Construction;
use ump_core::sim::{
    build_code, find_max_rates, find_min_snr, write_csv, write_json, Experiment, ExperimentConfig,
    ThresholdResult,
};
use ump_core::{BitMatrix, BitVector, Family, TestMode};

#[derive(Parser)]
#[command(name = "ump", version, about = "Unequal message protection with coset codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normal-approximation benchmark.
    Na(NaArgs),
    /// Intersection of two coset codes.
    Intersect(IntersectArgs),
    /// Error rates at fixed SNR points.
    Simulate(ExperimentArgs),
    /// Minimum Es/N0 meeting both targets.
    MinSnr(ExperimentArgs),
    /// Largest message sizes meeting both targets at one Es/N0.
    MaxRate(ExperimentArgs),
}

#[derive(Args)]
struct NaArgs {
    #[arg(long)]
    n: usize,
    /// Message class as `k:eps`, repeatable.
    #[arg(long = "class", value_parser = parse_class, required = true)]
    classes: Vec<NaClass>,
    /// Print the solution as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct IntersectArgs {
    /// Generator matrix of code 0, one `0`/`1` row per line.
    #[arg(long, requires = "g1")]
    g0: Option<PathBuf>,
    #[arg(long, requires = "g0")]
    g1: Option<PathBuf>,
    /// Offset of code 0 as a bit string; zero when absent.
    #[arg(long)]
    v0: Option<String>,
    #[arg(long)]
    v1: Option<String>,
    /// Without `--g0/--g1`, the codes and searched offsets of this experiment
    /// are used.
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args, Default)]
struct ExperimentArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    /// Rates as `R0,R1`.
    #[arg(long, value_parser = parse_pair)]
    rates: Option<(f64, f64)>,
    #[arg(long)]
    k0: Option<usize>,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    mode: Option<TestMode>,
    #[arg(long)]
    list_size: Option<usize>,
    #[arg(long)]
    nu: Option<usize>,
    /// Octal generators of both classes, `G0/G1`, e.g. `133,171/135,147`.
    #[arg(long)]
    generators: Option<String>,
    /// CRC polynomial in hex with its leading term, e.g. `0x61`.
    #[arg(long)]
    crc: Option<String>,
    /// `nr5g` or `bhattacharyya:<design Es/N0 dB>`.
    #[arg(long, value_parser = parse_construction)]
    construction: Option<Construction>,
    /// Es/N0 in dB; comma-separated list for `simulate`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    esn0_db: Vec<f64>,
    /// Search bracket `LO,HI` in dB.
    #[arg(long, value_parser = parse_pair, allow_negative_numbers = true)]
    bracket: Option<(f64, f64)>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// Fixed operational log threshold; optimized when absent.
    #[arg(long, allow_negative_numbers = true)]
    log_threshold: Option<f64>,
    #[arg(long)]
    min_errors: Option<u64>,
    #[arg(long)]
    max_frames: Option<u64>,
    #[arg(long)]
    batch_frames: Option<u64>,
    #[arg(long)]
    no_early_stop: bool,
    /// Use zero offsets so the codebooks overlap.
    #[arg(long)]
    overlap: bool,
    #[arg(long)]
    offset_tries: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output; a JSON summary is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_class(s: &str) -> Result<NaClass, String> {
    let (k, eps) = s.split_once(':').ok_or_else(|| format!("expected k:eps, got {s:?}"))?;
    let k: f64 = k.trim().parse().map_err(|e| format!("bad k in {s:?}: {e}"))?;
    let eps: f64 = eps.trim().parse().map_err(|e| format!("bad eps in {s:?}: {e}"))?;
    Ok(NaClass { k, eps })
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected A,B, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad number {x:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_construction(s: &str) -> Result<Construction, String> {
    match s.split_once(':') {
        None if s.eq_ignore_ascii_case("nr5g") => Ok(Construction::Nr5g),
        Some((kind, db)) if kind.eq_ignore_ascii_case("bhattacharyya") => Ok(Construction::Bhattacharyya {
            design_esn0_db: db.parse().map_err(|e| format!("bad design SNR {db:?}: {e}"))?,
        }),
        _ => Err(format!("unknown construction {s:?}")),
    }
}

impl ExperimentArgs {
    fn resolve(&self, default_crc: Option<&str>) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { c.$field = v; })*
            };
        }
        set!(family => family, n => n, rates => rates, eps0 => eps0, eps1 => eps1, mode => mode,
            list_size => list_size, nu => nu, construction => construction, bracket => bracket_db,
            snr_step => snr_step_db, min_errors => min_errors, max_frames => max_frames,
            batch_frames => batch_frames, offset_tries => offset_tries, threads => threads, seed => seed);
        if self.k0.is_some() {
            c.k0 = self.k0;
        }
        if self.k1.is_some() {
            c.k1 = self.k1;
        }
        if let Some(g) = &self.generators {
            let (g0, g1) = g
                .split_once('/')
                .ok_or_else(|| anyhow!("--generators expects G0/G1, got {g:?}"))?;
            c.generators0 = Some(g0.to_string());
            c.generators1 = Some(g1.to_string());
        }
        if self.crc.is_some() {
            c.crc = self.crc.clone();
        } else if c.crc.is_none() && c.family == Family::Polar {
            c.crc = default_crc.map(str::to_string);
        }
        if let [db] = self.esn0_db.as_slice() {
            c.esn0_db = Some(*db);
        }
        if self.log_threshold.is_some() {
            c.log_threshold = self.log_threshold;
        }
        if self.no_early_stop {
            c.early_stop = false;
        }
        if self.overlap {
            c.overlap = true;
        }
        c.validate()?;
        log::info!("resolved config: {}", c.to_json());
        Ok(c)
    }

    fn snr_points(&self, c: &ExperimentConfig) -> Result<Vec<f64>> {
        match (self.esn0_db.as_slice(), c.esn0_db) {
            ([], Some(db)) => Ok(vec![db]),
            ([], None) => bail!("an Es/N0 is required (--esn0-db or esn0_db in the config)"),
            (list, _) => Ok(list.to_vec()),
        }
    }

    fn out_path(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn print_point(k0: usize, k1: usize, r: &ThresholdResult) {
    println!(
        "k = ({k0}, {k1})  Es/N0 = {:.3} dB  log T = {:.4} (avg {:.4})  eps0 = {:.3e} [{:.2e}, {:.2e}]  eps1 = {:.3e} [{:.2e}, {:.2e}]  satisfied = {}{}",
        r.esn0_db,
        r.log_t,
        r.log_t_avg,
        r.class0.estimate,
        r.class0.ci_low,
        r.class0.ci_high,
        r.class1.estimate,
        r.class1.ci_low,
        r.class1.ci_high,
        r.satisfied,
        if r.low_confidence { "  (low confidence)" } else { "" }
    );
}

fn cmd_na(args: &NaArgs) -> Result<()> {
    let problem = NaProblem::new(args.n, args.classes.clone())?;
    let sol = na_min_snr(&problem)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&sol)?);
        return Ok(());
    }
    println!("n = {}", args.n);
    println!("Es/N0* = {:.4} dB", sol.esn0_db);
    println!("C = {:.6} bits/use, V = {:.6} bits^2/use", sol.capacity, sol.dispersion);
    for (i, ((c, l), k)) in args.classes.iter().zip(&sol.lambdas).zip(&sol.message_sizes).enumerate() {
        println!("class {i}: k = {}, eps = {:e}, lambda = {l:.6e}, k_NA = {k:.3}", c.k, c.eps);
    }
    Ok(())
}

fn read_matrix(path: &Path) -> Result<BitMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    BitMatrix::parse_rows(&rows).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_intersect(args: &IntersectArgs) -> Result<()> {
    let (h0, h1, s0, s1) = match (&args.g0, &args.g1) {
        (Some(p0), Some(p1)) => {
            let g0 = read_matrix(p0)?;
            let g1 = read_matrix(p1)?;
            if g0.cols() != g1.cols() {
                bail!("blocklengths differ: {} vs {}", g0.cols(), g1.cols());
            }
            let n = g0.cols();
            let offset = |v: &Option<String>| -> Result<BitVector> {
                let v = match v {
                    Some(s) => s.parse::<BitVector>()?,
                    None => BitVector::zeros(n),
                };
                if v.len() != n {
                    bail!("offset has length {}, codes have length {n}", v.len());
                }
                Ok(v)
            };
            let (v0, v1) = (offset(&args.v0)?, offset(&args.v1)?);
            let h0 = parity_check_from_generator(&g0)?;
            let h1 = parity_check_from_generator(&g1)?;
            let (s0, s1) = (syndrome(&h0, &v0), syndrome(&h1, &v1));
            (h0, h1, s0, s1)
        }
        _ => {
            let config = args.experiment.resolve(Some("0xE21"))?;
            let code = build_code(&config)?;
            for i in 0..2 {
                println!("v{i} = {}", code.class(i).offset());
            }
            let c = |i: usize| code.class(i);
            (
                c(0).parity_check().clone(),
                c(1).parity_check().clone(),
                c(0).syndrome().clone(),
                c(1).syndrome().clone(),
            )
        }
    };
    let cert = coset_intersection(&h0, &s0, &h1, &s1)?;
    println!("linear intersection dim {}", linear_intersection_dim(&h0, &h1)?);
    println!("{cert}");
    Ok(())
}

fn cmd_simulate(args: &ExperimentArgs) -> Result<()> {
    let config = args.resolve(Some("0xE21"))?;
    let exp = Experiment::new(config.clone())?;
    let (k0, k1) = config.message_lengths();
    println!("intersection: {}", exp.code().certificate());
    let mut results = Vec::new();
    for db in args.snr_points(&config)? {
        let r = match config.log_threshold {
            Some(t) => exp.estimate_rates(db, t)?,
            None => exp.optimize_threshold(db)?,
        };
        print_point(k0, k1, &r);
        results.push(r);
    }
    if config.overlap {
        println!("predicted class-0 floor |A|/M0 = {:.4e}", exp.code().error_floor());
    }
    let out = args.out_path("simulate.csv");
    let rows: Vec<_> = results.iter().map(|r| (k0, k1, r)).collect();
    write_csv(&out, &config, &rows)?;
    write_json(json_path(&out), &config, &results)?;
    Ok(())
}

fn cmd_min_snr(args: &ExperimentArgs) -> Result<()> {
    let config = args.resolve(Some("0xE21"))?;
    let (k0, k1) = config.message_lengths();
    let r = find_min_snr(&config)?;
    println!("minimum Es/N0 = {:.3} dB, log T = {:.4} (avg {:.4})", r.esn0_db, r.log_t, r.log_t_avg);
    print_point(k0, k1, &r.at_threshold);
    let out = args.out_path("min-snr.csv");
    let rows: Vec<_> = r.points.iter().map(|p| (k0, k1, p)).collect();
    write_csv(&out, &config, &rows)?;
    write_json(json_path(&out), &config, &r)?;
    Ok(())
}

fn cmd_max_rate(args: &ExperimentArgs) -> Result<()> {
    let config = args.resolve(Some("0x61"))?;
    let [db] = args.snr_points(&config)?[..] else {
        bail!("max-rate takes a single Es/N0");
    };
    let r = find_max_rates(&config, db)?;
    println!(
        "Es/N0 = {db} dB: k = ({}, {}), R = ({:.4}, {:.4}), start ({}, {})",
        r.k0, r.k1, r.r0, r.r1, r.start.0, r.start.1
    );
    let out = args.out_path("max-rate.csv");
    let rows: Vec<_> = r.points.iter().map(|p| (p.k0, p.k1, &p.result)).collect();
    write_csv(&out, &config, &rows)?;
    write_json(json_path(&out), &config, &r)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let run = match &cli.command {
        Command::Na(a) => cmd_na(a),
        Command::Intersect(a) => cmd_intersect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::MinSnr(a) => cmd_min_snr(a),
        Command::MaxRate(a) => cmd_max_rate(a),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

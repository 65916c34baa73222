//! `dcs`: reproducible experiments on random dense countable sets.
//!
//! Exit status: 0 when the run meets its expectation (including runs whose
//! expected outcome is a rejection), 1 when it does not, 2 on usage or
//! input errors.

mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::{One, Zero};
use serde::Serialize;

use dcs::generators::Generator;
use dcs::grid_measure::{BinSet, FatCantor, UnitGrid};
use dcs::rational::{self, Rational};
use dcs::selector::{interleave_report, interleaved_enumeration, uniform_selector, Ensemble};
use dcs::stats::{
    distinguish_counterexample, fragment_independence_test, ks_uniform, shift_hit_curve, stationarity_test, Cuts,
    FragmentObservable, Region, StationarityObservable, TestReport,
};
use dcs::strassen::{parse_caps_csv, solve, MarginalCaps, SupportMask};
use dcs::Error;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "dcs", version, about = "Experiments on random dense countable subsets of (0,1)")]
struct Cli {
    /// Root seed; required by every stochastic subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replica generation (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Significance level.
    #[arg(long, global = true)]
    level: Option<f64>,
    /// JSON file with default values for any of the numeric options.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the marginal and cover problems for a mask, or sweep all masks.
    Duality(DualityArgs),
    /// Write truncated enumerations as CSV.
    Simulate(SimulateArgs),
    /// Compare the count in C of the sample against the counterexample.
    Distinguish(DistinguishArgs),
    /// Compare an observable of X with the same observable of T_s(X).
    Stationarity(StationarityArgs),
    /// Test independence of fragments across a partition.
    Independence(IndependenceArgs),
    /// Count shifted dyadic points landing in a set.
    Shifthit(ShifthitArgs),
    /// Build a uniform selector on an ensemble.
    Selector(SelectorArgs),
    /// Run the interleaved enumeration and check containment.
    Enumerate(EnumerateArgs),
    /// Build a fat Cantor set.
    Cantor(CantorArgs),
}

#[derive(Args, Debug)]
struct DualityArgs {
    /// Mask file: "n m" then n lines of m characters 0/1.
    mask: Option<PathBuf>,
    /// Enumerate every mask on an n × m grid (n·m ≤ 16).
    #[arg(long, num_args = 2, value_names = ["N", "M"], conflicts_with = "mask")]
    sweep: Option<Vec<usize>>,
    /// Row caps as "index,p/q" lines; uniform when omitted.
    #[arg(long)]
    row_caps: Option<PathBuf>,
    /// Column caps as "index,p/q" lines; uniform when omitted.
    #[arg(long)]
    col_caps: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Target gap measure of the fat Cantor complement, as p/q.
    #[arg(long)]
    gap: Option<String>,
    #[arg(long)]
    cantor_depth: Option<u32>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// sample, minima or counterexample.
    generator: String,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args, Debug)]
struct DistinguishArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Expect {
    Pass,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StationarityKind {
    /// Count in the left half (0, 1/2).
    CountInHalf,
    /// Count in the fat Cantor set C.
    #[value(name = "count-in-C", alias = "count-in-c")]
    CountInC,
    /// Counts in each of four equal fragments.
    Fragments,
}

#[derive(Args, Debug)]
struct StationarityArgs {
    #[arg(long = "gen", default_value = "sample")]
    generator: String,
    #[arg(long, value_enum, default_value = "count-in-half")]
    observable: StationarityKind,
    /// Predicted outcome; defaults to reject for the counterexample, pass otherwise.
    #[arg(long, value_enum)]
    expect: Option<Expect>,
    /// Leave the second arm unshifted (a control that must pass).
    #[arg(long)]
    no_shift: bool,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FragmentKind {
    FirstPoint,
    DeepestMinimum,
    CappedCount,
}

#[derive(Args, Debug)]
struct IndependenceArgs {
    #[arg(long = "gen", default_value = "sample")]
    generator: String,
    /// Interior cut points, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    cuts: Vec<f64>,
    /// Defaults to deepest-minimum for the walk and first-point otherwise.
    #[arg(long, value_enum)]
    observable: Option<FragmentKind>,
    /// Classes per fragment (bins, or cap + 1 for capped counts).
    #[arg(long, default_value_t = 4)]
    bins: usize,
    /// Predicted outcome; defaults to reject for capped counts, pass otherwise.
    #[arg(long, value_enum)]
    expect: Option<Expect>,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args, Debug)]
struct ShifthitArgs {
    /// BinSet file ("n" then bin indices); the left half of 8 bins when omitted.
    #[arg(long, conflicts_with = "cantor")]
    set: Option<PathBuf>,
    /// Use the fat Cantor set built from --gap and --cantor-depth.
    #[arg(long)]
    cantor: bool,
    #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
    depths: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    shifts: usize,
    #[arg(long)]
    gap: Option<String>,
    #[arg(long)]
    cantor_depth: Option<u32>,
    /// Emit CSV instead of JSON.
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct SelectorArgs {
    #[arg(long = "gen", default_value = "sample")]
    generator: String,
    /// Read the ensemble from an enumeration CSV instead of generating it.
    #[arg(long, conflicts_with = "generator")]
    input: Option<PathBuf>,
    #[arg(long)]
    grid: Option<usize>,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    replicas: Option<usize>,
    /// Write the selector table CSV here.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[arg(long = "gen", default_value = "sample")]
    generator: String,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args, Debug)]
struct CantorArgs {
    #[arg(long)]
    gap: Option<String>,
    #[arg(long)]
    depth: Option<u32>,
    /// Print removed intervals as text instead of JSON.
    #[arg(long)]
    describe: bool,
}

/// Errors that end the run with status 2.
#[derive(Debug, thiserror::Error)]
enum UsageError {
    #[error("sweep of {n} x {m} masks is too large (n*m must be at most 16)")]
    SweepTooLarge { n: usize, m: usize },
    #[error("{0}")]
    Missing(String),
}

/// Outcome of a subcommand: the text to emit and whether expectations held.
struct Outcome {
    output: String,
    met: bool,
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn parse_rational(text: &str) -> anyhow::Result<Rational> {
    rational::parse_pq(text).ok_or_else(|| UsageError::Missing(format!("not a rational number: {text}")).into())
}

struct Env<'a> {
    cfg: &'a RunConfig,
    level: f64,
    seed: Option<u64>,
}

impl Env<'_> {
    fn seed(&self) -> anyhow::Result<u64> {
        self.seed.ok_or_else(|| UsageError::Missing("this subcommand needs --seed".into()).into())
    }

    fn cantor(&self, gap: &Option<String>, depth: Option<u32>) -> anyhow::Result<FatCantor> {
        let gap = match gap.as_deref().or(self.cfg.gap.as_deref()) {
            Some(text) => parse_rational(text)?,
            None => rational::ratio(1, 2),
        };
        Ok(FatCantor::build(&gap, depth.or(self.cfg.cantor_depth).unwrap_or(16))?)
    }

    fn generator(&self, name: &str, args: &GenArgs) -> anyhow::Result<Generator> {
        let depth = args.depth.or(self.cfg.depth).unwrap_or(100);
        match name {
            "sample" => Ok(Generator::Sample { depth }),
            "minima" => Ok(Generator::Minima { steps: args.steps.or(self.cfg.steps).unwrap_or(10_000) }),
            "counterexample" => Ok(Generator::Counterexample { depth, cantor: self.cantor(&args.gap, args.cantor_depth)? }),
            other => Err(Error::UnknownGenerator(other.to_string()).into()),
        }
    }

    fn replicas(&self, flag: Option<usize>, default: usize) -> usize {
        flag.or(self.cfg.replicas).unwrap_or(default)
    }
}

fn expectation_report(report: &TestReport, expected: Expect) -> Outcome {
    #[derive(Serialize)]
    struct Wrapped<'a> {
        report: &'a TestReport,
        expected: &'a str,
        met: bool,
    }
    let met = report.pass == (expected == Expect::Pass);
    let expected = match expected {
        Expect::Pass => "pass",
        Expect::Reject => "reject",
    };
    Outcome { output: json(&Wrapped { report, expected, met }), met }
}

fn cmd_duality(args: &DualityArgs) -> anyhow::Result<Outcome> {
    if let Some(dims) = &args.sweep {
        let (n, m) = (dims[0], dims[1]);
        if n == 0 || m == 0 || n * m > 16 {
            return Err(UsageError::SweepTooLarge { n, m }.into());
        }
        let caps = MarginalCaps::uniform(n, m);
        let (mut nonzero, mut invalid) = (0usize, 0usize);
        for bits in 0..1u64 << (n * m) {
            let mask = SupportMask::from_bits(n, m, bits)?;
            let s = solve(&mask, &caps);
            nonzero += usize::from(!s.gap().is_zero());
            let valid = s.coupling.is_feasible(&mask, &caps)
                && s.coupling.total() == s.alpha
                && s.cover.covers(&mask)
                && s.cover.cost_under(&caps) == s.beta;
            invalid += usize::from(!valid);
        }
        #[derive(Serialize)]
        struct Sweep {
            rows: usize,
            cols: usize,
            masks: u64,
            nonzero_gaps: usize,
            invalid_witnesses: usize,
        }
        let report = Sweep { rows: n, cols: m, masks: 1 << (n * m), nonzero_gaps: nonzero, invalid_witnesses: invalid };
        return Ok(Outcome { output: json(&report), met: nonzero == 0 && invalid == 0 });
    }
    let path = args.mask.as_ref().ok_or_else(|| UsageError::Missing("give a mask file or --sweep N M".into()))?;
    let mask = SupportMask::from_text(&io::read(path)?)?;
    let caps_from = |file: &Option<PathBuf>, len: usize| -> anyhow::Result<Vec<Rational>> {
        match file {
            Some(p) => Ok(parse_caps_csv(&io::read(p)?)?),
            None => Ok(vec![rational::ratio(1, len as i64); len]),
        }
    };
    let caps = MarginalCaps::new(caps_from(&args.row_caps, mask.rows())?, caps_from(&args.col_caps, mask.cols())?)?;
    let s = solve(&mask, &caps);
    #[derive(Serialize)]
    struct Report<'a> {
        rows: usize,
        cols: usize,
        alpha: String,
        beta: String,
        gap: String,
        coupling: &'a dcs::strassen::Coupling,
        cover: &'a dcs::strassen::Cover,
    }
    let report = Report {
        rows: mask.rows(),
        cols: mask.cols(),
        alpha: rational::to_pq(&s.alpha),
        beta: rational::to_pq(&s.beta),
        gap: rational::to_pq(&s.gap()),
        coupling: &s.coupling,
        cover: &s.cover,
    };
    Ok(Outcome { output: json(&report), met: s.gap().is_zero() })
}

fn cmd_simulate(ctx: &Env, args: &SimulateArgs) -> anyhow::Result<Outcome> {
    let gen = ctx.generator(&args.generator, &args.gen)?;
    let seed = ctx.seed()?;
    let replicas = ctx.replicas(args.replicas, 1);
    let ensemble = gen.ensemble(seed, replicas)?;
    eprintln!(
        "{}",
        serde_json::json!({ "generator": gen.name(), "seed": seed, "replicas": replicas,
            "depth": args.gen.depth.or(ctx.cfg.depth), "steps": args.gen.steps.or(ctx.cfg.steps) })
    );
    Ok(Outcome { output: io::ensemble_to_csv(&ensemble), met: true })
}

fn cmd_distinguish(ctx: &Env, args: &DistinguishArgs) -> anyhow::Result<Outcome> {
    let cantor = ctx.cantor(&args.gen.gap, args.gen.cantor_depth)?;
    let depth = args.gen.depth.or(ctx.cfg.depth).unwrap_or(200);
    let report = distinguish_counterexample(&cantor, depth, ctx.replicas(args.replicas, 500), ctx.seed()?, ctx.level)?;
    Ok(Outcome { output: json(&report), met: report.distinguished() })
}

fn cmd_stationarity(ctx: &Env, args: &StationarityArgs) -> anyhow::Result<Outcome> {
    let gen = ctx.generator(&args.generator, &args.gen)?;
    let observable = match args.observable {
        StationarityKind::CountInHalf => StationarityObservable::CountIn(Region::Bins(BinSet::new(UnitGrid::new(2)?, [0])?)),
        StationarityKind::CountInC => {
            StationarityObservable::CountIn(Region::Cantor(ctx.cantor(&args.gen.gap, args.gen.cantor_depth)?))
        }
        StationarityKind::Fragments => StationarityObservable::FragmentCounts(Cuts::even(4)?),
    };
    let expected = args.expect.unwrap_or(match gen {
        Generator::Counterexample { .. } if !args.no_shift => Expect::Reject,
        _ => Expect::Pass,
    });
    let report = stationarity_test(&gen, &observable, ctx.replicas(args.replicas, 500), ctx.seed()?, ctx.level, !args.no_shift)?;
    Ok(expectation_report(&report, expected))
}

fn cmd_independence(ctx: &Env, args: &IndependenceArgs) -> anyhow::Result<Outcome> {
    let gen = ctx.generator(&args.generator, &args.gen)?;
    let kind = args.observable.unwrap_or(match gen {
        Generator::Minima { .. } => FragmentKind::DeepestMinimum,
        _ => FragmentKind::FirstPoint,
    });
    let observable = match kind {
        FragmentKind::FirstPoint => FragmentObservable::FirstPoint { bins: args.bins },
        FragmentKind::DeepestMinimum => FragmentObservable::DeepestMinimum { bins: args.bins },
        FragmentKind::CappedCount => FragmentObservable::CappedCount { cap: args.bins.saturating_sub(1) },
    };
    let expected = args.expect.unwrap_or(if kind == FragmentKind::CappedCount { Expect::Reject } else { Expect::Pass });
    let cuts = Cuts::from_interior(&args.cuts)?;
    let report =
        fragment_independence_test(&gen, &cuts, observable, ctx.replicas(args.replicas, 2000), ctx.seed()?, ctx.level)?;
    Ok(expectation_report(&report, expected))
}

fn cmd_shifthit(ctx: &Env, args: &ShifthitArgs) -> anyhow::Result<Outcome> {
    let region = if args.cantor {
        Region::Cantor(ctx.cantor(&args.gap, args.cantor_depth)?)
    } else if let Some(path) = &args.set {
        Region::Bins(BinSet::from_text(&io::read(path)?)?)
    } else {
        Region::Bins(BinSet::new(UnitGrid::new(8)?, 0..4)?)
    };
    let curve = shift_hit_curve(&region, &args.depths, args.shifts, ctx.seed()?)?;
    let met = curve.means_within(0.1) && curve.median_nondecreasing();
    let output = if args.csv { curve.to_csv() } else { json(&curve) };
    Ok(Outcome { output, met })
}

fn obstruction_message(err: &Error, bins: usize) -> Option<String> {
    let Error::InsufficientDensity { cell, cover } = err else { return None };
    let thin: Vec<usize> = (0..bins).filter(|j| !cover.cols.contains(j)).collect();
    Some(format!(
        "insufficient density in conditioning cell {cell:?}\nobstruction cover: rows {:?}, bins {:?}, cost {}\nbins left uncovered: {thin:?}",
        cover.rows,
        cover.cols,
        rational::to_pq(&cover.cost)
    ))
}

fn cmd_selector(ctx: &Env, args: &SelectorArgs) -> anyhow::Result<Outcome> {
    let grid = UnitGrid::new(args.grid.or(ctx.cfg.grid).unwrap_or(8))?;
    let (ensemble, seed) = match &args.input {
        Some(path) => {
            let replicas = io::parse_ensemble_csv(&io::read(path)?)?;
            let seed = ctx.seed.unwrap_or(0);
            (Ensemble::new(replicas, grid, seed)?, seed)
        }
        None => {
            let gen = ctx.generator(&args.generator, &args.gen)?;
            let seed = ctx.seed()?;
            (Ensemble::generate(&gen, seed, ctx.replicas(args.replicas, 5000), grid)?, seed)
        }
    };
    let table = match uniform_selector(&ensemble, 0) {
        Ok(t) => t,
        Err(e) => {
            if let Some(msg) = obstruction_message(&e, grid.bins()) {
                eprintln!("{msg}");
            }
            return Err(e.into());
        }
    };
    if let Some(path) = &args.table {
        io::write(path, &table.to_csv())?;
    }
    let ks = ks_uniform(&table.values, ctx.level)?.with_run(ensemble.len(), Some(seed));
    let sound = table.is_sound(&ensemble);
    #[derive(Serialize)]
    struct Report<'a> {
        uniformity: &'a TestReport,
        bin_counts: Vec<usize>,
        sound: bool,
    }
    let report = Report { uniformity: &ks, bin_counts: table.bin_counts(grid), sound };
    Ok(Outcome { output: json(&report), met: ks.pass && sound })
}

fn cmd_enumerate(ctx: &Env, args: &EnumerateArgs) -> anyhow::Result<Outcome> {
    let grid = UnitGrid::new(args.grid.or(ctx.cfg.grid).unwrap_or(8))?;
    let rounds = args.rounds.or(ctx.cfg.rounds).unwrap_or(10);
    // Each round uses at most two points per replica; leave room so every bin stays occupied.
    let gen_args = GenArgs {
        depth: args.gen.depth.or(ctx.cfg.depth).or(Some(2 * rounds + 64)),
        steps: args.gen.steps,
        gap: args.gen.gap.clone(),
        cantor_depth: args.gen.cantor_depth,
    };
    let gen = ctx.generator(&args.generator, &gen_args)?;
    let ensemble = Ensemble::generate(&gen, ctx.seed()?, ctx.replicas(args.replicas, 1000), grid)?;
    let tables = match interleaved_enumeration(&ensemble, rounds, grid) {
        Ok(t) => t,
        Err(e) => {
            if let Some(msg) = obstruction_message(&e, grid.bins()) {
                eprintln!("{msg}");
            }
            return Err(e.into());
        }
    };
    let report = interleave_report(&ensemble, &tables, grid, ctx.level)?;
    Ok(Outcome { output: report.to_json() + "\n", met: report.containment_failures() == 0 })
}

fn cmd_cantor(ctx: &Env, args: &CantorArgs) -> anyhow::Result<Outcome> {
    let cantor = ctx.cantor(&args.gap, args.depth.or(ctx.cfg.cantor_depth).or(Some(4)))?;
    let output = if args.describe { cantor.describe() } else { cantor.to_json() + "\n" };
    let met = cantor.density_witness() && cantor.measure() < Rational::one();
    Ok(Outcome { output, met })
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() || err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Parse { .. }
            | Error::UnknownGenerator(_)
            | Error::BadParameter(_)
            | Error::OutOfDomain(_)
            | Error::TooFewSamples { .. }
            | Error::SparseTable { .. },
        ) => 2,
        Some(_) => 1,
        None => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let level = cli.level.or(cfg.level).unwrap_or(dcs::stats::DEFAULT_LEVEL);
    if !(level > 0.0 && level < 1.0) {
        return Err(UsageError::Missing(format!("level {level} not in (0,1)")).into());
    }
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("configuring worker threads")?;
    }
    let ctx = Env { cfg: &cfg, level, seed: cli.seed.or(cfg.seed) };
    let outcome = match &cli.command {
        Command::Duality(a) => cmd_duality(a)?,
        Command::Simulate(a) => cmd_simulate(&ctx, a)?,
        Command::Distinguish(a) => cmd_distinguish(&ctx, a)?,
        Command::Stationarity(a) => cmd_stationarity(&ctx, a)?,
        Command::Independence(a) => cmd_independence(&ctx, a)?,
        Command::Shifthit(a) => cmd_shifthit(&ctx, a)?,
        Command::Selector(a) => cmd_selector(&ctx, a)?,
        Command::Enumerate(a) => cmd_enumerate(&ctx, a)?,
        Command::Cantor(a) => cmd_cantor(&ctx, a)?,
    };
    match cli.out.as_ref().or(cfg.out.as_ref()) {
        Some(path) => io::write(path, &outcome.output)?,
        None => print!("{}", outcome.output),
    }
    Ok(outcome.met)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

//! `mixent` command-line tool.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mixent::experiment::{class_histograms, run_table, Layout, TWO_SQRT3};
use mixent::oracle::brute_force_min;
use mixent::sample::read_values;
use mixent::search::InitScheme;
use mixent::synth::{sample, MixtureSpec};
use mixent::{
    gaussian_split_test, search, ConfigFile, Error, FamilyConfig, FamilyKind, FitResult, InnerMode, Params, SearchConfig,
    WeightedSample,
};

mod exit {
    pub const FAILURE: u8 = 1;
    pub const IO: u8 = 3;
    pub const PARSE: u8 = 4;
    pub const EMPTY_SAMPLE: u8 = 5;
    pub const GUARD_HIT: u8 = 6;
    pub const TOO_LARGE: u8 = 7;
}

#[derive(Parser)]
#[command(name = "mixent", version, about = "Mixing-entropy clustering and order selection")]
struct Cli {
    /// Seed for all randomized steps; overrides the config file (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for restarts and enumeration (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a sample and report the selected number of classes.
    Fit(FitArgs),
    /// Compare one Gaussian against a two-Gaussian split at population level.
    Threshold(ThresholdArgs),
    /// Exhaustive minimum on a small sample.
    Oracle(OracleArgs),
    /// Order-recovery experiment on synthetic mixtures.
    Experiment(ExperimentArgs),
    /// Draw a synthetic sample as CSV.
    Sample(SampleArgs),
}

#[derive(Args)]
struct SearchArgs {
    /// Key-value config file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    stop_em: Option<usize>,
    #[arg(long)]
    stop_r: Option<usize>,
    #[arg(long)]
    r_max_guard: Option<usize>,
    #[arg(long, value_parser = parse_inner)]
    inner: Option<InnerMode>,
    #[arg(long, value_parser = parse_init)]
    init: Option<InitScheme>,
    /// Polish restart optima with small moves on samples with at most this
    /// many distinct values (0 disables).
    #[arg(long)]
    polish_max_values: Option<usize>,
    /// Bi-exponential side-weight bound.
    #[arg(long)]
    alpha: Option<f64>,
    /// Allow classes whose fit hits the variance floor or rate cap.
    #[arg(long)]
    allow_degenerate: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV, one value per line with an optional header; `-` for stdin.
    input: PathBuf,
    #[arg(long, value_parser = parse_family)]
    family: Option<FamilyKind>,
    /// Values closer than this are merged before fitting (0 keeps exact values).
    #[arg(long)]
    grouping_tolerance: Option<f64>,
    /// Write JSON here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write per-class histograms with this many bins.
    #[arg(long, requires = "histogram_output")]
    histogram_bins: Option<usize>,
    #[arg(long)]
    histogram_output: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(allow_negative_numbers = true)]
    nu1: f64,
    #[arg(allow_negative_numbers = true)]
    mu1: f64,
    #[arg(allow_negative_numbers = true)]
    sigma1: f64,
    #[arg(allow_negative_numbers = true)]
    nu2: f64,
    #[arg(allow_negative_numbers = true)]
    mu2: f64,
    #[arg(allow_negative_numbers = true)]
    sigma2: f64,
}

#[derive(Args)]
struct OracleArgs {
    input: PathBuf,
    #[arg(long, value_parser = parse_family)]
    family: FamilyKind,
    /// Maximum number of classes.
    #[arg(short, long)]
    r: usize,
    #[arg(long, default_value_t = 0.0)]
    grouping_tolerance: f64,
    #[arg(long)]
    allow_degenerate: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableId {
    /// Two unit-variance components.
    Table1,
    /// Seven unit-variance components.
    Table2,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyChoice {
    Gaussian,
    Biexp,
    Both,
}

#[derive(Args)]
struct ExperimentArgs {
    table: TableId,
    #[arg(long, value_enum, default_value = "both")]
    family: FamilyChoice,
    /// Mean spacings as multiples of 2 sqrt(3); defaults to the table's rows.
    #[arg(long, value_delimiter = ',')]
    factors: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Per-run CSV destination (default stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-cell majority CSV destination (default stderr).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct SampleArgs {
    /// Mixture description file (weights and components).
    #[arg(long, conflicts_with_all = ["layout", "mu_factor"])]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, requires = "mu_factor")]
    layout: Option<TableId>,
    /// Mean spacing as a multiple of 2 sqrt(3).
    #[arg(long)]
    mu_factor: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Add the generating component of each value as a second column.
    #[arg(long)]
    labels: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_inner(s: &str) -> Result<InnerMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_init(s: &str) -> Result<InitScheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io(_) => exit::IO,
                Error::EmptySample => exit::EMPTY_SAMPLE,
                Error::EnumerationTooLarge { .. } => exit::TOO_LARGE,
                Error::Parse { .. }
                | Error::NonFinite { .. }
                | Error::Config(_)
                | Error::UnknownFamily(_)
                | Error::NotBinary(_)
                | Error::InvalidTolerance(_) => exit::PARSE,
                _ => exit::FAILURE,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return exit::IO;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return exit::IO;
        }
    }
    exit::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("mixent: {e}");
            return ExitCode::from(exit::FAILURE);
        }
    }
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a, cli.seed),
        Command::Threshold(a) => cmd_threshold(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Experiment(a) => cmd_experiment(a, cli.seed),
        Command::Sample(a) => cmd_sample(a, cli.seed),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mixent: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_input(path: &Path) -> anyhow::Result<Vec<f64>> {
    let values = if path == Path::new("-") {
        read_values(io::stdin().lock())
    } else {
        let file = File::open(path).map_err(Error::from).with_context(|| format!("opening {}", path.display()))?;
        read_values(BufReader::new(file))
    };
    values.with_context(|| format!("reading {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(Error::from).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes()).map_err(Error::from)?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Resolves search and family settings: defaults, then file, then flags.
fn resolve(args: &SearchArgs, family: Option<FamilyKind>, seed: Option<u64>) -> anyhow::Result<(SearchConfig, FamilyConfig, ConfigFile)> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ConfigFile::default(),
    };
    let mut cfg = file.search_config(SearchConfig::default());
    let mut fam = file.family_config(FamilyKind::Gaussian);
    if let Some(kind) = family {
        fam.kind = kind;
    }
    macro_rules! flag {
        ($($f:ident),*) => { $( if let Some(v) = args.$f { cfg.$f = v; } )* };
    }
    flag!(n_init, stop_em, stop_r, r_max_guard, inner, init, polish_max_values);
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(a) = args.alpha {
        fam.alpha = a;
    }
    if args.allow_degenerate {
        fam.allow_degenerate = true;
    }
    cfg.validate()?;
    Ok((cfg, fam, file))
}

#[derive(Serialize)]
struct RestartSummary {
    total: usize,
    failed: usize,
    iterations: usize,
    levels: Vec<mixent::search::LevelRecord>,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    family: FamilyKind,
    #[serde(rename = "best_H")]
    best_h: f64,
    r_n: usize,
    r_searched: usize,
    order_tied: bool,
    tied_orders: &'a [usize],
    guard_hit: bool,
    seed: u64,
    nu: Vec<f64>,
    params: Vec<&'a Params>,
    /// 1-based class of each input row, classes numbered as in `nu`.
    labels: Vec<usize>,
    restarts: RestartSummary,
}

fn fit_output<'a>(res: &'a FitResult, w: &WeightedSample, raw: &[f64], tol: f64, family: FamilyKind, seed: u64) -> FitOutput<'a> {
    // report occupied classes only, renumbered in class-index order
    let occupied: Vec<usize> = (0..res.criterion.nu.len()).filter(|&x| res.criterion.nu[x] > 0.0).collect();
    let rank = |x: usize| occupied.iter().position(|&o| o == x).expect("label is occupied") + 1;
    let labels = raw
        .iter()
        .map(|&z| rank(res.best_assignment.labels()[w.index_of(z, tol).expect("every row is in the sample")]))
        .collect();
    FitOutput {
        family,
        best_h: res.best_h,
        r_n: res.r_n,
        r_searched: res.r_searched,
        order_tied: res.order_tied(),
        tied_orders: &res.tied_orders,
        guard_hit: res.guard_hit,
        seed,
        nu: occupied.iter().map(|&x| res.criterion.nu[x]).collect(),
        params: occupied.iter().filter_map(|&x| res.criterion.params[x].as_ref()).collect(),
        labels,
        restarts: RestartSummary {
            total: res.restarts.len(),
            failed: res.restarts.iter().filter(|r| r.error.is_some()).count(),
            iterations: res.restarts.iter().map(|r| r.iterations).sum(),
            levels: res.levels.clone(),
        },
    }
}

fn cmd_fit(a: &FitArgs, seed: Option<u64>) -> anyhow::Result<u8> {
    let (cfg, fam_cfg, file) = resolve(&a.search, a.family, seed)?;
    let tol = a.grouping_tolerance.or(file.grouping_tolerance).unwrap_or(0.0);
    let raw = read_input(&a.input)?;
    let w = WeightedSample::ingest(&raw, tol)?;
    let family = fam_cfg.bind(&w)?;
    let res = search(&w, &family, &cfg)?;
    write_output(a.output.as_deref(), &to_json(&fit_output(&res, &w, &raw, tol, fam_cfg.kind, cfg.seed))?)?;
    if let (Some(bins), Some(path)) = (a.histogram_bins, &a.histogram_output) {
        let h = class_histograms(&res, &w, bins)?;
        write_output(Some(path), &h.to_csv())?;
    }
    if res.guard_hit {
        eprintln!("mixent: search stopped at the order guard ({}) before converging", cfg.r_max_guard);
        return Ok(exit::GUARD_HIT);
    }
    Ok(0)
}

fn cmd_threshold(a: &ThresholdArgs) -> anyhow::Result<u8> {
    let rep = gaussian_split_test(a.nu1, a.mu1, a.sigma1, a.nu2, a.mu2, a.sigma2)?;
    write_output(None, &to_json(&rep)?)?;
    Ok(0)
}

#[derive(Serialize)]
struct OracleOutput {
    family: FamilyKind,
    r: usize,
    #[serde(rename = "min_H")]
    min_h: f64,
    values: Vec<f64>,
    counts: Vec<u64>,
    /// Each optimum as 1-based classes of the distinct values.
    optima: Vec<Vec<usize>>,
    optimal_orders: Vec<usize>,
    evaluated: u64,
}

fn cmd_oracle(a: &OracleArgs) -> anyhow::Result<u8> {
    let raw = read_input(&a.input)?;
    let w = WeightedSample::ingest(&raw, a.grouping_tolerance)?;
    let mut fam_cfg = FamilyConfig::new(a.family);
    fam_cfg.allow_degenerate = a.allow_degenerate;
    let family = fam_cfg.bind(&w)?;
    let res = brute_force_min(&w, &family, a.r)?;
    let out = OracleOutput {
        family: a.family,
        r: a.r,
        min_h: res.min_h,
        values: w.values().to_vec(),
        counts: w.counts().to_vec(),
        optima: res.argmin.iter().map(|h| h.labels().iter().map(|l| l + 1).collect()).collect(),
        optimal_orders: res.optimal_orders(),
        evaluated: res.evaluated,
    };
    write_output(None, &to_json(&out)?)?;
    Ok(0)
}

fn cmd_experiment(a: &ExperimentArgs, seed: Option<u64>) -> anyhow::Result<u8> {
    let (cfg, fam_cfg, _) = resolve(&a.search, None, seed)?;
    let layout = match a.table {
        TableId::Table1 => Layout::TwoComponents,
        TableId::Table2 => Layout::SevenComponents,
    };
    let factors = a.factors.clone().unwrap_or_else(|| layout.default_factors().to_vec());
    let kinds: &[FamilyKind] = match a.family {
        FamilyChoice::Gaussian => &[FamilyKind::Gaussian],
        FamilyChoice::Biexp => &[FamilyKind::BiExp],
        FamilyChoice::Both => &[FamilyKind::Gaussian, FamilyKind::BiExp],
    };
    let mut report = mixent::experiment::TableReport::default();
    for &kind in kinds {
        let fam = FamilyConfig { kind, ..fam_cfg };
        let part = run_table(layout, &fam, &factors, a.n, &a.seeds, &cfg)?;
        report.runs.extend(part.runs);
        report.cells.extend(part.cells);
    }
    write_output(a.output.as_deref(), &report.runs_csv())?;
    match &a.summary {
        Some(p) => write_output(Some(p), &report.summary_csv())?,
        None => eprint!("{}", report.summary_csv()),
    }
    Ok(0)
}

fn cmd_sample(a: &SampleArgs, seed: Option<u64>) -> anyhow::Result<u8> {
    let spec = match (&a.spec, a.layout, a.mu_factor) {
        (Some(p), _, _) => {
            let text = std::fs::read_to_string(p).map_err(Error::from).with_context(|| format!("reading {}", p.display()))?;
            MixtureSpec::from_toml(&text)?
        }
        (None, Some(TableId::Table1), Some(f)) => Layout::TwoComponents.spec(f * TWO_SQRT3)?,
        (None, Some(TableId::Table2), Some(f)) => Layout::SevenComponents.spec(f * TWO_SQRT3)?,
        _ => return Err(Error::Config("give either --spec or --layout with --mu-factor".into()).into()),
    };
    let (values, labels) = sample(&spec, a.n, seed.unwrap_or(0))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    if a.labels {
        w.write_record(["value", "component"])?;
        for (z, l) in values.iter().zip(&labels) {
            w.write_record([z.to_string(), (l + 1).to_string()])?;
        }
    } else {
        w.write_record(["value"])?;
        for z in &values {
            w.write_record([z.to_string()])?;
        }
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)?;
    write_output(a.output.as_deref(), &text)?;
    Ok(0)
}

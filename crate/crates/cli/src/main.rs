//! `mdc`: mine prevalent maximal dynamic co-location patterns from snapshot
//! CSVs, generate synthetic inputs, run parameter sweeps and oracle checks.
//!
//! Exit status is 0 on success, 2 for bad input or configuration and 1 for
//! IO failures or failed oracle checks. Diagnostics go to stderr; results go
//! to files only.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use mdc_core::bench::{run_sweep, write_bench, SweepSpec};
use mdc_core::fixtures::{random_graph, small_case, SmallCaseLimits};
use mdc_core::io::{
    check_life_cycles, read_life_cycles, read_series, read_snapshots, sniff, write_life_cycles,
    write_pairs, write_report, write_series, write_size2, write_snapshots, InputKind,
};
use mdc_core::oracle::all_pairs_neighbors;
use mdc_core::pipeline::{size2_dpis, size2_stage};
use mdc_core::{
    bron_kerbosch, brute_force_maximal, diff_snapshots, generate, join_based_mine,
    maximal_cliques, mine, neighbor_pairs, Algorithm, Comparison, DynamicDatasetSeries,
    FeatureCounts, GenConfig, LifeCycles, MineOptions, MiningConfig, OracleConfig, PatternResult,
    Pruning, Spans,
};

#[derive(Parser)]
#[command(name = "mdc", version, about = "Prevalent maximal dynamic co-location mining")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Difference a snapshot CSV into a dynamic-series CSV.
    Diff {
        input: PathBuf,
        output: PathBuf,
    },
    /// Mine patterns from a snapshot or dynamic-series CSV.
    Mine(MineArgs),
    /// Generate a synthetic snapshot CSV.
    Gen(GenArgs),
    /// Run a parameter sweep and write `bench.csv` into a directory.
    Bench {
        spec: PathBuf,
        out_dir: PathBuf,
    },
    /// Compare the miners against the exhaustive oracles.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Mdc,
    Join,
}

#[derive(Clone, Copy, ValueEnum)]
enum CmpArg {
    Inclusive,
    Strict,
}

impl From<CmpArg> for Comparison {
    fn from(c: CmpArg) -> Self {
        match c {
            CmpArg::Inclusive => Comparison::Inclusive,
            CmpArg::Strict => Comparison::Strict,
        }
    }
}

#[derive(Args)]
struct Thresholds {
    /// Distance threshold.
    #[arg(long = "dd", default_value_t = 35.0)]
    d_d: f64,
    #[arg(long, default_value_t = 0.1)]
    min_prev: f64,
    #[arg(long, default_value_t = 3.0)]
    time_span: f64,
    /// `feature,life_cycle` CSV. Without it every base feature lives one
    /// time span.
    #[arg(long)]
    lifecycles: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "inclusive")]
    temporal: CmpArg,
    #[arg(long, value_enum, default_value = "inclusive")]
    prevalence: CmpArg,
}

#[derive(Args)]
struct MineArgs {
    input: PathBuf,
    #[command(flatten)]
    thresholds: Thresholds,
    #[arg(long, value_enum, default_value = "mdc")]
    algo: AlgoArg,
    /// Disable early abort on a provably low participation ratio.
    #[arg(long)]
    no_prune1: bool,
    /// Disable shared sub-pattern checks.
    #[arg(long)]
    no_prune2: bool,
    /// Report every prevalent pattern, not just the maximal ones.
    #[arg(long)]
    derive_all: bool,
    /// Leave the config preamble out of the report.
    #[arg(long)]
    seedless_report: bool,
    /// Pattern report path.
    #[arg(short, long, default_value = "patterns.txt")]
    output: PathBuf,
    /// Defaults to the report path with `.manifest` appended.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Also dump neighbor pairs as CSV.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Also dump prevalent size-2 patterns as CSV.
    #[arg(long)]
    size2: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Snapshot CSV to write.
    output: PathBuf,
    /// `key = value` generator config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    churn: Option<f64>,
    /// Any generator key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Defaults to the output path with `.gen.txt` appended.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Life cycles CSV; defaults to the output path with `.lifecycles.csv`
    /// appended.
    #[arg(long)]
    lifecycles: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Check this input instead of seeded random ones.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    thresholds: Thresholds,
    /// Number of seeded random cases.
    #[arg(long, default_value_t = 100)]
    cases: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Path with a suffix glued onto its file name.
fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let tmp = suffixed(path, ".tmp");
    let file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn millis(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1000.0)
}

/// Plain `key: value` lines.
#[derive(Default)]
struct Manifest(Vec<(String, String)>);

impl Manifest {
    fn put(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            for (k, v) in &self.0 {
                writeln!(w, "{k}: {v}")?;
            }
            Ok(())
        })
    }
}

fn format_error(line: Option<u64>, message: &str) -> mdc_core::Error {
    mdc_core::Error::Format {
        line,
        message: message.to_string(),
    }
}

fn load_series(bytes: &[u8], path: &Path) -> Result<DynamicDatasetSeries<f64>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| format_error(Some(1), "input is not UTF-8"))?;
    let series = match sniff(text) {
        Some(InputKind::Snapshots) => diff_snapshots(&read_snapshots::<f64>(bytes)?)?,
        Some(InputKind::Series) => read_series::<f64>(bytes)?,
        None => {
            return Err(format_error(
                Some(1),
                "missing header: expected a snapshot or dynamic-series CSV header",
            ))
            .with_context(|| path.display().to_string())
        }
    };
    Ok(series)
}

/// Thresholds, life cycles and spans for one series. Returns the life cycle
/// source for the manifest.
fn setup(
    t: &Thresholds,
    series: &DynamicDatasetSeries<f64>,
    manifest: &mut Manifest,
) -> Result<(MiningConfig<f64>, Spans)> {
    let config = MiningConfig::new(t.d_d, t.min_prev, t.time_span)?
        .with_temporal(t.temporal.into())
        .with_prevalence(t.prevalence.into());
    let life_cycles = match &t.lifecycles {
        Some(p) => {
            let bytes = read(p)?;
            let lc = read_life_cycles(bytes.as_slice())
                .with_context(|| p.display().to_string())?;
            check_life_cycles(&lc, series)?;
            manifest.put("lifecycles", p.display());
            manifest.put("lifecycles_sha256", sha256(&bytes));
            lc
        }
        None => {
            manifest.put("lifecycles", format!("uniform {}", t.time_span));
            LifeCycles::uniform(series.universe().base_ids(), t.time_span)?
        }
    };
    let spans = Spans::from_life_cycles(series.universe(), &life_cycles, t.time_span)?;
    manifest.put("d_d", t.d_d);
    manifest.put("min_prev", t.min_prev);
    manifest.put("time_span", t.time_span);
    manifest.put("temporal", config.temporal);
    manifest.put("prevalence", config.prevalence);
    Ok((config, spans))
}

fn cmd_diff(input: &Path, output: &Path) -> Result<()> {
    let bytes = read(input)?;
    let snapshots =
        read_snapshots::<f64>(bytes.as_slice()).with_context(|| input.display().to_string())?;
    let series = diff_snapshots(&snapshots)?;
    write_atomic(output, |w| Ok(write_series(&series, w)?))?;
    let rows: usize = snapshots.iter().map(|s| s.records.len()).sum();
    eprintln!(
        "{} snapshots, {rows} rows -> {} windows, {} dynamic instances",
        snapshots.len(),
        series.n_windows(),
        series.len()
    );
    Ok(())
}

fn cmd_mine(args: &MineArgs, threads: usize) -> Result<()> {
    let start = Instant::now();
    let mut m = Manifest::default();
    m.put("command", "mine");
    m.put("input", args.input.display());
    let bytes = read(&args.input)?;
    m.put("input_sha256", sha256(&bytes));
    let series = load_series(&bytes, &args.input)?;
    let (config, spans) = setup(&args.thresholds, &series, &mut m)?;
    let read_time = start.elapsed();

    let options = MineOptions {
        algorithm: match args.algo {
            AlgoArg::Mdc => Algorithm::Mdc,
            AlgoArg::Join => Algorithm::Join,
        },
        pruning: Pruning {
            early_abort: !args.no_prune1,
            shared_subpattern: !args.no_prune2,
        },
        derive_all: args.derive_all,
    };
    m.put("algo", options.algorithm);
    m.put("prune1", options.pruning.early_abort);
    m.put("prune2", options.pruning.shared_subpattern);
    m.put("derive_all", options.derive_all);
    m.put("threads", rayon::current_num_threads());
    m.put("threads_requested", threads);

    let report = mine(&series, &spans, &config, options)?;

    let universe = series.universe();
    let preamble: Vec<(String, String)> = if args.seedless_report {
        Vec::new()
    } else {
        vec![
            ("input_sha256".into(), sha256(&bytes)),
            ("d_d".into(), args.thresholds.d_d.to_string()),
            ("min_prev".into(), args.thresholds.min_prev.to_string()),
            ("time_span".into(), args.thresholds.time_span.to_string()),
            ("temporal".into(), config.temporal.to_string()),
            ("prevalence".into(), config.prevalence.to_string()),
            ("algo".into(), options.algorithm.to_string()),
            ("derive_all".into(), options.derive_all.to_string()),
        ]
    };
    write_atomic(&args.output, |w| {
        Ok(write_report(universe, &preamble, &report.patterns, w)?)
    })?;
    if let Some(p) = &args.pairs {
        let pairs = neighbor_pairs(&series, &spans, &config)?;
        write_atomic(p, |w| Ok(write_pairs(&series, &pairs, w)?))?;
    }
    if let Some(p) = &args.size2 {
        let (_, tables) = size2_stage(&series, &spans, &config)?;
        let counts = FeatureCounts::from_series(&series);
        write_atomic(p, |w| Ok(write_size2(universe, size2_dpis(&tables, &counts), w)?))?;
    }

    m.put("report", args.output.display());
    m.put("dynamic_instances", series.len());
    m.put("windows", series.n_windows());
    m.put("dynamic_features", universe.len());
    m.put("neighbor_pairs", report.neighbor_pairs);
    m.put("size2_prevalent", report.size2_prevalent);
    m.put("feature_cliques", report.cliques.len());
    m.put("time_read_ms", millis(read_time));
    for (stage, d) in report.timings.entries() {
        m.put(&format!("time_{stage}_ms"), millis(d));
    }
    m.put("time_total_ms", millis(start.elapsed()));
    m.put("patterns", report.patterns.len());
    m.put("maximal", report.maximal_count());
    for (size, n) in report.counts_by_size() {
        m.put(&format!("patterns_size_{size}"), n);
    }
    let s = &report.stats;
    m.put("candidates", s.candidates);
    m.put("subsumed", s.subsumed);
    m.put("tables_built", s.tables_built);
    m.put("early_aborts", s.early_aborts);
    m.put("shared_checked", s.shared_checked);
    m.put("shared_pruned", s.shared_pruned);
    m.put("splits", s.splits);
    let manifest = args
        .manifest
        .clone()
        .unwrap_or_else(|| suffixed(&args.output, ".manifest"));
    m.write(&manifest)?;
    eprintln!(
        "{} patterns ({} maximal) from {} dynamic instances",
        report.patterns.len(),
        report.maximal_count(),
        series.len()
    );
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = String::from_utf8(read(p)?)
                .map_err(|_| format_error(None, "config is not UTF-8"))?;
            GenConfig::from_key_values(&text).with_context(|| p.display().to_string())?
        }
        None => GenConfig::default(),
    };
    if let Some(n) = args.features {
        // keep life cycles in step unless a later --set overrides them
        let seed = cfg.seed;
        let lc = GenConfig::scaled(0, n, seed).life_cycles;
        cfg.n_base_features = n;
        cfg.life_cycles = lc;
    }
    if let Some(n) = args.instances {
        cfg.n_dynamic_instances = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = args.churn {
        cfg.churn_ratio = c;
    }
    for kv in &args.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| mdc_core::Error::InvalidConfig(format!("expected KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    let (snapshots, report) = generate(&cfg)?;
    write_atomic(&args.output, |w| Ok(write_snapshots(&snapshots, w)?))?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| suffixed(&args.output, ".gen.txt"));
    write_atomic(&report_path, |w| Ok(w.write_all(report.to_text().as_bytes())?))?;
    let lc_path = args
        .lifecycles
        .clone()
        .unwrap_or_else(|| suffixed(&args.output, ".lifecycles.csv"));
    let lc = cfg.life_cycles()?;
    write_atomic(&lc_path, |w| Ok(write_life_cycles(&lc, w)?))?;
    eprintln!(
        "{} snapshots, {} dynamic instances ({} planted)",
        snapshots.len(),
        report.total(),
        report.planted_instances
    );
    Ok(())
}

fn cmd_bench(spec_path: &Path, out_dir: &Path) -> Result<()> {
    let text = String::from_utf8(read(spec_path)?)
        .map_err(|_| format_error(None, "sweep spec is not UTF-8"))?;
    let spec = SweepSpec::parse(&text).with_context(|| spec_path.display().to_string())?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let rows = run_sweep(&spec, |r| {
        eprintln!(
            "{}={} {}: {} maximal, {} prevalent, {} ms",
            r.param,
            r.value,
            r.algo,
            r.maximal_count,
            r.prevalent_count,
            millis(r.elapsed)
        )
    })?;
    write_atomic(&out_dir.join("bench.csv"), |w| Ok(write_bench(&rows, w)?))
}

/// Outcome tally for `check`.
#[derive(Default)]
struct Tally {
    passed: usize,
    failed: Vec<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            let msg = what();
            eprintln!("mismatch: {msg}");
            self.failed.push(msg);
        }
    }
}

fn same_results(a: &[PatternResult], b: &[PatternResult]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.pattern == y.pattern && (x.dpi - y.dpi).abs() <= 1e-12 && x.row_count == y.row_count
        })
}

fn check_series(
    tally: &mut Tally,
    label: &str,
    series: &DynamicDatasetSeries<f64>,
    spans: &Spans,
    config: &MiningConfig<f64>,
) -> Result<()> {
    let counts = FeatureCounts::from_series(series);
    let oracle = brute_force_maximal(series, spans, &counts, config, &OracleConfig::default())?;
    for pruning in Pruning::combinations() {
        let opts = MineOptions {
            pruning,
            ..MineOptions::default()
        };
        let got = mine(series, spans, config, opts)?.patterns;
        tally.record(same_results(&got, &oracle), || {
            format!("{label}: maximal patterns differ from brute force ({pruning:?})")
        });
    }
    let derived = mine(
        series,
        spans,
        config,
        MineOptions {
            derive_all: true,
            ..MineOptions::default()
        },
    )?
    .patterns;
    let join = join_based_mine(series, spans, &counts, config)?;
    tally.record(same_results(&derived, &join), || {
        format!("{label}: derived prevalent set differs from join")
    });
    for temporal in [Comparison::Inclusive, Comparison::Strict] {
        let cfg = config.with_temporal(temporal);
        tally.record(
            neighbor_pairs(series, spans, &cfg)? == all_pairs_neighbors(series, spans, &cfg)?,
            || format!("{label}: grid neighbors differ from all-pairs scan ({temporal})"),
        );
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<()> {
    let mut tally = Tally::default();
    match &args.input {
        Some(p) => {
            let bytes = read(p)?;
            let series = load_series(&bytes, p)?;
            let (config, spans) = setup(&args.thresholds, &series, &mut Manifest::default())?;
            check_series(&mut tally, &p.display().to_string(), &series, &spans, &config)?;
        }
        None => {
            for seed in args.seed..args.seed + args.cases {
                let case = small_case(seed, SmallCaseLimits::default());
                let spans = case.spans()?;
                check_series(&mut tally, &format!("seed {seed}"), &case.series, &spans, &case.config)?;
                let g = random_graph(seed, 5 + (seed % 36) as usize, 0.1 + 0.5 * ((seed % 11) as f64 / 10.0));
                tally.record(maximal_cliques(&g) == bron_kerbosch(&g), || {
                    format!("seed {seed}: cliques differ from Bron-Kerbosch")
                });
            }
        }
    }
    eprintln!("{} checks passed, {} failed", tally.passed, tally.failed.len());
    if !tally.failed.is_empty() {
        bail!(CheckFailed(tally.failed.len()));
    }
    Ok(())
}

#[derive(Debug)]
struct CheckFailed(usize);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} oracle checks failed", self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Diff { input, output } => cmd_diff(input, output),
        Command::Mine(args) => cmd_mine(args, cli.threads),
        Command::Gen(args) => cmd_gen(args),
        Command::Bench { spec, out_dir } => cmd_bench(spec, out_dir),
        Command::Check(args) => cmd_check(args),
    }
}

/// 2 for anything the caller got wrong, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<mdc_core::Error>() {
            return if err.is_input_error() { 2 } else { 1 };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 1;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

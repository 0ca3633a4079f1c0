//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mdc_core::bench::{run_point, BenchAlgo};
use mdc_core::fixtures::{
    example_config, example_life_cycles, example_snapshots, random_graph, small_case, SmallCase,
    SmallCaseLimits,
};
use mdc_core::oracle::all_pairs_neighbors;
use mdc_core::verify::{anti_monotonicity_violations, verify_all_traced, AcceptedSet, CandidateQueue};
use mdc_core::{
    bron_kerbosch, brute_force_maximal, build_feature_graph, candidate_table_instance,
    derive_all_prevalent, diff_snapshots, dpi, dpr, generate, join_based_mine, maximal_cliques,
    mine, neighbor_pairs, prevalent_size2, size2_table_instances, Comparison, DynamicDatasetSeries,
    DynamicFeature, FeatureCounts, FeatureUniverse, GenConfig, Kind, MineOptions, MiningConfig,
    OracleConfig, Pattern, PatternResult, Pruning, Spans,
};

/// DPI agreement between independent computations.
const DPI_TOL: f64 = 1e-12;
/// Pruned run may take up to this multiple of the unpruned one.
const PRUNING_SLACK: f64 = 1.10;
/// Best-of-n repeats for every timed comparison.
const REPEATS: usize = 3;

const C1_LIMIT: Duration = Duration::from_secs(1);
const C2_LIMIT: Duration = Duration::from_secs(300);
const C4_LIMIT: Duration = Duration::from_secs(60);
const C7_LIMIT: Duration = Duration::from_secs(600);

const D_D_SWEEP: [f64; 5] = [15.0, 20.0, 25.0, 30.0, 35.0];
const MIN_PREV_SWEEP: [f64; 5] = [0.25, 0.2, 0.15, 0.1, 0.05];
const SWEEP_SEEDS: std::ops::RangeInclusive<u64> = 1..=5;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn same_results(a: &[PatternResult], b: &[PatternResult]) -> Result<(), String> {
    ensure(a.len() == b.len(), || format!("{} vs {} patterns", a.len(), b.len()))?;
    for (x, y) in a.iter().zip(b) {
        ensure(x.pattern == y.pattern, || format!("{:?} vs {:?}", x.pattern, y.pattern))?;
        ensure((x.dpi - y.dpi).abs() <= DPI_TOL, || {
            format!("{:?}: dpi {} vs {}", x.pattern, x.dpi, y.dpi)
        })?;
    }
    Ok(())
}

fn example_series() -> (DynamicDatasetSeries<f64>, Spans, MiningConfig<f64>) {
    let series = diff_snapshots(&example_snapshots()).expect("example diffs");
    let config = example_config();
    let spans = Spans::from_life_cycles(series.universe(), &example_life_cycles(), config.time_span)
        .expect("example spans");
    (series, spans, config)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (series, spans, config) = example_series();
    let u = series.universe();
    let p = |s: &str| u.parse_pattern(s).map_err(err);
    let counts = FeatureCounts::from_series(&series);
    let pairs = neighbor_pairs(&series, &spans, &config).map_err(err)?;
    let all_tables = size2_table_instances(&series, &pairs);

    // participation of {A_new, B_new}
    let ab = p("{A_new,B_new}")?;
    let t = &all_tables[&ab];
    let [a, b] = [ab.features()[0], ab.features()[1]];
    let ratios = (dpr(t, a, &counts).map_err(err)?, dpr(t, b, &counts).map_err(err)?);
    ensure(ratios == (0.5, 0.5) && dpi(t, &counts) == 0.5, || {
        format!("DPR/DPI of {{A_new,B_new}}: {ratios:?}, {}", dpi(t, &counts))
    })?;

    // feature graph
    let graph = build_feature_graph(prevalent_size2(all_tables, &counts, &config));
    let edges: Vec<String> = graph.edges().iter().map(|e| u.display(e)).collect();
    let mut want = vec![
        "{A_new,B_new}",
        "{A_new,C_new}",
        "{A_dead,B_new}",
        "{A_dead,B_dead}",
        "{A_dead,C_dead}",
        "{B_new,C_dead}",
    ];
    let mut got: Vec<&str> = edges.iter().map(String::as_str).collect();
    want.sort_unstable();
    got.sort_unstable();
    ensure(got == want, || format!("graph edges {got:?}"))?;

    // maximal cliques
    let mut cliques: Vec<String> = maximal_cliques(&graph)
        .iter()
        .map(|c| u.display(c))
        .collect();
    cliques.sort();
    let mut want = vec!["{A_dead,B_new,C_dead}", "{A_new,B_new}", "{A_new,C_new}", "{A_dead,B_dead}"];
    want.sort_unstable();
    ensure(cliques == want, || format!("cliques {cliques:?}"))?;

    // verified row of {A_dead, B_new, C_dead}
    let t = candidate_table_instance(&p("{A_dead,B_new,C_dead}")?, graph.tables()).map_err(err)?;
    let rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| r.iter().map(|&i| series.label(i)).collect())
        .collect();
    ensure(rows == [["A_dead.1", "B_new.1", "C_dead.2"]], || format!("rows {rows:?}"))?;

    // splitting a failed size-4 candidate
    let u4 = FeatureUniverse::new([
        DynamicFeature::new("A", Kind::Dead),
        DynamicFeature::new("B", Kind::New),
        DynamicFeature::new("C", Kind::Dead),
        DynamicFeature::new("D", Kind::New),
    ]);
    let q = |s: &str| u4.parse_pattern(s).map_err(err);
    let mut accepted = AcceptedSet::new(u4.len());
    accepted.insert(q("{A_dead,B_new,C_dead}")?);
    let mut queue = CandidateQueue::default();
    let mut added: Vec<String> = queue
        .split_failed(&q("{A_dead,B_new,C_dead,D_new}")?, &accepted)
        .iter()
        .map(|c| u4.display(c))
        .collect();
    added.sort();
    let want = ["{A_dead,B_new,D_new}", "{A_dead,C_dead,D_new}", "{B_new,C_dead,D_new}"];
    ensure(added == want, || format!("enqueued {added:?}"))?;

    let elapsed = start.elapsed();
    ensure(elapsed < C1_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("all example values exact in {elapsed:.2?}"))
}

fn cases() -> Vec<SmallCase> {
    (0..100).map(|s| small_case(s, SmallCaseLimits::default())).collect()
}

/// Criteria 2 and 9 share the same verification runs.
fn criteria_2_and_9(cases: &[SmallCase]) -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut patterns = 0;
    let mut pairs_checked = 0usize;
    let mut violations = Vec::new();
    let mut run = || -> Result<(), String> {
        for case in cases {
            let spans = case.spans().map_err(err)?;
            let counts = FeatureCounts::from_series(&case.series);
            let oracle = brute_force_maximal(
                &case.series,
                &spans,
                &counts,
                &case.config,
                &OracleConfig::default(),
            )
            .map_err(err)?;
            let pairs = neighbor_pairs(&case.series, &spans, &case.config).map_err(err)?;
            let graph = build_feature_graph(prevalent_size2(
                size2_table_instances(&case.series, &pairs),
                &counts,
                &case.config,
            ));
            let cliques = maximal_cliques(&graph);
            for pruning in Pruning::combinations() {
                let out = verify_all_traced(&cliques, graph.tables(), &counts, &case.config, pruning)
                    .map_err(err)?;
                same_results(&out.maximal, &oracle)
                    .map_err(|e| format!("seed {} {pruning:?}: {e}", case.seed))?;
                for (a, b) in out.maximal.iter().zip(&oracle) {
                    ensure(a.row_count == b.row_count, || {
                        format!("seed {}: row counts of {:?} differ", case.seed, a.pattern)
                    })?;
                }
                pairs_checked += subset_pairs(&out.ratios);
                violations.extend(
                    anti_monotonicity_violations(&out.ratios)
                        .into_iter()
                        .map(|v| (case.seed, v)),
                );
            }
            patterns += oracle.len();
        }
        Ok(())
    };
    let c2 = run().and_then(|()| {
        let elapsed = start.elapsed();
        ensure(elapsed < C2_LIMIT, || format!("took {elapsed:?}"))?;
        Ok(format!(
            "{} series, {patterns} maximal patterns, 4 pruning settings, {elapsed:.2?}",
            cases.len()
        ))
    });
    let c9 = match &c2 {
        Err(e) => Err(format!("verification runs failed: {e}")),
        Ok(_) => ensure(violations.is_empty(), || {
            format!("{} violations, first {:?}", violations.len(), violations[0])
        })
        .map(|()| format!("{pairs_checked} pattern/superset pairs, 0 violations")),
    };
    (c2, c9)
}

fn subset_pairs(ratios: &BTreeMap<Pattern, Vec<f64>>) -> usize {
    let keys: Vec<&Pattern> = ratios.keys().collect();
    keys.iter()
        .flat_map(|a| keys.iter().map(move |b| (a, b)))
        .filter(|(a, b)| a.len() < b.len() && a.is_subset_of(b))
        .count()
}

fn criterion_3(cases: &[SmallCase]) -> Outcome {
    let mut prevalent = 0;
    for case in cases {
        let spans = case.spans().map_err(err)?;
        let counts = FeatureCounts::from_series(&case.series);
        let maximal = mine(&case.series, &spans, &case.config, MineOptions::default()).map_err(err)?;
        let pairs = neighbor_pairs(&case.series, &spans, &case.config).map_err(err)?;
        let tables = prevalent_size2(size2_table_instances(&case.series, &pairs), &counts, &case.config);
        let maximal: Vec<Pattern> = maximal.patterns.into_iter().map(|r| r.pattern).collect();
        let derived = derive_all_prevalent(&maximal, &tables, &counts, &case.config).map_err(err)?;
        let join = join_based_mine(&case.series, &spans, &counts, &case.config).map_err(err)?;
        same_results(&derived, &join).map_err(|e| format!("seed {}: {e}", case.seed))?;
        prevalent += join.len();
    }
    Ok(format!("{} series, {prevalent} prevalent patterns agree", cases.len()))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut cliques = 0;
    for seed in 0..200u64 {
        let n = 1 + (seed % 40) as usize;
        let density = 0.1 + 0.5 * ((seed * 7) % 51) as f64 / 50.0;
        let g = random_graph(seed, n, density);
        let (ours, oracle) = (maximal_cliques(&g), bron_kerbosch(&g));
        ensure(ours == oracle, || format!("graph {seed} (n {n}, density {density:.2}) differs"))?;
        cliques += ours.len();
    }
    let elapsed = start.elapsed();
    ensure(elapsed < C4_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("200 graphs, {cliques} cliques, {elapsed:.2?}"))
}

fn criterion_5() -> Outcome {
    let limits = SmallCaseLimits {
        max_instances: 500,
        max_windows: 6,
        ..SmallCaseLimits::default()
    };
    let mut pairs = 0;
    for seed in 1000..1050 {
        let case = small_case(seed, limits);
        let spans = case.spans().map_err(err)?;
        for mode in [Comparison::Inclusive, Comparison::Strict] {
            let cfg = case.config.with_temporal(mode);
            let grid = neighbor_pairs(&case.series, &spans, &cfg).map_err(err)?;
            let scan = all_pairs_neighbors(&case.series, &spans, &cfg).map_err(err)?;
            ensure(grid == scan, || format!("seed {seed} ({mode}): {} vs {}", grid.len(), scan.len()))?;
            pairs += grid.len();
        }
    }
    Ok(format!("50 series, both temporal modes, {pairs} pairs"))
}

struct Generated {
    series: DynamicDatasetSeries<f64>,
    spans: Spans,
    time_span: f64,
}

fn generated(cfg: &GenConfig) -> Result<Generated, String> {
    let (snaps, _) = generate(cfg).map_err(err)?;
    let series = diff_snapshots(&snaps).map_err(err)?;
    let life_cycles = cfg.life_cycles().map_err(err)?;
    let spans = Spans::from_life_cycles(series.universe(), &life_cycles, cfg.time_span).map_err(err)?;
    Ok(Generated {
        series,
        spans,
        time_span: cfg.time_span,
    })
}

fn best_of<R>(n: usize, mut f: impl FnMut() -> Result<R, String>) -> Result<(R, Duration), String> {
    let mut best: Option<(R, Duration)> = None;
    for _ in 0..n {
        let start = Instant::now();
        let r = f()?;
        let t = start.elapsed();
        if best.as_ref().is_none_or(|b| t < b.1) {
            best = Some((r, t));
        }
    }
    Ok(best.expect("at least one run"))
}

fn criterion_6() -> Outcome {
    let data = generated(&GenConfig::scaled(2000, 10, 1))?;
    let config = MiningConfig::new(35.0, 0.1, data.time_span).map_err(err)?;
    let mut results = Vec::new();
    let mut times = Vec::new();
    for pruning in Pruning::combinations() {
        let options = MineOptions {
            pruning,
            ..MineOptions::default()
        };
        let (r, t) = best_of(REPEATS, || {
            mine(&data.series, &data.spans, &config, options).map_err(err)
        })?;
        results.push(r.patterns);
        times.push(t);
    }
    ensure(results.windows(2).all(|w| w[0] == w[1]), || {
        "pruning settings disagree on the result".into()
    })?;
    let (none, all) = (times[0], times[3]);
    let detail = format!(
        "{} maximal patterns; none {:.1} ms, p1 {:.1} ms, p2 {:.1} ms, both {:.1} ms",
        results[0].len(),
        ms(none),
        ms(times[1]),
        ms(times[2]),
        ms(all)
    );
    ensure(all.as_secs_f64() <= PRUNING_SLACK * none.as_secs_f64(), || {
        format!("pruned run slower than {PRUNING_SLACK} x unpruned: {detail}")
    })?;
    Ok(detail)
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Generator settings for the sweeps: mostly planted events, larger and
/// fewer cluster feature sets than the defaults.
fn sweep_config(seed: u64) -> GenConfig {
    GenConfig {
        churn_ratio: 0.9,
        max_cluster_features: 6,
        cluster_count: 4,
        ..GenConfig::scaled(1000, 10, seed)
    }
}

/// Summed over the sweep seeds.
#[derive(Debug, Clone, Copy, Default)]
struct SweepPoint {
    maximal: usize,
    prevalent: usize,
}

impl SweepPoint {
    fn ratio(&self) -> f64 {
        if self.maximal == 0 {
            1.0
        } else {
            self.prevalent as f64 / self.maximal as f64
        }
    }
}

fn sweep(datasets: &[Generated], points: &[(f64, f64)]) -> Result<Vec<SweepPoint>, String> {
    points
        .iter()
        .map(|&(d_d, min_prev)| {
            let mut acc = SweepPoint::default();
            for data in datasets {
                let config = MiningConfig::new(d_d, min_prev, data.time_span).map_err(err)?;
                let r = mine(
                    &data.series,
                    &data.spans,
                    &config,
                    MineOptions {
                        derive_all: true,
                        ..MineOptions::default()
                    },
                )
                .map_err(err)?;
                acc.maximal += r.maximal_count();
                acc.prevalent += r.patterns.len();
            }
            Ok(acc)
        })
        .collect()
}

fn describe(values: &[f64], pts: &[SweepPoint]) -> String {
    values
        .iter()
        .zip(pts)
        .map(|(v, p)| format!("{v}: {}/{}={:.2} gap {}", p.prevalent, p.maximal, p.ratio(), p.prevalent - p.maximal))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Returns the outcome plus the densest point as `(d_d, min_prev)`.
fn criterion_7(datasets: &[Generated]) -> (Outcome, Option<(f64, f64)>) {
    let start = Instant::now();
    let d_points: Vec<(f64, f64)> = D_D_SWEEP.iter().map(|&d| (d, 0.1)).collect();
    let m_points: Vec<(f64, f64)> = MIN_PREV_SWEEP.iter().map(|&m| (35.0, m)).collect();
    let (by_d, by_m) = match (sweep(datasets, &d_points), sweep(datasets, &m_points)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (Err(e), None),
    };
    let densest = d_points
        .iter()
        .zip(&by_d)
        .chain(m_points.iter().zip(&by_m))
        .max_by_key(|(_, p)| p.prevalent)
        .map(|(&pt, _)| pt);
    let detail = format!(
        "d_d [{}]; min_prev [{}]",
        describe(&D_D_SWEEP, &by_d),
        describe(&MIN_PREV_SWEEP, &by_m)
    );
    let check = || -> Result<(), String> {
        for p in by_d.iter().chain(&by_m) {
            ensure(p.maximal <= p.prevalent, || format!("maximal above prevalent: {p:?}"))?;
        }
        for (name, pts) in [("d_d", &by_d), ("min_prev", &by_m)] {
            for w in pts.windows(2) {
                ensure(w[1].ratio() >= w[0].ratio(), || {
                    format!("prevalent/maximal ratio drops along the {name} sweep")
                })?;
            }
        }
        let elapsed = start.elapsed();
        ensure(elapsed < C7_LIMIT, || format!("took {elapsed:?}"))
    };
    let outcome = match check() {
        Ok(()) => Ok(detail),
        Err(e) => Err(format!("{e}; {detail}")),
    };
    (outcome, densest)
}

fn criterion_8(datasets: &[Generated], densest: Option<(f64, f64)>) -> Outcome {
    let (d_d, min_prev) = densest.ok_or("no sweep result")?;
    let mut totals = [Duration::ZERO; 2];
    for data in datasets {
        let config = MiningConfig::new(d_d, min_prev, data.time_span).map_err(err)?;
        for (slot, algo) in [BenchAlgo::Mdc, BenchAlgo::Join].into_iter().enumerate() {
            let (_, _, t) = run_point(&data.series, &data.spans, &config, algo, REPEATS).map_err(err)?;
            totals[slot] += t;
        }
    }
    let detail = format!(
        "d_d {d_d}, min_prev {min_prev}: mdc {:.2} ms, join {:.2} ms over {} datasets",
        ms(totals[0]),
        ms(totals[1]),
        datasets.len()
    );
    ensure(totals[0] < totals[1], || format!("mdc not faster: {detail}"))?;
    Ok(detail)
}

fn mdc_bin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mdc"))
        .args(args)
        .output()
        .map_err(err)?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim())
    })
}

/// Bench rows without the timing column.
fn bench_counts(path: &Path) -> Result<String, String> {
    let text = fs::read_to_string(path).map_err(err)?;
    Ok(text
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n"))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(err)?;
    let spec = dir.path().join("sweep.txt");
    fs::write(&spec, "base.instances = 1500\nd_d = 25, 35\nalgos = mdc, join\nseed = 7\n").map_err(err)?;
    let mut outputs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for threads in ["1", "8"] {
        let d = dir.path().join(format!("t{threads}"));
        fs::create_dir(&d).map_err(err)?;
        let p = |name: &str| d.join(name).to_string_lossy().into_owned();
        let t = ["--threads", threads];
        let run = |args: &[&str]| mdc_bin(&[&t[..], args].concat());
        run(&["gen", &p("gen.csv"), "--instances", "3000", "--seed", "7"])?;
        run(&["diff", &p("gen.csv"), &p("series.csv")])?;
        let lc = p("gen.csv.lifecycles.csv");
        run(&["mine", &p("gen.csv"), "--lifecycles", &lc, "-o", &p("mdc.txt")])?;
        run(&["mine", &p("series.csv"), "--lifecycles", &lc, "--derive-all", "-o", &p("all.txt")])?;
        run(&["mine", &p("gen.csv"), "--lifecycles", &lc, "--algo", "join", "-o", &p("join.txt")])?;
        run(&["bench", &spec.to_string_lossy(), &p("bench")])?;
        run(&["check", "--cases", "5"])?;
        let mut files = Vec::new();
        for name in ["gen.csv", "gen.csv.gen.txt", "series.csv", "mdc.txt", "all.txt", "join.txt"] {
            files.push((name.to_string(), fs::read(d.join(name)).map_err(err)?));
        }
        files.push(("bench.csv".into(), bench_counts(&d.join("bench/bench.csv"))?.into_bytes()));
        outputs.push(files);
    }
    for (a, b) in outputs[0].iter().zip(&outputs[1]) {
        ensure(a.1 == b.1, || format!("{} differs between 1 and 8 threads", a.0))?;
    }
    Ok(format!("{} outputs byte-identical across 1 and 8 threads", outputs[0].len()))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, outcome: Outcome| {
        match &outcome {
            Ok(d) => println!("criterion {n:>2} PASS {name}: {d}"),
            Err(e) => println!("criterion {n:>2} FAIL {name}: {e}"),
        }
        results.push((n, name, outcome));
    };

    report(1, "worked example", criterion_1());
    let fixtures = cases();
    let (c2, c9) = criteria_2_and_9(&fixtures);
    report(2, "maximal mining vs brute force", c2);
    report(3, "derived prevalent set vs join", criterion_3(&fixtures));
    report(4, "cliques vs Bron-Kerbosch", criterion_4());
    report(5, "grid neighbors vs all-pairs scan", criterion_5());
    report(6, "pruning neutrality and cost", criterion_6());
    let datasets: Result<Vec<Generated>, String> =
        SWEEP_SEEDS.map(|s| generated(&sweep_config(s))).collect();
    let (c7, densest) = match &datasets {
        Ok(d) => criterion_7(d),
        Err(e) => (Err(e.clone()), None),
    };
    report(7, "prevalent/maximal ratio trend", c7);
    let c8 = match &datasets {
        Ok(d) => criterion_8(d, densest),
        Err(e) => Err(e.clone()),
    };
    report(8, "mdc faster than join at the densest point", c8);
    report(9, "anti-monotone participation", c9);
    report(10, "thread count determinism", criterion_10());

    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

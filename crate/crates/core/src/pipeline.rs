//! End-to-end mining over a dynamic dataset series.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::clique::maximal_cliques;
use crate::error::{Error, Result};
use crate::model::{FeatureClique, MiningConfig, Pattern, Spans};
use crate::neighborhood::neighbor_pairs;
use crate::oracle::join_based_mine;
use crate::scalar::Scalar;
use crate::size2::{
    build_feature_graph, dpi, prevalent_size2, size2_table_instances, FeatureCounts, TableInstance,
};
use crate::snapshot::DynamicDatasetSeries;
use crate::verify::{derive_all_prevalent, verify_all_traced, PatternResult, Pruning, VerifyStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Clique enumeration plus top-down verification.
    #[default]
    Mdc,
    /// Level-wise join baseline.
    Join,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Mdc => "mdc",
            Algorithm::Join => "join",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mdc" => Ok(Algorithm::Mdc),
            "join" => Ok(Algorithm::Join),
            _ => Err(Error::config(format!("unknown algorithm `{s}` (mdc|join)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MineOptions {
    pub algorithm: Algorithm,
    pub pruning: Pruning,
    /// Report every prevalent pattern instead of the maximal ones only.
    pub derive_all: bool,
}

/// Wall-clock time of each stage. Stages an algorithm skips stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub neighbors: Duration,
    pub size2: Duration,
    pub cliques: Duration,
    pub verify: Duration,
    pub join: Duration,
    pub derive: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.neighbors + self.size2 + self.cliques + self.verify + self.join + self.derive
    }

    pub fn entries(&self) -> [(&'static str, Duration); 6] {
        [
            ("neighbors", self.neighbors),
            ("size2", self.size2),
            ("cliques", self.cliques),
            ("verify", self.verify),
            ("join", self.join),
            ("derive", self.derive),
        ]
    }
}

#[derive(Debug, Clone, Default)]
pub struct MineReport {
    /// Reported patterns in canonical order: maximal ones, or every
    /// prevalent one with `derive_all`.
    pub patterns: Vec<PatternResult>,
    pub neighbor_pairs: usize,
    pub size2_prevalent: usize,
    pub cliques: Vec<FeatureClique>,
    pub stats: VerifyStats,
    pub ratios: BTreeMap<Pattern, Vec<f64>>,
    pub timings: StageTimings,
}

impl MineReport {
    pub fn maximal_count(&self) -> usize {
        self.patterns.iter().filter(|p| p.maximal).count()
    }

    /// Reported patterns per size.
    pub fn counts_by_size(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for p in &self.patterns {
            *m.entry(p.pattern.len()).or_insert(0) += 1;
        }
        m
    }
}

fn timed<R>(slot: &mut Duration, f: impl FnOnce() -> R) -> R {
    let start = Instant::now();
    let r = f();
    *slot += start.elapsed();
    r
}

/// Neighbor pair count and prevalent size-2 tables, for the size-2 report.
pub fn size2_stage<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    spans: &Spans,
    config: &MiningConfig<T>,
) -> Result<(usize, BTreeMap<Pattern, TableInstance>)> {
    let pairs = neighbor_pairs(series, spans, config)?;
    let counts = FeatureCounts::from_series(series);
    Ok((
        pairs.len(),
        prevalent_size2(size2_table_instances(series, &pairs), &counts, config),
    ))
}

pub fn mine<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    spans: &Spans,
    config: &MiningConfig<T>,
    options: MineOptions,
) -> Result<MineReport> {
    config.validate()?;
    let counts = FeatureCounts::from_series(series);
    let mut report = MineReport::default();
    let mut t = StageTimings::default();

    match options.algorithm {
        Algorithm::Join => {
            let all = timed(&mut t.join, || join_based_mine(series, spans, &counts, config))?;
            report.size2_prevalent = all.iter().filter(|r| r.pattern.len() == 2).count();
            report.patterns = if options.derive_all {
                all
            } else {
                all.into_iter().filter(|r| r.maximal).collect()
            };
        }
        Algorithm::Mdc => {
            let pairs = timed(&mut t.neighbors, || neighbor_pairs(series, spans, config))?;
            report.neighbor_pairs = pairs.len();
            let graph = timed(&mut t.size2, || {
                let tables = size2_table_instances(series, &pairs);
                build_feature_graph(prevalent_size2(tables, &counts, config))
            });
            drop(pairs);
            report.size2_prevalent = graph.edge_count();
            report.cliques = timed(&mut t.cliques, || maximal_cliques(&graph));
            let size2 = graph.into_tables();
            let outcome = timed(&mut t.verify, || {
                verify_all_traced(&report.cliques, &size2, &counts, config, options.pruning)
            })?;
            report.stats = outcome.stats;
            report.ratios = outcome.ratios;
            report.patterns = if options.derive_all {
                let maximal: Vec<Pattern> =
                    outcome.maximal.iter().map(|r| r.pattern.clone()).collect();
                timed(&mut t.derive, || {
                    derive_all_prevalent(&maximal, &size2, &counts, config)
                })?
            } else {
                outcome.maximal
            };
        }
    }
    report.timings = t;
    Ok(report)
}

/// DPI of every size-2 table, for the optional size-2 report.
pub fn size2_dpis<'a>(
    tables: &'a BTreeMap<Pattern, TableInstance>,
    counts: &FeatureCounts,
) -> Vec<(&'a TableInstance, f64)> {
    tables.values().map(|t| (t, dpi(t, counts))).collect()
}

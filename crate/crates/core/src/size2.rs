//! Size-2 table instances, participation measures and the feature graph.

use std::collections::BTreeMap;

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::model::{FeatureId, InstanceId, MiningConfig, Pattern};
use crate::neighborhood::NeighborPair;
use crate::scalar::Scalar;
use crate::snapshot::DynamicDatasetSeries;

/// One instance per pattern feature, in the pattern's feature order.
pub type Row = SmallVec<[InstanceId; 8]>;

/// All row instances of a pattern, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableInstance {
    pub pattern: Pattern,
    pub rows: Vec<Row>,
}

impl TableInstance {
    pub fn empty(pattern: Pattern) -> Self {
        Self {
            pattern,
            rows: Vec::new(),
        }
    }

    /// Sorts and deduplicates rows.
    pub fn from_rows(pattern: Pattern, mut rows: Vec<Row>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Self { pattern, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of distinct instances of each pattern feature, in pattern order.
    pub fn distinct_per_feature(&self) -> Vec<u32> {
        (0..self.pattern.len())
            .map(|col| {
                let mut ids: Vec<InstanceId> = self.rows.iter().map(|r| r[col]).collect();
                ids.sort_unstable();
                ids.dedup();
                ids.len() as u32
            })
            .collect()
    }

    /// Does the table hold this exact pair row? Only meaningful for size-2
    /// tables, whose rows are `(lower feature, higher feature)`.
    pub fn contains_pair(&self, a: InstanceId, b: InstanceId) -> bool {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.rows
            .binary_search_by(|r| (r[0], r[1]).cmp(&(lo, hi)))
            .is_ok()
    }
}

/// Total number of dynamic instances of each feature over all windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCounts(Vec<u32>);

impl FeatureCounts {
    pub fn from_series<T: Scalar>(series: &DynamicDatasetSeries<T>) -> Self {
        Self(series.feature_totals())
    }

    pub fn from_vec(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    #[inline]
    pub fn get(&self, f: FeatureId) -> u32 {
        self.0.get(f.index()).copied().unwrap_or(0)
    }
}

#[inline]
pub(crate) fn ratio(part: u32, total: u32) -> f64 {
    if total == 0 {
        0.0
    } else {
        part as f64 / total as f64
    }
}

/// Groups neighbor pairs into one table instance per feature pair.
pub fn size2_table_instances<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    pairs: &[NeighborPair],
) -> BTreeMap<Pattern, TableInstance> {
    let mut tables: BTreeMap<Pattern, Vec<Row>> = BTreeMap::new();
    for p in pairs {
        let (fa, fb) = (series.feature_of(p.a), series.feature_of(p.b));
        let pattern = Pattern::pair(fa, fb);
        let row: Row = if fa < fb {
            smallvec::smallvec![p.a, p.b]
        } else {
            smallvec::smallvec![p.b, p.a]
        };
        tables.entry(pattern).or_default().push(row);
    }
    tables
        .into_iter()
        .map(|(pattern, rows)| (pattern.clone(), TableInstance::from_rows(pattern, rows)))
        .collect()
}

/// Participation ratio of `feature` in `table`.
///
/// Each instance counts once however many rows it joins. A feature with no
/// instances at all has ratio 0.
pub fn dpr(table: &TableInstance, feature: FeatureId, counts: &FeatureCounts) -> Result<f64> {
    let col = table.pattern.position(feature).ok_or_else(|| {
        Error::Contract(format!("feature {} is not part of the pattern", feature.0))
    })?;
    let mut ids: Vec<InstanceId> = table.rows.iter().map(|r| r[col]).collect();
    ids.sort_unstable();
    ids.dedup();
    Ok(ratio(ids.len() as u32, counts.get(feature)))
}

/// Participation ratios of every pattern feature, in pattern order.
pub fn participation_ratios(table: &TableInstance, counts: &FeatureCounts) -> Vec<f64> {
    table
        .distinct_per_feature()
        .into_iter()
        .zip(table.pattern.iter())
        .map(|(n, f)| ratio(n, counts.get(f)))
        .collect()
}

/// Participation index: the smallest participation ratio.
pub fn dpi(table: &TableInstance, counts: &FeatureCounts) -> f64 {
    participation_ratios(table, counts)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}

/// Keeps the size-2 tables whose participation index passes `min_prev`.
pub fn prevalent_size2<T: Scalar>(
    tables: BTreeMap<Pattern, TableInstance>,
    counts: &FeatureCounts,
    config: &MiningConfig<T>,
) -> BTreeMap<Pattern, TableInstance> {
    let entries: Vec<(Pattern, TableInstance)> = tables.into_iter().collect();
    entries
        .into_par_iter()
        .filter(|(_, table)| config.is_prevalent(dpi(table, counts)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Undirected graph over dynamic features whose edges are the prevalent
/// size-2 patterns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureGraph {
    adjacency: BTreeMap<FeatureId, Vec<FeatureId>>,
    tables: BTreeMap<Pattern, TableInstance>,
}

impl FeatureGraph {
    /// A graph without table payloads, for topology-only work.
    pub fn from_edges(edges: impl IntoIterator<Item = (FeatureId, FeatureId)>) -> Self {
        let mut adjacency: BTreeMap<FeatureId, Vec<FeatureId>> = BTreeMap::new();
        for (a, b) in edges {
            if a == b {
                continue;
            }
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
        for n in adjacency.values_mut() {
            n.sort_unstable();
            n.dedup();
        }
        Self {
            adjacency,
            tables: BTreeMap::new(),
        }
    }

    /// Adds an isolated vertex (no-op if present).
    pub fn add_vertex(&mut self, f: FeatureId) {
        self.adjacency.entry(f).or_default();
    }

    pub fn vertices(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, f: FeatureId) -> &[FeatureId] {
        self.adjacency.get(&f).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn degree(&self, f: FeatureId) -> usize {
        self.neighbors(f).len()
    }

    pub fn has_edge(&self, a: FeatureId, b: FeatureId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Edges as size-2 patterns, in canonical order.
    pub fn edges(&self) -> Vec<Pattern> {
        let mut out = Vec::new();
        for (&a, ns) in &self.adjacency {
            out.extend(ns.iter().filter(|&&b| a < b).map(|&b| Pattern::pair(a, b)));
        }
        out
    }

    pub fn table(&self, edge: &Pattern) -> Option<&TableInstance> {
        self.tables.get(edge)
    }

    /// Edge payloads; empty for graphs built with [`FeatureGraph::from_edges`].
    pub fn tables(&self) -> &BTreeMap<Pattern, TableInstance> {
        &self.tables
    }

    pub fn into_tables(self) -> BTreeMap<Pattern, TableInstance> {
        self.tables
    }
}

/// One edge per prevalent size-2 pattern, carrying its table instance.
pub fn build_feature_graph(prevalent: BTreeMap<Pattern, TableInstance>) -> FeatureGraph {
    let mut graph = FeatureGraph::from_edges(prevalent.keys().map(|p| {
        assert_eq!(p.len(), 2, "feature graph edges must be size-2 patterns");
        (p.features()[0], p.features()[1])
    }));
    graph.tables = prevalent;
    graph
}

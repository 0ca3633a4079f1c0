//! Reference implementations used to check the miner.
//!
//! None of these share code with the path they check, except that the
//! join-based baseline reuses neighbor search and size-2 tables so that
//! timing comparisons isolate the pattern-growth strategy.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::model::{FeatureClique, FeatureId, InstanceId, MiningConfig, Pattern, Spans};
use crate::neighborhood::{neighbor_pairs, NeighborPair};
use crate::scalar::{dist_sq, Scalar};
use crate::size2::{
    dpi, prevalent_size2, size2_table_instances, FeatureCounts, FeatureGraph, Row, TableInstance,
};
use crate::snapshot::DynamicDatasetSeries;
use crate::verify::PatternResult;

/// Size limits for the exponential oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Base features; each may contribute a new and a dead feature.
    pub max_features: usize,
    pub max_instances: usize,
    pub max_windows: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_features: 8,
            max_instances: 200,
            max_windows: 6,
        }
    }
}

impl OracleConfig {
    pub fn check<T: Scalar>(&self, series: &DynamicDatasetSeries<T>) -> Result<()> {
        let bases = series.universe().base_ids().len();
        if bases > self.max_features {
            return Err(Error::OracleCap(format!(
                "{bases} base features exceed the limit of {}",
                self.max_features
            )));
        }
        if series.len() > self.max_instances {
            return Err(Error::OracleCap(format!(
                "{} instances exceed the limit of {}",
                series.len(),
                self.max_instances
            )));
        }
        if series.n_windows() > self.max_windows {
            return Err(Error::OracleCap(format!(
                "{} windows exceed the limit of {}",
                series.n_windows(),
                self.max_windows
            )));
        }
        Ok(())
    }
}

/// Direct neighbor test for two instances.
fn related<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    spans: &Spans,
    config: &MiningConfig<T>,
    a: InstanceId,
    b: InstanceId,
) -> bool {
    let (ia, ib) = (series.get(a), series.get(b));
    if ia.feature == ib.feature {
        return false;
    }
    let limit = spans
        .get(ia.feature)
        .unwrap_or(0)
        .max(spans.get(ib.feature).unwrap_or(0));
    let dt = ia.t_index.abs_diff(ib.t_index);
    config.temporal.within(dt, limit)
        && dist_sq(ia.position(), ib.position()) <= config.d_d * config.d_d
}

/// Quadratic scan over all instance pairs.
pub fn all_pairs_neighbors<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    spans: &Spans,
    config: &MiningConfig<T>,
) -> Result<Vec<NeighborPair>> {
    config.validate()?;
    if spans.len() < series.universe().len() {
        return Err(Error::config("spans do not cover every dynamic feature"));
    }
    let ids: Vec<InstanceId> = series.ids().collect();
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if related(series, spans, config, a, b) {
                out.push(NeighborPair::new(a, b));
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Textbook Bron–Kerbosch with Tomita pivoting. Size-1 cliques are dropped.
pub fn bron_kerbosch(graph: &FeatureGraph) -> Vec<FeatureClique> {
    fn recurse(
        graph: &FeatureGraph,
        r: &mut Vec<FeatureId>,
        mut p: BTreeSet<FeatureId>,
        mut x: BTreeSet<FeatureId>,
        out: &mut Vec<FeatureClique>,
    ) {
        if p.is_empty() {
            if x.is_empty() && r.len() >= 2 {
                out.push(Pattern::new(r.iter().copied()).expect("distinct vertices"));
            }
            return;
        }
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| graph.neighbors(u).iter().filter(|v| p.contains(v)).count())
            .expect("p is non-empty");
        let candidates: Vec<FeatureId> = p
            .iter()
            .copied()
            .filter(|&v| !graph.has_edge(pivot, v))
            .collect();
        for v in candidates {
            let nv: BTreeSet<FeatureId> = graph.neighbors(v).iter().copied().collect();
            r.push(v);
            recurse(
                graph,
                r,
                p.intersection(&nv).copied().collect(),
                x.intersection(&nv).copied().collect(),
                out,
            );
            r.pop();
            p.remove(&v);
            x.insert(v);
        }
    }

    let mut out = Vec::new();
    recurse(
        graph,
        &mut Vec::new(),
        graph.vertices().collect(),
        BTreeSet::new(),
        &mut out,
    );
    out.sort();
    out
}

/// Exhaustively enumerates every feature subset, builds its table instance by
/// trying all instance combinations, and reports each prevalent pattern with
/// its maximality.
pub fn brute_force_prevalent<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    spans: &Spans,
    counts: &FeatureCounts,
    config: &MiningConfig<T>,
    caps: &OracleConfig,
) -> Result<Vec<PatternResult>> {
    config.validate()?;
    caps.check(series)?;
    let n_features = series.universe().len();
    if n_features > 2 * caps.max_features || n_features >= 32 {
        return Err(Error::OracleCap(format!(
            "{n_features} dynamic features exceed the limit"
        )));
    }
    if spans.len() < n_features {
        return Err(Error::config("spans do not cover every dynamic feature"));
    }
    let n = series.len();
    let mut adj = vec![false; n * n];
    for a in series.ids() {
        for b in series.ids() {
            if a < b && related(series, spans, config, a, b) {
                adj[a.index() * n + b.index()] = true;
                adj[b.index() * n + a.index()] = true;
            }
        }
    }
    let mut by_feature: Vec<Vec<InstanceId>> = vec![Vec::new(); n_features];
    for id in series.ids() {
        by_feature[series.feature_of(id).index()].push(id);
    }

    fn search(
        feats: &[usize],
        by_feature: &[Vec<InstanceId>],
        adj: &[bool],
        n: usize,
        chosen: &mut Vec<InstanceId>,
        seen: &mut [HashSet<InstanceId>],
        rows: &mut usize,
    ) {
        let j = chosen.len();
        if j == feats.len() {
            *rows += 1;
            for (col, &id) in chosen.iter().enumerate() {
                seen[col].insert(id);
            }
            return;
        }
        for &cand in &by_feature[feats[j]] {
            if chosen.iter().all(|&c| adj[c.index() * n + cand.index()]) {
                chosen.push(cand);
                search(feats, by_feature, adj, n, chosen, seen, rows);
                chosen.pop();
            }
        }
    }

    let mut prevalent: Vec<(u32, PatternResult)> = Vec::new();
    for mask in 1u32..(1u32 << n_features) {
        if mask.count_ones() < 2 {
            continue;
        }
        let feats: Vec<usize> = (0..n_features).filter(|i| mask >> i & 1 == 1).collect();
        let mut seen = vec![HashSet::new(); feats.len()];
        let mut rows = 0usize;
        search(&feats, &by_feature, &adj, n, &mut Vec::new(), &mut seen, &mut rows);
        let index = feats
            .iter()
            .zip(&seen)
            .map(|(&f, s)| {
                let total = counts.get(FeatureId(f as u32));
                if total == 0 {
                    0.0
                } else {
                    s.len() as f64 / total as f64
                }
            })
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        if config.is_prevalent(index) {
            prevalent.push((
                mask,
                PatternResult {
                    pattern: Pattern::new(feats.iter().map(|&f| FeatureId(f as u32)))?,
                    dpi: index,
                    row_count: rows,
                    maximal: false,
                },
            ));
        }
    }
    let masks: Vec<u32> = prevalent.iter().map(|(m, _)| *m).collect();
    for (mask, r) in prevalent.iter_mut() {
        r.maximal = !masks.iter().any(|&m| m != *mask && m & *mask == *mask);
    }
    let mut out: Vec<PatternResult> = prevalent.into_iter().map(|(_, r)| r).collect();
    out.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    Ok(out)
}

/// Prevalent patterns with no prevalent strict superset, by exhaustive search.
pub fn brute_force_maximal<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    spans: &Spans,
    counts: &FeatureCounts,
    config: &MiningConfig<T>,
    caps: &OracleConfig,
) -> Result<Vec<PatternResult>> {
    Ok(brute_force_prevalent(series, spans, counts, config, caps)?
        .into_iter()
        .filter(|r| r.maximal)
        .collect())
}

/// Level-wise join-based mining of every prevalent pattern.
///
/// Size-k candidates join two prevalent size-(k-1) patterns sharing their
/// first k-2 features; candidates with a non-prevalent (k-1)-subset are
/// dropped; rows join parent rows that agree on the shared prefix and whose
/// two last instances are neighbors.
pub fn join_based_mine<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    spans: &Spans,
    counts: &FeatureCounts,
    config: &MiningConfig<T>,
) -> Result<Vec<PatternResult>> {
    let pairs = neighbor_pairs(series, spans, config)?;
    let related: FxHashSet<(InstanceId, InstanceId)> = pairs.iter().map(|p| (p.a, p.b)).collect();
    let is_related = |x: InstanceId, y: InstanceId| {
        if x < y {
            related.contains(&(x, y))
        } else {
            related.contains(&(y, x))
        }
    };

    let mut level: BTreeMap<Pattern, TableInstance> =
        prevalent_size2(size2_table_instances(series, &pairs), counts, config);
    let mut levels: Vec<Vec<PatternResult>> = Vec::new();

    while !level.is_empty() {
        levels.push(
            level
                .values()
                .map(|t| PatternResult {
                    pattern: t.pattern.clone(),
                    dpi: dpi(t, counts),
                    row_count: t.len(),
                    maximal: false,
                })
                .collect(),
        );

        let mut next = BTreeMap::new();
        let patterns: Vec<&Pattern> = level.keys().collect();
        let k = patterns[0].len() + 1;
        // Patterns are sorted, so those sharing a prefix are contiguous.
        let mut start = 0;
        while start < patterns.len() {
            let prefix = &patterns[start].features()[..k - 2];
            let mut end = start + 1;
            while end < patterns.len() && &patterns[end].features()[..k - 2] == prefix {
                end += 1;
            }
            for i in start..end {
                for j in i + 1..end {
                    let (p1, p2) = (patterns[i], patterns[j]);
                    let last2 = *p2.features().last().expect("non-empty");
                    let cand = Pattern::new(p1.iter().chain(std::iter::once(last2)))?;
                    if cand.len() >= 3
                        && !cand.maximal_subpatterns().iter().all(|s| level.contains_key(s))
                    {
                        continue;
                    }
                    let table = join_tables(&cand, &level[p1], &level[p2], &is_related);
                    if config.is_prevalent(dpi(&table, counts)) {
                        next.insert(cand, table);
                    }
                }
            }
            start = end;
        }
        level = next;
    }

    let mut out = Vec::new();
    for (i, lv) in levels.iter().enumerate() {
        let above = levels.get(i + 1);
        for r in lv {
            let mut r = r.clone();
            r.maximal = above.is_none_or(|up| !up.iter().any(|u| r.pattern.is_subset_of(&u.pattern)));
            out.push(r);
        }
    }
    out.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    Ok(out)
}

fn join_tables(
    cand: &Pattern,
    t1: &TableInstance,
    t2: &TableInstance,
    is_related: &dyn Fn(InstanceId, InstanceId) -> bool,
) -> TableInstance {
    let k1 = t1.pattern.len();
    let mut by_prefix: FxHashMap<&[InstanceId], Vec<InstanceId>> = FxHashMap::default();
    for r in &t2.rows {
        by_prefix.entry(&r[..k1 - 1]).or_default().push(r[k1 - 1]);
    }
    let mut rows = Vec::new();
    for r in &t1.rows {
        if let Some(lasts) = by_prefix.get(&r[..k1 - 1]) {
            for &b in lasts {
                if is_related(r[k1 - 1], b) {
                    let mut row: Row = r.clone();
                    row.push(b);
                    rows.push(row);
                }
            }
        }
    }
    TableInstance::from_rows(cand.clone(), rows)
}

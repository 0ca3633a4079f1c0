//! Verifying candidate cliques against instance data.
//!
//! Each candidate clique's table instance is assembled from the size-2
//! tables: the instances of an anchor feature shared by all of its pair
//! tables seed candidate rows, which are then filtered by the remaining
//! feature pairs. Prevalent candidates are accepted as maximal patterns;
//! failed ones are split into their size-(k-1) sub-cliques. Candidates are
//! processed level by level, largest first, so every superset is judged
//! before its subsets.
//!
//! Two optional prunings never change the result:
//!
//! * early abort: row construction stops once some feature's participation
//!   ratio provably cannot reach `min_prev`;
//! * shared sub-pattern: when candidates of a level overlap in three or more
//!   features, the overlap is verified first and, if it fails, all of its
//!   supersets fail without being built.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::bits::BitSet;
use crate::error::{Error, Result};
use crate::model::{FeatureClique, FeatureId, InstanceId, MiningConfig, Pattern};
use crate::scalar::Scalar;
use crate::size2::{participation_ratios, ratio, FeatureCounts, Row, TableInstance};

/// Which pruning strategies are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pruning {
    pub early_abort: bool,
    pub shared_subpattern: bool,
}

impl Pruning {
    pub const ALL: Pruning = Pruning {
        early_abort: true,
        shared_subpattern: true,
    };
    pub const NONE: Pruning = Pruning {
        early_abort: false,
        shared_subpattern: false,
    };

    /// All four flag combinations.
    pub fn combinations() -> [Pruning; 4] {
        [
            Pruning::NONE,
            Pruning {
                early_abort: true,
                shared_subpattern: false,
            },
            Pruning {
                early_abort: false,
                shared_subpattern: true,
            },
            Pruning::ALL,
        ]
    }
}

impl Default for Pruning {
    fn default() -> Self {
        Pruning::ALL
    }
}

/// A mined pattern with its participation index.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternResult {
    pub pattern: Pattern,
    pub dpi: f64,
    pub row_count: usize,
    pub maximal: bool,
}

/// Outcome of the early-abort test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortDecision {
    Continue,
    Abort,
}

/// Can every pattern feature still reach `min_prev`?
///
/// `tallies[i]` is the number of distinct instances of the `i`-th pattern
/// feature already seen in accepted rows and `remaining[i]` an upper bound on
/// how many more can still appear. Aborts only when some feature's best case
/// `(tally + remaining) / total` cannot pass the threshold.
pub fn early_abort_check<T: Scalar>(
    pattern: &Pattern,
    tallies: &[u32],
    remaining: &[u32],
    counts: &FeatureCounts,
    config: &MiningConfig<T>,
) -> AbortDecision {
    debug_assert_eq!(tallies.len(), pattern.len());
    debug_assert_eq!(remaining.len(), pattern.len());
    let hopeless = pattern.iter().enumerate().any(|(i, f)| {
        !config.is_prevalent(ratio(tallies[i] + remaining[i], counts.get(f)))
    });
    if hopeless {
        AbortDecision::Abort
    } else {
        AbortDecision::Continue
    }
}

/// Size-2 tables addressed by feature pair, each with a copy of its rows
/// flipped and sorted by the second feature's instance.
struct PairIndex<'a> {
    n: usize,
    slots: Vec<Option<u32>>,
    tables: Vec<(&'a TableInstance, Vec<(InstanceId, InstanceId)>)>,
}

impl<'a> PairIndex<'a> {
    fn new(tables: impl IntoIterator<Item = &'a TableInstance>) -> Self {
        let tables: Vec<&TableInstance> = tables.into_iter().collect();
        let n = tables
            .iter()
            .flat_map(|t| t.pattern.iter())
            .map(|f| f.index() + 1)
            .max()
            .unwrap_or(0);
        let mut slots = vec![None; n * n];
        let mut indexed = Vec::with_capacity(tables.len());
        for t in tables {
            let f = t.pattern.features();
            if f.len() != 2 {
                continue;
            }
            slots[f[0].index() * n + f[1].index()] = Some(indexed.len() as u32);
            let mut flipped: Vec<_> = t.rows.iter().map(|r| (r[1], r[0])).collect();
            flipped.sort_unstable();
            indexed.push((t, flipped));
        }
        Self {
            n,
            slots,
            tables: indexed,
        }
    }

    /// Only the pair tables of `clique`.
    fn for_clique(clique: &FeatureClique, size2: &'a BTreeMap<Pattern, TableInstance>) -> Result<Self> {
        let f = clique.features();
        let mut tables = Vec::new();
        for (i, &a) in f.iter().enumerate() {
            for &b in &f[i + 1..] {
                tables.push(size2.get(&Pattern::pair(a, b)).ok_or_else(|| missing(a, b))?);
            }
        }
        Ok(Self::new(tables))
    }

    fn slot(&self, a: FeatureId, b: FeatureId) -> Result<usize> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let idx = (hi.index() < self.n)
            .then(|| self.slots[lo.index() * self.n + hi.index()])
            .flatten();
        idx.map(|i| i as usize).ok_or_else(|| missing(lo, hi))
    }

    fn table(&self, a: FeatureId, b: FeatureId) -> Result<&'a TableInstance> {
        Ok(self.tables[self.slot(a, b)?].0)
    }

    /// Pairs of `{anchor, other}` grouped by the anchor's instance.
    fn side(&self, anchor: FeatureId, other: FeatureId) -> Result<Side<'_>> {
        let (table, flipped) = &self.tables[self.slot(anchor, other)?];
        Ok(if anchor < other {
            Side::Forward(&table.rows)
        } else {
            Side::Reverse(flipped)
        })
    }
}

fn missing(a: FeatureId, b: FeatureId) -> Error {
    Error::Contract(format!("no size-2 table for features {} and {}", a.0, b.0))
}

/// Context needed to apply early abort while building rows.
struct AbortCtx<'a, T> {
    counts: &'a FeatureCounts,
    config: &'a MiningConfig<T>,
}

/// Pairs of one size-2 table viewed from the anchor feature, grouped by
/// anchor instance.
enum Side<'a> {
    /// The anchor is the table's first column, so rows are already grouped.
    Forward(&'a [Row]),
    /// `(anchor instance, partner)` sorted.
    Reverse(&'a [(InstanceId, InstanceId)]),
}

impl Side<'_> {
    fn len(&self) -> usize {
        match self {
            Side::Forward(r) => r.len(),
            Side::Reverse(v) => v.len(),
        }
    }

    fn anchor_at(&self, i: usize) -> InstanceId {
        match self {
            Side::Forward(r) => r[i][0],
            Side::Reverse(v) => v[i].0,
        }
    }

    fn partner_at(&self, i: usize) -> InstanceId {
        match self {
            Side::Forward(r) => r[i][1],
            Side::Reverse(v) => v[i].1,
        }
    }

    fn partners(&self, range: std::ops::Range<usize>, out: &mut Vec<InstanceId>) {
        out.clear();
        out.extend(range.map(|i| self.partner_at(i)));
    }
}

/// Anchor instances present on every side, with each side's index range per
/// common instance. Sides are sorted by anchor, so one forward sweep per side
/// suffices.
fn common_anchors(sides: &[Side]) -> (Vec<InstanceId>, Vec<Vec<std::ops::Range<usize>>>) {
    let smallest = (0..sides.len())
        .min_by_key(|&j| sides[j].len())
        .expect("at least one side");
    let mut cursors = vec![0usize; sides.len()];
    let mut common = Vec::new();
    let mut ranges = vec![Vec::new(); sides.len()];
    let mut found = vec![0..0; sides.len()];
    let mut i = 0;
    'anchors: while i < sides[smallest].len() {
        let c = sides[smallest].anchor_at(i);
        for (j, side) in sides.iter().enumerate() {
            let cur = &mut cursors[j];
            while *cur < side.len() && side.anchor_at(*cur) < c {
                *cur += 1;
            }
            let lo = *cur;
            while *cur < side.len() && side.anchor_at(*cur) == c {
                *cur += 1;
            }
            if lo == *cur {
                if *cur == side.len() {
                    break 'anchors;
                }
                i = cursors[smallest].max(i + 1);
                continue 'anchors;
            }
            found[j] = lo..*cur;
        }
        common.push(c);
        for (r, f) in ranges.iter_mut().zip(&found) {
            r.push(f.clone());
        }
        i = cursors[smallest];
    }
    (common, ranges)
}

/// Builds the candidate rows anchored on the feature at `anchor_pos`.
/// Returns `None` when the early-abort test fires.
fn build_rows<T: Scalar>(
    clique: &FeatureClique,
    anchor_pos: usize,
    index: &PairIndex<'_>,
    abort: Option<&AbortCtx<'_, T>>,
) -> Result<Option<TableInstance>> {
    let k = clique.len();
    if k == 2 {
        let f = clique.features();
        return Ok(Some(index.table(f[0], f[1])?.clone()));
    }
    let anchor = clique.features()[anchor_pos];
    let others: Vec<(usize, FeatureId)> = clique
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != anchor_pos)
        .collect();

    let sides: Vec<Side> = others
        .iter()
        .map(|&(_, g)| index.side(anchor, g))
        .collect::<Result<_>>()?;

    let (common, ranges) = common_anchors(&sides);

    // Remaining pair tables, indexed by (j, l) positions in `others`.
    let mut checks: Vec<Vec<Option<&TableInstance>>> = vec![vec![None; others.len()]; others.len()];
    for j in 0..others.len() {
        for l in 0..j {
            checks[j][l] = Some(index.table(others[l].1, others[j].1)?);
        }
    }

    let mut tracker = abort.map(|ctx| AbortTracker::new(clique, anchor_pos, &others, &sides, &ranges, common.len(), ctx));
    if let Some(t) = tracker.as_ref() {
        if t.decide() == AbortDecision::Abort {
            return Ok(None);
        }
    }

    let mut rows: Vec<Row> = Vec::new();
    let mut chosen: Vec<InstanceId> = Vec::with_capacity(others.len());
    let mut lists: Vec<Vec<InstanceId>> = vec![Vec::new(); others.len()];
    for (q, &c) in common.iter().enumerate() {
        for ((side, r), list) in sides.iter().zip(&ranges).zip(lists.iter_mut()) {
            side.partners(r[q].clone(), list);
        }
        let before = rows.len();
        extend_rows(&lists, &checks, &mut chosen, &mut |picked| {
            let mut row: Row = Row::with_capacity(k);
            let mut it = picked.iter();
            for i in 0..k {
                if i == anchor_pos {
                    row.push(c);
                } else {
                    row.push(*it.next().expect("one pick per other feature"));
                }
            }
            rows.push(row);
        });
        if let Some(t) = tracker.as_mut() {
            t.absorb(&rows[before..]);
            t.finish_position(q as u32);
            if t.decide() == AbortDecision::Abort {
                return Ok(None);
            }
        }
    }
    Ok(Some(TableInstance::from_rows(clique.clone(), rows)))
}

/// Depth-first cross product of partner lists, keeping only picks that are
/// pairwise related through their size-2 tables.
fn extend_rows(
    lists: &[Vec<InstanceId>],
    checks: &[Vec<Option<&TableInstance>>],
    chosen: &mut Vec<InstanceId>,
    emit: &mut dyn FnMut(&[InstanceId]),
) {
    let j = chosen.len();
    if j == lists.len() {
        emit(chosen);
        return;
    }
    for &cand in &lists[j] {
        let ok = (0..j).all(|l| {
            checks[j][l]
                .expect("check table for every earlier position")
                .contains_pair(chosen[l], cand)
        });
        if ok {
            chosen.push(cand);
            extend_rows(lists, checks, chosen, emit);
            chosen.pop();
        }
    }
}

/// Partner instances of one non-anchor column that can still join a row.
struct Column {
    col: usize,
    /// Sorted distinct partners over all common anchor instances.
    partners: Vec<InstanceId>,
    seen: Vec<bool>,
    /// Local partner indices ordered by the last anchor position that can
    /// still produce them.
    by_last: Vec<(u32, u32)>,
    next_expiry: usize,
}

/// Running upper bounds on participation while rows are being built.
struct AbortTracker<'a, T> {
    pattern: FeatureClique,
    ctx: &'a AbortCtx<'a, T>,
    anchor_pos: usize,
    /// Per pattern column.
    tallies: Vec<u32>,
    alive: Vec<u32>,
    columns: Vec<Column>,
    common_left: u32,
}

impl<'a, T: Scalar> AbortTracker<'a, T> {
    fn new(
        clique: &FeatureClique,
        anchor_pos: usize,
        others: &[(usize, FeatureId)],
        sides: &[Side],
        ranges: &[Vec<std::ops::Range<usize>>],
        n_common: usize,
        ctx: &'a AbortCtx<'a, T>,
    ) -> Self {
        let k = clique.len();
        let mut alive = vec![0u32; k];
        let mut columns = Vec::with_capacity(others.len());
        for ((&(col, _), side), side_ranges) in others.iter().zip(sides).zip(ranges) {
            let mut last: Vec<(InstanceId, u32)> = Vec::new();
            for (q, r) in side_ranges.iter().enumerate() {
                last.extend(r.clone().map(|i| (side.partner_at(i), q as u32)));
            }
            // keep the largest position per partner
            last.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            last.dedup_by_key(|e| e.0);
            alive[col] = last.len() as u32;
            let mut by_last: Vec<(u32, u32)> = last
                .iter()
                .enumerate()
                .map(|(i, &(_, q))| (q, i as u32))
                .collect();
            by_last.sort_unstable();
            columns.push(Column {
                col,
                partners: last.iter().map(|e| e.0).collect(),
                seen: vec![false; last.len()],
                by_last,
                next_expiry: 0,
            });
        }
        Self {
            pattern: clique.clone(),
            ctx,
            anchor_pos,
            tallies: vec![0; k],
            alive,
            columns,
            common_left: n_common as u32,
        }
    }

    fn absorb(&mut self, new_rows: &[Row]) {
        if !new_rows.is_empty() {
            // each anchor instance is processed once
            self.tallies[self.anchor_pos] += 1;
        }
        for row in new_rows {
            for c in &mut self.columns {
                let i = c
                    .partners
                    .binary_search(&row[c.col])
                    .expect("row partners come from the pair tables");
                if !c.seen[i] {
                    c.seen[i] = true;
                    self.tallies[c.col] += 1;
                    self.alive[c.col] -= 1;
                }
            }
        }
    }

    fn finish_position(&mut self, q: u32) {
        self.common_left -= 1;
        for c in &mut self.columns {
            while let Some(&(last, i)) = c.by_last.get(c.next_expiry) {
                if last > q {
                    break;
                }
                if !c.seen[i as usize] {
                    self.alive[c.col] -= 1;
                }
                c.next_expiry += 1;
            }
        }
    }

    fn decide(&self) -> AbortDecision {
        let mut remaining = self.alive.clone();
        remaining[self.anchor_pos] = self.common_left;
        early_abort_check(&self.pattern, &self.tallies, &remaining, self.ctx.counts, self.ctx.config)
    }
}

/// Table instance of a candidate clique, anchored on its first feature.
pub fn candidate_table_instance(
    clique: &FeatureClique,
    size2: &BTreeMap<Pattern, TableInstance>,
) -> Result<TableInstance> {
    candidate_table_instance_anchored(clique, clique.features()[0], size2)
}

/// As [`candidate_table_instance`] with an explicit anchor feature. The
/// result does not depend on the anchor.
pub fn candidate_table_instance_anchored(
    clique: &FeatureClique,
    anchor: FeatureId,
    size2: &BTreeMap<Pattern, TableInstance>,
) -> Result<TableInstance> {
    let pos = clique
        .position(anchor)
        .ok_or_else(|| Error::Contract("anchor is not a clique feature".into()))?;
    let index = PairIndex::for_clique(clique, size2)?;
    Ok(build_rows::<f64>(clique, pos, &index, None)?.expect("no abort without a context"))
}

/// Patterns accepted so far, with fast subset tests.
#[derive(Debug, Clone)]
pub struct AcceptedSet {
    n_features: usize,
    patterns: Vec<(Pattern, BitSet)>,
}

impl AcceptedSet {
    pub fn new(n_features: usize) -> Self {
        Self {
            n_features,
            patterns: Vec::new(),
        }
    }

    fn bits(&self, p: &Pattern) -> BitSet {
        BitSet::from_indices(self.n_features, p.iter().map(FeatureId::index))
    }

    pub fn insert(&mut self, p: Pattern) {
        let bits = self.bits(&p);
        self.patterns.push((p, bits));
    }

    /// Is `p` a subset (not necessarily strict) of an accepted pattern?
    pub fn covers(&self, p: &Pattern) -> bool {
        let bits = self.bits(p);
        self.patterns
            .iter()
            .any(|(q, qb)| q.len() >= p.len() && bits.is_subset(qb))
    }

    pub fn contains(&self, p: &Pattern) -> bool {
        self.patterns.iter().any(|(q, _)| q == p)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// Pending candidates, largest first. A pattern is never enqueued twice.
#[derive(Debug, Clone, Default)]
pub struct CandidateQueue {
    pending: BTreeSet<(Reverse<usize>, Pattern)>,
    enqueued: FxHashSet<Pattern>,
}

impl CandidateQueue {
    pub fn new(cliques: impl IntoIterator<Item = FeatureClique>) -> Self {
        let mut q = Self::default();
        for c in cliques {
            q.push(c);
        }
        q
    }

    /// Returns false if the pattern was enqueued before.
    pub fn push(&mut self, p: Pattern) -> bool {
        if !self.enqueued.insert(p.clone()) {
            return false;
        }
        self.pending.insert((Reverse(p.len()), p));
        true
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn contains(&self, p: &Pattern) -> bool {
        self.pending.contains(&(Reverse(p.len()), p.clone()))
    }

    /// Removes and returns every pending candidate of the largest size, in
    /// canonical order.
    pub fn pop_level(&mut self) -> Vec<Pattern> {
        let Some((Reverse(size), _)) = self.pending.first().cloned() else {
            return Vec::new();
        };
        let mut level = Vec::new();
        while let Some((Reverse(s), _)) = self.pending.first() {
            if *s != size {
                break;
            }
            level.push(self.pending.pop_first().expect("peeked").1);
        }
        level
    }

    /// Enqueues the size-(k-1) sub-patterns of a failed candidate that are
    /// neither covered by an accepted pattern nor enqueued before. Returns
    /// the newly enqueued ones.
    pub fn split_failed(&mut self, failed: &Pattern, accepted: &AcceptedSet) -> Vec<Pattern> {
        if failed.len() < 3 {
            return Vec::new();
        }
        failed
            .maximal_subpatterns()
            .into_iter()
            .filter(|s| !accepted.covers(s))
            .filter(|s| self.push(s.clone()))
            .collect()
    }
}

/// Counters describing a verification run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyStats {
    /// Candidates taken off the queue.
    pub candidates: u64,
    /// Candidates skipped because an accepted pattern already covers them.
    pub subsumed: u64,
    /// Table instances built to completion.
    pub tables_built: u64,
    /// Verifications cut short by early abort.
    pub early_aborts: u64,
    /// Shared sub-patterns verified ahead of their supersets.
    pub shared_checked: u64,
    /// Candidates declared non-prevalent through a failed shared sub-pattern.
    pub shared_pruned: u64,
    /// Failed candidates split into sub-patterns.
    pub splits: u64,
}

impl VerifyStats {
    fn merge(&mut self, o: &VerifyStats) {
        self.candidates += o.candidates;
        self.subsumed += o.subsumed;
        self.tables_built += o.tables_built;
        self.early_aborts += o.early_aborts;
        self.shared_checked += o.shared_checked;
        self.shared_pruned += o.shared_pruned;
        self.splits += o.splits;
    }
}

#[derive(Debug, Clone)]
enum Verdict {
    Prevalent { dpi: f64, rows: usize },
    NonPrevalent,
}

/// Full result of [`verify_all_traced`].
#[derive(Debug, Clone, Default)]
pub struct VerifyOutcome {
    /// Prevalent maximal patterns in canonical order.
    pub maximal: Vec<PatternResult>,
    pub stats: VerifyStats,
    /// Participation ratios (pattern order) of every table built to
    /// completion.
    pub ratios: BTreeMap<Pattern, Vec<f64>>,
}

struct Verifier<'a, T> {
    index: PairIndex<'a>,
    ctx: AbortCtx<'a, T>,
    pruning: Pruning,
}

struct Checked {
    verdict: Verdict,
    ratios: Option<Vec<f64>>,
    stats: VerifyStats,
}

impl<T: Scalar> Verifier<'_, T> {
    fn check(&self, p: &Pattern) -> Result<Checked> {
        let mut stats = VerifyStats::default();
        let abort = self.pruning.early_abort.then_some(&self.ctx);
        match build_rows(p, 0, &self.index, abort)? {
            None => {
                stats.early_aborts += 1;
                Ok(Checked {
                    verdict: Verdict::NonPrevalent,
                    ratios: None,
                    stats,
                })
            }
            Some(table) => {
                stats.tables_built += 1;
                let ratios = participation_ratios(&table, self.ctx.counts);
                let dpi = ratios.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
                let verdict = if self.ctx.config.is_prevalent(dpi) {
                    Verdict::Prevalent {
                        dpi,
                        rows: table.len(),
                    }
                } else {
                    Verdict::NonPrevalent
                };
                Ok(Checked {
                    verdict,
                    ratios: Some(ratios),
                    stats,
                })
            }
        }
    }
}

/// One level's candidates, indexed by feature.
struct LevelIndex {
    /// Per feature, the positions of the candidates containing it.
    postings: Vec<BitSet>,
}

impl LevelIndex {
    fn new(level: &[Pattern], n_features: usize) -> Self {
        let mut postings = vec![BitSet::new(level.len()); n_features];
        for (i, c) in level.iter().enumerate() {
            for f in c.iter() {
                postings[f.index()].insert(i);
            }
        }
        Self { postings }
    }

    /// Positions in `within` whose candidate contains every feature.
    fn supersets(&self, features: impl Iterator<Item = usize>, within: &BitSet) -> BitSet {
        let mut hit = within.clone();
        for f in features {
            hit.intersect_with(&self.postings[f]);
            if hit.is_empty() {
                break;
            }
        }
        hit
    }
}

fn shared_subpatterns(level: &[Pattern]) -> Vec<Pattern> {
    const ALL_PAIRS_LIMIT: usize = 64;
    let mut shared = BTreeSet::new();
    let mut consider = |a: &Pattern, b: &Pattern| {
        let common = a.intersection(b);
        if common.len() >= 3 {
            shared.insert(Pattern::from_sorted(common));
        }
    };
    if level.len() <= ALL_PAIRS_LIMIT {
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                consider(a, b);
            }
        }
    } else {
        for w in level.windows(2) {
            consider(&w[0], &w[1]);
        }
    }
    let mut shared: Vec<Pattern> = shared.into_iter().collect();
    shared.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    shared
}

/// Verifies candidate cliques and returns the prevalent maximal patterns.
pub fn verify_all<T: Scalar>(
    cliques: &[FeatureClique],
    size2: &BTreeMap<Pattern, TableInstance>,
    counts: &FeatureCounts,
    config: &MiningConfig<T>,
    pruning: Pruning,
) -> Result<Vec<PatternResult>> {
    verify_all_traced(cliques, size2, counts, config, pruning).map(|o| o.maximal)
}

/// [`verify_all`] plus counters and the participation ratios of every
/// completed verification.
pub fn verify_all_traced<T: Scalar>(
    cliques: &[FeatureClique],
    size2: &BTreeMap<Pattern, TableInstance>,
    counts: &FeatureCounts,
    config: &MiningConfig<T>,
    pruning: Pruning,
) -> Result<VerifyOutcome> {
    config.validate()?;
    let n_features = cliques
        .iter()
        .flat_map(|c| c.iter())
        .chain(size2.keys().flat_map(|p| p.iter()))
        .map(|f| f.index() + 1)
        .max()
        .unwrap_or(0);
    let verifier = Verifier {
        index: PairIndex::new(size2.values()),
        ctx: AbortCtx { counts, config },
        pruning,
    };

    let mut queue = CandidateQueue::new(cliques.iter().cloned());
    let mut accepted = AcceptedSet::new(n_features);
    let mut results = Vec::new();
    let mut verdicts: FxHashMap<Pattern, Verdict> = FxHashMap::default();
    let mut failed_shared: Vec<BitSet> = Vec::new();
    let mut out = VerifyOutcome::default();

    loop {
        let mut level = queue.pop_level();
        if level.is_empty() {
            break;
        }
        out.stats.candidates += level.len() as u64;
        let before = level.len();
        level.retain(|c| !accepted.covers(c));
        out.stats.subsumed += (before - level.len()) as u64;

        let to_bits = |p: &Pattern| BitSet::from_indices(n_features, p.iter().map(FeatureId::index));
        let index = LevelIndex::new(&level, n_features);
        let mut open = BitSet::from_indices(
            level.len(),
            (0..level.len()).filter(|&i| !verdicts.contains_key(&level[i])),
        );
        let close = |set: &BitSet,
                     open: &mut BitSet,
                     verdicts: &mut FxHashMap<Pattern, Verdict>,
                     stats: &mut VerifyStats| {
            for i in set.iter() {
                open.remove(i);
                verdicts.insert(level[i].clone(), Verdict::NonPrevalent);
                stats.shared_pruned += 1;
            }
        };

        if pruning.shared_subpattern {
            // supersets of a shared sub-pattern that failed on an earlier level
            for f in &failed_shared {
                let hit = index.supersets(f.iter(), &open);
                close(&hit, &mut open, &mut verdicts, &mut out.stats);
            }
        }

        if pruning.shared_subpattern && level.len() >= 2 {
            for shared in shared_subpatterns(&level) {
                let supersets = index.supersets(shared.iter().map(FeatureId::index), &open);
                // only worth a table when it can settle two or more candidates
                if supersets.len() < 2 || accepted.covers(&shared) {
                    continue;
                }
                let failed = match verdicts.get(&shared) {
                    Some(v) => matches!(v, Verdict::NonPrevalent),
                    None => {
                        let checked = verifier.check(&shared)?;
                        out.stats.merge(&checked.stats);
                        out.stats.shared_checked += 1;
                        if let Some(r) = checked.ratios {
                            out.ratios.insert(shared.clone(), r);
                        }
                        let failed = matches!(checked.verdict, Verdict::NonPrevalent);
                        verdicts.insert(shared.clone(), checked.verdict);
                        failed
                    }
                };
                if failed {
                    close(&supersets, &mut open, &mut verdicts, &mut out.stats);
                    let shared_bits = to_bits(&shared);
                    failed_shared.retain(|f| !shared_bits.is_subset(f));
                    failed_shared.push(shared_bits);
                }
            }
        }

        let todo: Vec<&Pattern> = level
            .iter()
            .enumerate()
            .filter(|&(i, _)| open.contains(i))
            .map(|(_, c)| c)
            .collect();
        let checked: Vec<(Pattern, Checked)> = todo
            .into_par_iter()
            .map(|c| verifier.check(c).map(|r| (c.clone(), r)))
            .collect::<Result<Vec<_>>>()?;
        for (p, c) in checked {
            out.stats.merge(&c.stats);
            if let Some(r) = c.ratios {
                out.ratios.insert(p.clone(), r);
            }
            verdicts.insert(p, c.verdict);
        }

        for cand in level {
            match verdicts.remove(&cand).expect("every level candidate has a verdict") {
                Verdict::Prevalent { dpi, rows } => {
                    accepted.insert(cand.clone());
                    results.push(PatternResult {
                        pattern: cand,
                        dpi,
                        row_count: rows,
                        maximal: true,
                    });
                }
                Verdict::NonPrevalent => {
                    if cand.len() >= 3 {
                        out.stats.splits += 1;
                        queue.split_failed(&cand, &accepted);
                    }
                }
            }
        }
    }

    results.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    out.maximal = results;
    Ok(out)
}

/// Pattern/superset pairs whose recorded ratios break anti-monotonicity:
/// a shared feature whose ratio in the superset exceeds its ratio in the
/// subset. Returns `(subset, superset, feature)` triples.
pub fn anti_monotonicity_violations(
    ratios: &BTreeMap<Pattern, Vec<f64>>,
) -> Vec<(Pattern, Pattern, FeatureId)> {
    let mut violations = Vec::new();
    for (sub, sub_r) in ratios {
        for (sup, sup_r) in ratios {
            if sup.len() <= sub.len() || !sub.is_subset_of(sup) {
                continue;
            }
            for (i, f) in sub.iter().enumerate() {
                let j = sup.position(f).expect("subset feature");
                if sup_r[j] > sub_r[i] {
                    violations.push((sub.clone(), sup.clone(), f));
                }
            }
        }
    }
    violations
}

/// Every size >= 2 subset of the maximal patterns, with its participation
/// index recomputed from the size-2 tables.
pub fn derive_all_prevalent<T: Scalar>(
    maximal: &[Pattern],
    size2: &BTreeMap<Pattern, TableInstance>,
    counts: &FeatureCounts,
    config: &MiningConfig<T>,
) -> Result<Vec<PatternResult>> {
    config.validate()?;
    let maximal_set: HashSet<&Pattern> = maximal.iter().collect();
    let mut all = BTreeSet::new();
    for m in maximal {
        let feats = m.features();
        let k = feats.len();
        if k >= 64 {
            return Err(Error::Contract("maximal pattern too large to expand".into()));
        }
        for mask in 0u64..(1 << k) {
            if mask.count_ones() < 2 {
                continue;
            }
            let sub = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| feats[i]).collect();
            all.insert(Pattern::from_sorted(sub));
        }
    }
    let all: Vec<Pattern> = all.into_iter().collect();
    let index = PairIndex::new(size2.values());
    all.into_par_iter()
        .map(|p| {
            let table = build_rows::<f64>(&p, 0, &index, None)?.expect("no abort without a context");
            let dpi = participation_ratios(&table, counts)
                .into_iter()
                .fold(f64::INFINITY, f64::min)
                .min(1.0);
            Ok(PatternResult {
                maximal: maximal_set.contains(&p),
                dpi,
                row_count: table.len(),
                pattern: p,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(i: u32) -> FeatureId {
        FeatureId(i)
    }

    fn pat(ids: &[u32]) -> Pattern {
        Pattern::new(ids.iter().map(|&i| f(i))).unwrap()
    }

    fn table(a: u32, b: u32, rows: &[(u32, u32)]) -> (Pattern, TableInstance) {
        let p = Pattern::pair(f(a), f(b));
        let rows = rows
            .iter()
            .map(|&(x, y)| smallvec::smallvec![InstanceId(x), InstanceId(y)])
            .collect();
        (p.clone(), TableInstance::from_rows(p, rows))
    }

    /// Features 0 = A_dead, 1 = B_new, 2 = C_dead. Instances: A_dead.1 = 0,
    /// A_dead.2 = 1, B_new.1 = 10, B_new.2 = 11, C_dead.1 = 20, C_dead.2 = 21.
    fn triangle_tables() -> BTreeMap<Pattern, TableInstance> {
        [
            table(0, 1, &[(0, 10), (0, 11), (1, 10)]),
            table(0, 2, &[(0, 21)]),
            table(1, 2, &[(10, 21)]),
        ]
        .into()
    }

    #[test]
    fn candidate_rows_are_filtered_by_remaining_pairs() {
        let t = candidate_table_instance(&pat(&[0, 1, 2]), &triangle_tables()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].as_slice(), [InstanceId(0), InstanceId(10), InstanceId(21)]);
    }

    #[test]
    fn anchor_does_not_matter() {
        let tables = triangle_tables();
        let p = pat(&[0, 1, 2]);
        let base = candidate_table_instance(&p, &tables).unwrap();
        for a in p.iter() {
            assert_eq!(candidate_table_instance_anchored(&p, a, &tables).unwrap(), base);
        }
    }

    #[test]
    fn size_two_candidate_is_its_own_table() {
        let tables = triangle_tables();
        let p = Pattern::pair(f(0), f(1));
        assert_eq!(candidate_table_instance(&p, &tables).unwrap(), tables[&p]);
    }

    #[test]
    fn missing_pair_table_is_contract_violation() {
        let mut tables = triangle_tables();
        tables.remove(&Pattern::pair(f(1), f(2)));
        assert!(matches!(
            candidate_table_instance(&pat(&[0, 1, 2]), &tables),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn abort_decisions() {
        let p = Pattern::pair(f(0), f(1));
        let counts = FeatureCounts::from_vec(vec![100, 100]);
        let cfg = MiningConfig::new(1.0, 0.1, 1.0).unwrap();
        assert_eq!(early_abort_check(&p, &[0, 50], &[0, 0], &counts, &cfg), AbortDecision::Abort);
        assert_eq!(early_abort_check(&p, &[5, 50], &[4, 0], &counts, &cfg), AbortDecision::Abort);
        assert_eq!(early_abort_check(&p, &[5, 10], &[5, 0], &counts, &cfg), AbortDecision::Continue);
        let strict = cfg.with_prevalence(crate::model::Comparison::Strict);
        assert_eq!(early_abort_check(&p, &[5, 10], &[5, 0], &counts, &strict), AbortDecision::Abort);
    }

    #[test]
    fn early_abort_fires_on_thin_anchor() {
        // one common anchor instance out of 20: DPR(anchor) <= 0.05 < 0.1
        let tables = triangle_tables();
        let counts = FeatureCounts::from_vec(vec![20, 2, 2]);
        let cfg = MiningConfig::new(1.0, 0.1, 1.0).unwrap();
        let ctx = AbortCtx { counts: &counts, config: &cfg };
        assert!(build_rows(&pat(&[0, 1, 2]), 0, &PairIndex::new(tables.values()), Some(&ctx)).unwrap().is_none());
        let counts = FeatureCounts::from_vec(vec![2, 2, 2]);
        let ctx = AbortCtx { counts: &counts, config: &cfg };
        assert!(build_rows(&pat(&[0, 1, 2]), 0, &PairIndex::new(tables.values()), Some(&ctx)).unwrap().is_some());
    }

    #[test]
    fn failed_candidate_skips_accepted_subpattern() {
        // A_dead=0, B_new=1, C_dead=2, D_new=3
        let mut accepted = AcceptedSet::new(4);
        accepted.insert(pat(&[0, 1, 2]));
        let mut queue = CandidateQueue::default();
        let added = queue.split_failed(&pat(&[0, 1, 2, 3]), &accepted);
        assert_eq!(added, [pat(&[0, 1, 3]), pat(&[0, 2, 3]), pat(&[1, 2, 3])]);
        // a second failure sharing sub-patterns adds nothing twice
        assert!(queue.split_failed(&pat(&[0, 1, 2, 3]), &accepted).is_empty());
        assert_eq!(queue.len(), 3);
    }

    #[test]
    fn queue_pops_by_level() {
        let mut q = CandidateQueue::new([pat(&[0, 1]), pat(&[2, 3, 4]), pat(&[0, 5, 6])]);
        assert!(!q.push(pat(&[0, 1])));
        assert_eq!(q.pop_level(), [pat(&[0, 5, 6]), pat(&[2, 3, 4])]);
        assert_eq!(q.pop_level(), [pat(&[0, 1])]);
        assert!(q.pop_level().is_empty());
    }

    #[test]
    fn all_prevalent_cliques_pass_through() {
        let tables = triangle_tables();
        let counts = FeatureCounts::from_vec(vec![2, 2, 2]);
        let cfg = MiningConfig::new(1.0, 0.3, 1.0).unwrap();
        let res = verify_all(&[pat(&[0, 1, 2])], &tables, &counts, &cfg, Pruning::ALL).unwrap();
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].pattern, pat(&[0, 1, 2]));
        assert_eq!(res[0].dpi, 0.5);
        assert_eq!(res[0].row_count, 1);
    }

    #[test]
    fn failed_triangle_falls_back_to_edges() {
        let tables = triangle_tables();
        let counts = FeatureCounts::from_vec(vec![2, 2, 2]);
        let cfg = MiningConfig::new(1.0, 0.6, 1.0).unwrap();
        for pruning in Pruning::combinations() {
            let res = verify_all(&[pat(&[0, 1, 2])], &tables, &counts, &cfg, pruning).unwrap();
            let pats: Vec<_> = res.iter().map(|r| r.pattern.clone()).collect();
            // {0,2} and {1,2} only reach 0.5 on their own
            assert_eq!(pats, [pat(&[0, 1])]);
        }
    }

    #[test]
    fn derive_lattice() {
        let tables = triangle_tables();
        let counts = FeatureCounts::from_vec(vec![2, 2, 2]);
        let cfg = MiningConfig::new(1.0, 0.3, 1.0).unwrap();
        let all = derive_all_prevalent(&[pat(&[0, 1, 2])], &tables, &counts, &cfg).unwrap();
        let pats: Vec<_> = all.iter().map(|r| r.pattern.clone()).collect();
        assert_eq!(pats, [pat(&[0, 1]), pat(&[0, 1, 2]), pat(&[0, 2]), pat(&[1, 2])]);
        assert_eq!(all.iter().filter(|r| r.maximal).count(), 1);

        let two = derive_all_prevalent(&[pat(&[0, 1]), pat(&[1, 2])], &tables, &counts, &cfg).unwrap();
        let pats: Vec<_> = two.iter().map(|r| r.pattern.clone()).collect();
        assert_eq!(pats, [pat(&[0, 1]), pat(&[1, 2])]);
    }

    #[test]
    fn shared_subpattern_detection() {
        let level = [pat(&[0, 1, 2, 3]), pat(&[0, 1, 2, 4]), pat(&[5, 6, 7, 8])];
        assert_eq!(shared_subpatterns(&level), [pat(&[0, 1, 2])]);
    }

    #[test]
    fn violations_detect_increase() {
        let mut ratios = BTreeMap::new();
        ratios.insert(pat(&[0, 1]), vec![0.5, 0.5]);
        ratios.insert(pat(&[0, 1, 2]), vec![0.4, 0.6, 0.1]);
        let v = anti_monotonicity_violations(&ratios);
        assert_eq!(v, [(pat(&[0, 1]), pat(&[0, 1, 2]), f(1))]);
    }
}

//! Domain model shared by every stage of the miner.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Whether a dynamic feature records appearances or disappearances.
///
/// The derived order (`New < Dead`) is part of the canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    New,
    Dead,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::New => "new",
            Kind::Dead => "dead",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "new" => Ok(Kind::New),
            "dead" => Ok(Kind::Dead),
            other => Err(Error::config(format!("unknown kind {other:?}"))),
        }
    }
}

/// A spatial feature with its life cycle, in the same unit as the time span.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFeature {
    pub id: String,
    pub life_cycle: f64,
}

/// A base feature split by event kind, e.g. `A_new` or `A_dead`.
///
/// Ordered by base id, then kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DynamicFeature {
    pub base: Arc<str>,
    pub kind: Kind,
}

impl DynamicFeature {
    pub fn new(base: impl Into<Arc<str>>, kind: Kind) -> Self {
        Self {
            base: base.into(),
            kind,
        }
    }
}

impl fmt::Display for DynamicFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.base, self.kind)
    }
}

impl FromStr for DynamicFeature {
    type Err = Error;

    /// Parses `<base>_new` or `<base>_dead`.
    fn from_str(s: &str) -> Result<Self> {
        let (base, kind) = s
            .rsplit_once('_')
            .ok_or_else(|| Error::config(format!("{s:?} is not of the form <base>_new|dead")))?;
        if base.is_empty() {
            return Err(Error::config(format!("{s:?} has an empty base feature")));
        }
        Ok(DynamicFeature::new(base, kind.parse()?))
    }
}

/// Dense index of a dynamic feature inside a [`FeatureUniverse`].
///
/// Indices follow canonical feature order, so comparing indices compares
/// features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(pub u32);

impl FeatureId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of a dynamic instance inside its series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId(pub u32);

impl InstanceId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The canonically ordered set of dynamic features a series talks about.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureUniverse {
    features: Vec<DynamicFeature>,
}

impl FeatureUniverse {
    pub fn new(features: impl IntoIterator<Item = DynamicFeature>) -> Self {
        let mut features: Vec<_> = features.into_iter().collect();
        features.sort();
        features.dedup();
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, id: FeatureId) -> &DynamicFeature {
        &self.features[id.index()]
    }

    pub fn id_of(&self, feature: &DynamicFeature) -> Option<FeatureId> {
        self.features
            .binary_search(feature)
            .ok()
            .map(|i| FeatureId(i as u32))
    }

    /// Looks up a feature written as `A_new`.
    pub fn parse_id(&self, name: &str) -> Result<FeatureId> {
        let feature: DynamicFeature = name.parse()?;
        self.id_of(&feature)
            .ok_or_else(|| Error::config(format!("unknown dynamic feature {name}")))
    }

    pub fn ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        (0..self.features.len() as u32).map(FeatureId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, &DynamicFeature)> + '_ {
        self.features
            .iter()
            .enumerate()
            .map(|(i, f)| (FeatureId(i as u32), f))
    }

    /// Distinct base feature ids, sorted.
    pub fn base_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.features.iter().map(|f| &*f.base).collect();
        ids.dedup();
        ids
    }

    /// `{A_new,B_dead}`
    pub fn display(&self, pattern: &Pattern) -> String {
        let names: Vec<String> = pattern
            .iter()
            .map(|f| self.get(f).to_string())
            .collect();
        format!("{{{}}}", names.join(","))
    }

    /// Parses the `{A_new,B_dead}` form produced by [`FeatureUniverse::display`].
    pub fn parse_pattern(&self, text: &str) -> Result<Pattern> {
        let inner = text
            .trim()
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| Error::config(format!("pattern {text:?} must be wrapped in braces")))?;
        let ids = inner
            .split(',')
            .map(|name| self.parse_id(name.trim()))
            .collect::<Result<Vec<_>>>()?;
        Pattern::new(ids)
    }
}

/// One appearance or disappearance event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicInstance<T> {
    pub feature: FeatureId,
    /// 1-based sequence number within the feature.
    pub ordinal: u32,
    pub x: T,
    pub y: T,
    /// Transition window: the event happened between snapshot `t_index` and
    /// `t_index + 1`.
    pub t_index: u32,
}

impl<T: Scalar> DynamicInstance<T> {
    #[inline]
    pub fn position(&self) -> (T, T) {
        (self.x, self.y)
    }
}

/// How a measured value is compared against its threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Comparison {
    /// `value <= limit` for distances/time, `value >= min` for prevalence.
    #[default]
    Inclusive,
    /// `value < limit` for distances/time, `value > min` for prevalence.
    Strict,
}

impl Comparison {
    /// Upper-bound test: is `value` within `limit`?
    #[inline]
    pub fn within<V: PartialOrd>(self, value: V, limit: V) -> bool {
        match self {
            Comparison::Inclusive => value <= limit,
            Comparison::Strict => value < limit,
        }
    }

    /// Lower-bound test: does `value` reach `threshold`?
    #[inline]
    pub fn reaches<V: PartialOrd>(self, value: V, threshold: V) -> bool {
        match self {
            Comparison::Inclusive => value >= threshold,
            Comparison::Strict => value > threshold,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparison::Inclusive => "inclusive",
            Comparison::Strict => "strict",
        })
    }
}

impl FromStr for Comparison {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inclusive" => Ok(Comparison::Inclusive),
            "strict" => Ok(Comparison::Strict),
            other => Err(Error::config(format!(
                "comparison must be inclusive or strict, got {other:?}"
            ))),
        }
    }
}

/// Thresholds for a mining run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningConfig<T> {
    /// Distance threshold; pairs at exactly this distance are neighbors.
    pub d_d: T,
    pub min_prev: f64,
    pub time_span: f64,
    pub prevalence: Comparison,
    pub temporal: Comparison,
}

impl<T: Scalar> MiningConfig<T> {
    pub fn new(d_d: T, min_prev: f64, time_span: f64) -> Result<Self> {
        let cfg = Self {
            d_d,
            min_prev,
            time_span,
            prevalence: Comparison::Inclusive,
            temporal: Comparison::Inclusive,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_prevalence(mut self, cmp: Comparison) -> Self {
        self.prevalence = cmp;
        self
    }

    pub fn with_temporal(mut self, cmp: Comparison) -> Self {
        self.temporal = cmp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_d > T::zero()) {
            return Err(Error::config("d_d must be positive"));
        }
        if !(self.time_span > 0.0) || !self.time_span.is_finite() {
            return Err(Error::config("time_span must be positive"));
        }
        if !(0.0..=1.0).contains(&self.min_prev) {
            return Err(Error::config("min_prev must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Does a participation index pass `min_prev`?
    #[inline]
    pub fn is_prevalent(&self, dpi: f64) -> bool {
        self.prevalence.reaches(dpi, self.min_prev)
    }
}

impl Default for MiningConfig<f64> {
    /// `d_d = 35`, `min_prev = 0.1`, `time_span = 3`.
    fn default() -> Self {
        Self {
            d_d: 35.0,
            min_prev: 0.1,
            time_span: 3.0,
            prevalence: Comparison::Inclusive,
            temporal: Comparison::Inclusive,
        }
    }
}

/// Number of transition windows a feature's events influence.
///
/// Dead objects influence one window; new objects influence
/// `ceil(life_cycle / time_span)` windows, never fewer than one.
pub fn span_constraint(kind: Kind, life_cycle: f64, time_span: f64) -> Result<u32> {
    if !(life_cycle > 0.0) || !life_cycle.is_finite() {
        return Err(Error::config(format!(
            "life cycle must be positive, got {life_cycle}"
        )));
    }
    if !(time_span > 0.0) || !time_span.is_finite() {
        return Err(Error::config(format!(
            "time span must be positive, got {time_span}"
        )));
    }
    Ok(match kind {
        Kind::Dead => 1,
        Kind::New => {
            let spans = (life_cycle / time_span).ceil();
            if spans > u32::MAX as f64 {
                return Err(Error::config("life cycle spans overflow"));
            }
            (spans as u32).max(1)
        }
    })
}

/// Life cycle per base feature.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LifeCycles {
    by_base: BTreeMap<String, f64>,
}

impl LifeCycles {
    pub fn new(features: impl IntoIterator<Item = BaseFeature>) -> Result<Self> {
        let mut by_base = BTreeMap::new();
        for BaseFeature { id, life_cycle } in features {
            if !(life_cycle > 0.0) || !life_cycle.is_finite() {
                return Err(Error::config(format!(
                    "life cycle of {id} must be positive, got {life_cycle}"
                )));
            }
            if by_base.insert(id.clone(), life_cycle).is_some() {
                return Err(Error::config(format!("duplicate life cycle for {id}")));
            }
        }
        Ok(Self { by_base })
    }

    /// Every base feature gets the same life cycle.
    pub fn uniform<'a>(ids: impl IntoIterator<Item = &'a str>, life_cycle: f64) -> Result<Self> {
        Self::new(ids.into_iter().map(|id| BaseFeature {
            id: id.to_owned(),
            life_cycle,
        }))
    }

    pub fn get(&self, base: &str) -> Option<f64> {
        self.by_base.get(base).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = BaseFeature> + '_ {
        self.by_base.iter().map(|(id, &life_cycle)| BaseFeature {
            id: id.clone(),
            life_cycle,
        })
    }

    pub fn len(&self) -> usize {
        self.by_base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_base.is_empty()
    }
}

/// Span constraint of every dynamic feature in a universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spans(Vec<u32>);

impl Spans {
    /// Fails when a base feature of the universe has no life cycle.
    pub fn from_life_cycles(
        universe: &FeatureUniverse,
        life_cycles: &LifeCycles,
        time_span: f64,
    ) -> Result<Self> {
        universe
            .iter()
            .map(|(_, f)| {
                let lc = life_cycles.get(&f.base).ok_or_else(|| {
                    Error::config(format!("no life cycle for base feature {}", f.base))
                })?;
                span_constraint(f.kind, lc, time_span)
            })
            .collect::<Result<Vec<_>>>()
            .map(Spans)
    }

    /// Explicit spans indexed by [`FeatureId`].
    pub fn from_vec(spans: Vec<u32>) -> Self {
        Spans(spans)
    }

    #[inline]
    pub fn get(&self, f: FeatureId) -> Option<u32> {
        self.0.get(f.index()).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A set of at least two dynamic features, stored in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern(SmallVec<[FeatureId; 8]>);

/// Candidate patterns produced from the feature graph share the pattern type.
pub type FeatureClique = Pattern;

impl Pattern {
    /// Builds a pattern from features in any order.
    pub fn new(features: impl IntoIterator<Item = FeatureId>) -> Result<Self> {
        let mut v: SmallVec<[FeatureId; 8]> = features.into_iter().collect();
        v.sort_unstable();
        let before = v.len();
        v.dedup();
        if v.len() != before {
            return Err(Error::Contract("pattern has duplicate features".into()));
        }
        if v.len() < 2 {
            return Err(Error::Contract("pattern needs at least two features".into()));
        }
        Ok(Pattern(v))
    }

    pub fn pair(a: FeatureId, b: FeatureId) -> Self {
        debug_assert_ne!(a, b);
        if a < b {
            Pattern(smallvec::smallvec![a, b])
        } else {
            Pattern(smallvec::smallvec![b, a])
        }
    }

    /// Caller guarantees sorted, distinct, len >= 2.
    pub(crate) fn from_sorted(v: SmallVec<[FeatureId; 8]>) -> Self {
        debug_assert!(v.len() >= 2 && v.windows(2).all(|w| w[0] < w[1]));
        Pattern(v)
    }

    pub fn features(&self) -> &[FeatureId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, f: FeatureId) -> bool {
        self.0.binary_search(&f).is_ok()
    }

    pub fn position(&self, f: FeatureId) -> Option<usize> {
        self.0.binary_search(&f).ok()
    }

    pub fn is_subset_of(&self, other: &Pattern) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut it = other.0.iter();
        self.0.iter().all(|f| it.any(|g| g == f))
    }

    /// The pattern with the feature at `pos` removed. Only valid for size >= 3.
    pub fn without(&self, pos: usize) -> Pattern {
        assert!(self.len() >= 3, "sub-pattern would have fewer than two features");
        let mut v = self.0.clone();
        v.remove(pos);
        Pattern(v)
    }

    /// All size-(k-1) sub-patterns in canonical order.
    pub fn maximal_subpatterns(&self) -> Vec<Pattern> {
        let mut subs: Vec<Pattern> = (0..self.len()).map(|i| self.without(i)).collect();
        subs.sort();
        subs
    }

    pub fn intersection(&self, other: &Pattern) -> SmallVec<[FeatureId; 8]> {
        self.0
            .iter()
            .copied()
            .filter(|f| other.contains(*f))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn span_examples() {
        assert_eq!(span_constraint(Kind::New, 75.0, 3.0).unwrap(), 25);
        assert_eq!(span_constraint(Kind::Dead, 75.0, 3.0).unwrap(), 1);
        assert_eq!(span_constraint(Kind::New, 3.0, 3.0).unwrap(), 1);
        // uneven division rounds up
        assert_eq!(span_constraint(Kind::New, 10.0, 3.0).unwrap(), 4);
        assert_eq!(span_constraint(Kind::New, 1.0, 3.0).unwrap(), 1);
    }

    #[test]
    fn span_rejects_non_positive() {
        assert!(matches!(
            span_constraint(Kind::New, 0.0, 3.0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(span_constraint(Kind::Dead, 5.0, -1.0).is_err());
        assert!(span_constraint(Kind::New, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn canonical_feature_order() {
        let u = FeatureUniverse::new([
            DynamicFeature::new("B", Kind::New),
            DynamicFeature::new("A", Kind::Dead),
            DynamicFeature::new("A", Kind::New),
        ]);
        let names: Vec<String> = u.iter().map(|(_, f)| f.to_string()).collect();
        assert_eq!(names, ["A_new", "A_dead", "B_new"]);
        assert_eq!(u.parse_id("A_dead").unwrap(), FeatureId(1));
        assert!(u.parse_id("C_new").is_err());
        assert!(u.parse_id("C").is_err());
    }

    #[test]
    fn pattern_round_trips_through_display() {
        let u = FeatureUniverse::new([
            DynamicFeature::new("A", Kind::New),
            DynamicFeature::new("B", Kind::Dead),
        ]);
        let p = Pattern::new([FeatureId(1), FeatureId(0)]).unwrap();
        assert_eq!(u.display(&p), "{A_new,B_dead}");
        assert_eq!(u.parse_pattern("{B_dead, A_new}").unwrap(), p);
    }

    #[test]
    fn pattern_rejects_bad_sets() {
        assert!(Pattern::new([FeatureId(0)]).is_err());
        assert!(Pattern::new([FeatureId(0), FeatureId(0)]).is_err());
    }

    #[test]
    fn subpatterns_of_four() {
        let p = Pattern::new((0..4).map(FeatureId)).unwrap();
        let subs = p.maximal_subpatterns();
        assert_eq!(subs.len(), 4);
        assert!(subs.iter().all(|s| s.len() == 3 && s.is_subset_of(&p)));
    }

    #[test]
    fn config_validation() {
        assert!(MiningConfig::new(35.0, 0.1, 3.0).is_ok());
        assert!(MiningConfig::new(0.0, 0.1, 3.0).is_err());
        assert!(MiningConfig::new(1.0, 1.5, 3.0).is_err());
        assert!(MiningConfig::new(1.0, 0.5, 0.0).is_err());
        let strict = MiningConfig::new(1.0, 0.5, 1.0)
            .unwrap()
            .with_prevalence(Comparison::Strict);
        assert!(!strict.is_prevalent(0.5));
        assert!(MiningConfig::new(1.0, 0.5, 1.0).unwrap().is_prevalent(0.5));
    }

    proptest! {
        #[test]
        fn span_monotone(lc in 0.01f64..500.0, extra in 0.0f64..100.0, ts in 0.1f64..20.0, ts_extra in 0.0f64..20.0) {
            let base = span_constraint(Kind::New, lc, ts).unwrap();
            prop_assert!(span_constraint(Kind::New, lc + extra, ts).unwrap() >= base);
            prop_assert!(span_constraint(Kind::New, lc, ts + ts_extra).unwrap() <= base);
            prop_assert_eq!(span_constraint(Kind::Dead, lc, ts).unwrap(), 1);
        }

        #[test]
        fn pattern_order_insensitive(mut ids in proptest::collection::btree_set(0u32..40, 2..8)
            .prop_map(|s| s.into_iter().collect::<Vec<_>>()), seed in any::<u64>()) {
            let a = Pattern::new(ids.iter().copied().map(FeatureId)).unwrap();
            // deterministic shuffle
            let n = ids.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ids.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = Pattern::new(ids.into_iter().map(FeatureId)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

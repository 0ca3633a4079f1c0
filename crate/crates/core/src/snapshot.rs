//! Turning timestamped snapshots into per-window new/dead events.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DynamicFeature, DynamicInstance, FeatureId, FeatureUniverse, InstanceId, Kind};
use crate::scalar::Scalar;

/// One object observed in a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord<T> {
    pub feature: String,
    pub instance_id: String,
    pub x: T,
    pub y: T,
}

/// All objects observed at time point `t_point`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub t_point: u32,
    pub records: Vec<SnapshotRecord<T>>,
}

impl<T> Snapshot<T> {
    pub fn new(t_point: u32) -> Self {
        Self {
            t_point,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, feature: impl Into<String>, instance_id: impl Into<String>, x: T, y: T) {
        self.records.push(SnapshotRecord {
            feature: feature.into(),
            instance_id: instance_id.into(),
            x,
            y,
        });
    }
}

/// A dynamic instance described by names rather than indices; the input to
/// [`DynamicDatasetSeries::from_records`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRecord<T> {
    pub feature: DynamicFeature,
    pub ordinal: u32,
    pub x: T,
    pub y: T,
    pub t_index: u32,
}

/// New/dead instances of every transition window.
///
/// Instances are stored sorted by `(feature, ordinal)`, so an [`InstanceId`]
/// order agrees with canonical feature order. Empty windows are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicDatasetSeries<T> {
    universe: FeatureUniverse,
    instances: Vec<DynamicInstance<T>>,
    n_windows: usize,
}

impl<T: Scalar> DynamicDatasetSeries<T> {
    /// Builds a series from explicit records.
    ///
    /// Fails on duplicate `(feature, ordinal)`, ordinal 0 or a `t_index`
    /// outside `0..n_windows`.
    pub fn from_records(n_windows: usize, records: Vec<SeriesRecord<T>>) -> Result<Self> {
        if n_windows == 0 {
            return Err(Error::InsufficientData(
                "a series needs at least one window".into(),
            ));
        }
        let universe = FeatureUniverse::new(records.iter().map(|r| r.feature.clone()));
        let mut seen = HashSet::with_capacity(records.len());
        let mut instances = Vec::with_capacity(records.len());
        for r in records {
            if r.ordinal == 0 {
                return Err(Error::format(None, format!("{} has ordinal 0", r.feature)));
            }
            if r.t_index as usize >= n_windows {
                return Err(Error::format(
                    None,
                    format!(
                        "{}.{} has t_index {} but the series has {n_windows} windows",
                        r.feature, r.ordinal, r.t_index
                    ),
                ));
            }
            let feature = universe.id_of(&r.feature).expect("universe built from records");
            if !seen.insert((feature, r.ordinal)) {
                return Err(Error::format(
                    None,
                    format!("duplicate instance {}.{}", r.feature, r.ordinal),
                ));
            }
            instances.push(DynamicInstance {
                feature,
                ordinal: r.ordinal,
                x: r.x,
                y: r.y,
                t_index: r.t_index,
            });
        }
        instances.sort_by_key(|i| (i.feature, i.ordinal));
        if u32::try_from(instances.len()).is_err() {
            return Err(Error::config("too many instances"));
        }
        Ok(Self {
            universe,
            instances,
            n_windows,
        })
    }

    pub fn universe(&self) -> &FeatureUniverse {
        &self.universe
    }

    pub fn instances(&self) -> &[DynamicInstance<T>] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_windows(&self) -> usize {
        self.n_windows
    }

    #[inline]
    pub fn get(&self, id: InstanceId) -> &DynamicInstance<T> {
        &self.instances[id.index()]
    }

    #[inline]
    pub fn feature_of(&self, id: InstanceId) -> FeatureId {
        self.instances[id.index()].feature
    }

    pub fn ids(&self) -> impl Iterator<Item = InstanceId> {
        (0..self.instances.len() as u32).map(InstanceId)
    }

    /// Instances of window `k`, in id order.
    pub fn window(&self, k: usize) -> impl Iterator<Item = (InstanceId, &DynamicInstance<T>)> + '_ {
        self.instances
            .iter()
            .enumerate()
            .filter(move |(_, i)| i.t_index as usize == k)
            .map(|(i, inst)| (InstanceId(i as u32), inst))
    }

    /// Finds `A_dead.1` style references.
    pub fn lookup(&self, feature: &str, ordinal: u32) -> Option<InstanceId> {
        let f = self.universe.parse_id(feature).ok()?;
        self.instances
            .binary_search_by_key(&(f, ordinal), |i| (i.feature, i.ordinal))
            .ok()
            .map(|i| InstanceId(i as u32))
    }

    /// `A_dead.1`
    pub fn label(&self, id: InstanceId) -> String {
        let inst = self.get(id);
        format!("{}.{}", self.universe.get(inst.feature), inst.ordinal)
    }

    /// Number of instances of every feature across all windows.
    pub fn feature_totals(&self) -> Vec<u32> {
        let mut totals = vec![0u32; self.universe.len()];
        for inst in &self.instances {
            totals[inst.feature.index()] += 1;
        }
        totals
    }

    /// The records this series was (or could have been) built from.
    pub fn to_records(&self) -> Vec<SeriesRecord<T>> {
        self.instances
            .iter()
            .map(|i| SeriesRecord {
                feature: self.universe.get(i.feature).clone(),
                ordinal: i.ordinal,
                x: i.x,
                y: i.y,
                t_index: i.t_index,
            })
            .collect()
    }
}

/// Instance ids sort numerically when both are integers, lexically otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
struct IdKey<'a>(&'a str);

impl Ord for IdKey<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0.parse::<u64>(), other.0.parse::<u64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b).then_with(|| self.0.cmp(other.0)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            (Err(_), Err(_)) => self.0.cmp(other.0),
        }
    }
}

impl PartialOrd for IdKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Event<'a, T> {
    feature: DynamicFeature,
    window: u32,
    id: &'a str,
    x: T,
    y: T,
}

fn index_snapshot<T: Scalar>(
    snap: &Snapshot<T>,
) -> Result<HashMap<(&str, &str), &SnapshotRecord<T>>> {
    let mut map = HashMap::with_capacity(snap.records.len());
    for r in &snap.records {
        if map
            .insert((r.feature.as_str(), r.instance_id.as_str()), r)
            .is_some()
        {
            return Err(Error::format(
                None,
                format!(
                    "duplicate instance {}.{} in snapshot t={}",
                    r.feature, r.instance_id, snap.t_point
                ),
            ));
        }
    }
    Ok(map)
}

/// Diffs consecutive snapshots into a dynamic dataset series.
///
/// For each pair `(t_k, t_{k+1})`, an id present only at `t_k` becomes a dead
/// instance at its `t_k` position and an id present only at `t_{k+1}` becomes
/// a new instance at its `t_{k+1}` position, both in window `k`. Objects are
/// matched by `(feature, instance_id)`; a matched object that moved produces
/// no event. Ordinals are assigned per dynamic feature in `(window, id)`
/// order.
pub fn diff_snapshots<T: Scalar>(snapshots: &[Snapshot<T>]) -> Result<DynamicDatasetSeries<T>> {
    if snapshots.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    for w in snapshots.windows(2) {
        if w[1].t_point != w[0].t_point + 1 {
            return Err(Error::format(
                None,
                format!(
                    "snapshots must have contiguous time points, found {} then {}",
                    w[0].t_point, w[1].t_point
                ),
            ));
        }
    }
    let indexed = snapshots
        .iter()
        .map(index_snapshot)
        .collect::<Result<Vec<_>>>()?;

    let per_window: Vec<Vec<Event<'_, T>>> = indexed
        .par_windows(2)
        .enumerate()
        .map(|(k, pair)| {
            let (before, after) = (&pair[0], &pair[1]);
            let mut events = Vec::new();
            for (key, r) in before {
                if !after.contains_key(key) {
                    events.push(Event {
                        feature: DynamicFeature::new(key.0, Kind::Dead),
                        window: k as u32,
                        id: key.1,
                        x: r.x,
                        y: r.y,
                    });
                }
            }
            for (key, r) in after {
                if !before.contains_key(key) {
                    events.push(Event {
                        feature: DynamicFeature::new(key.0, Kind::New),
                        window: k as u32,
                        id: key.1,
                        x: r.x,
                        y: r.y,
                    });
                }
            }
            events
        })
        .collect();

    let mut events: Vec<Event<'_, T>> = per_window.into_iter().flatten().collect();
    events.sort_by(|a, b| {
        a.feature
            .cmp(&b.feature)
            .then(a.window.cmp(&b.window))
            .then_with(|| IdKey(a.id).cmp(&IdKey(b.id)))
    });

    let mut records = Vec::with_capacity(events.len());
    let mut ordinal = 0u32;
    let mut prev: Option<&DynamicFeature> = None;
    for e in &events {
        if prev != Some(&e.feature) {
            ordinal = 0;
            prev = Some(&e.feature);
        }
        ordinal += 1;
        records.push(SeriesRecord {
            feature: e.feature.clone(),
            ordinal,
            x: e.x,
            y: e.y,
            t_index: e.window,
        });
    }
    DynamicDatasetSeries::from_records(snapshots.len() - 1, records)
}

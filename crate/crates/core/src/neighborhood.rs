//! Dynamic neighbor pairs via a uniform grid.
//!
//! Two instances of different features are neighbors when they lie within
//! `d_d` of each other and their windows differ by at most the larger of the
//! two features' spans (strictly less under [`Comparison::Strict`]).
//!
//! [`Comparison::Strict`]: crate::model::Comparison::Strict

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::{InstanceId, MiningConfig, Spans};
use crate::scalar::{dist_sq, Scalar};
use crate::snapshot::DynamicDatasetSeries;

/// An unordered neighbor pair, stored with `a < b`.
///
/// Because instance ids follow feature order, `a`'s feature always precedes
/// `b`'s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NeighborPair {
    pub a: InstanceId,
    pub b: InstanceId,
}

impl NeighborPair {
    pub fn new(x: InstanceId, y: InstanceId) -> Self {
        if x < y {
            Self { a: x, b: y }
        } else {
            Self { a: y, b: x }
        }
    }
}

type Cell = (i64, i64);

/// Instances bucketed by grid cell and then by window.
#[derive(Debug, Clone)]
pub struct GridIndex<T> {
    cell_size: T,
    n_windows: usize,
    cells: FxHashMap<Cell, Vec<Vec<InstanceId>>>,
}

impl<T: Scalar> GridIndex<T> {
    pub fn build(series: &DynamicDatasetSeries<T>, cell_size: T) -> Result<Self> {
        if !(cell_size > T::zero()) {
            return Err(Error::config("grid cell size must be positive"));
        }
        let n_windows = series.n_windows();
        let mut cells: FxHashMap<Cell, Vec<Vec<InstanceId>>> = FxHashMap::default();
        for (id, inst) in series.ids().zip(series.instances()) {
            let cell = Self::locate(cell_size, inst.x, inst.y).ok_or_else(|| {
                Error::config(format!(
                    "instance {} has an unindexable position",
                    series.label(id)
                ))
            })?;
            cells
                .entry(cell)
                .or_insert_with(|| vec![Vec::new(); n_windows])[inst.t_index as usize]
                .push(id);
        }
        Ok(Self {
            cell_size,
            n_windows,
            cells,
        })
    }

    fn locate(cell_size: T, x: T, y: T) -> Option<Cell> {
        Some((x.cell_of(cell_size)?, y.cell_of(cell_size)?))
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    pub fn cell_of(&self, x: T, y: T) -> Option<Cell> {
        Self::locate(self.cell_size, x, y)
    }

    /// Occupied cells in sorted order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut keys: Vec<Cell> = self.cells.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    /// Instances of `cell` in window `t`.
    pub fn bucket(&self, cell: Cell, t: usize) -> &[InstanceId] {
        self.cells
            .get(&cell)
            .and_then(|b| b.get(t))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Per-window buckets of `cell`, if occupied.
    fn windows(&self, cell: Cell) -> Option<&[Vec<InstanceId>]> {
        self.cells.get(&cell).map(Vec::as_slice)
    }

    pub fn occupied(&self) -> usize {
        self.cells.len()
    }
}

/// Every dynamic neighbor pair of the series, sorted.
///
/// Same-feature pairs are never produced.
pub fn neighbor_pairs<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    spans: &Spans,
    config: &MiningConfig<T>,
) -> Result<Vec<NeighborPair>> {
    config.validate()?;
    if spans.len() < series.universe().len() {
        return Err(Error::config(format!(
            "spans cover {} dynamic features but the series has {}",
            spans.len(),
            series.universe().len()
        )));
    }
    let span_of = |id: InstanceId| {
        spans
            .get(series.feature_of(id))
            .expect("checked span coverage")
    };
    let max_span = series
        .universe()
        .ids()
        .filter_map(|f| spans.get(f))
        .max()
        .unwrap_or(0) as usize;

    let grid = GridIndex::build(series, config.d_d)?;
    let d_sq = config.d_d * config.d_d;
    let n_windows = grid.n_windows;

    let mut pairs: Vec<NeighborPair> = grid
        .cells()
        .into_par_iter()
        .flat_map_iter(|cell| {
            let mut local = Vec::new();
            let home = grid.windows(cell).expect("occupied cell");
            let around: Vec<&[Vec<InstanceId>]> = (-1..=1)
                .flat_map(|dx| (-1..=1).map(move |dy| (cell.0 + dx, cell.1 + dy)))
                .filter_map(|c| grid.windows(c))
                .collect();
            for (t, anchors) in home.iter().enumerate() {
                let lo = t.saturating_sub(max_span);
                let hi = (t + max_span).min(n_windows - 1);
                for &a in anchors {
                    let ia = series.get(a);
                    let span_a = span_of(a);
                    for buckets in &around {
                        for (t2, bucket) in buckets.iter().enumerate().take(hi + 1).skip(lo) {
                            let dt = t.abs_diff(t2) as u32;
                            for &b in bucket {
                                if b <= a {
                                    continue;
                                }
                                let ib = series.get(b);
                                if ib.feature == ia.feature {
                                    continue;
                                }
                                if !config.temporal.within(dt, span_a.max(span_of(b))) {
                                    continue;
                                }
                                if dist_sq(ia.position(), ib.position()) <= d_sq {
                                    local.push(NeighborPair { a, b });
                                }
                            }
                        }
                    }
                }
            }
            local
        })
        .collect();
    pairs.par_sort_unstable();
    Ok(pairs)
}

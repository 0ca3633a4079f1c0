//! Mining prevalent maximal dynamic co-location patterns from a time series
//! of spatial snapshots.
//!
//! Snapshots are differenced into new/dead instances, neighbor pairs are found
//! with a spatio-temporal grid, prevalent size-2 patterns form a feature graph,
//! and maximal cliques of that graph are verified top-down.
//!
//! The pipeline is generic over the coordinate type; see [`Scalar`].

pub mod bench;
mod bits;
pub mod clique;
pub mod datagen;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod model;
pub mod neighborhood;
pub mod oracle;
pub mod pipeline;
pub mod scalar;
pub mod size2;
pub mod snapshot;
pub mod verify;

pub use clique::maximal_cliques;
pub use datagen::{generate, GenConfig, GenReport};
pub use error::{Error, Result};
pub use model::{
    span_constraint, BaseFeature, Comparison, DynamicFeature, DynamicInstance, FeatureClique,
    FeatureId, FeatureUniverse, InstanceId, Kind, LifeCycles, MiningConfig, Pattern, Spans,
};
pub use oracle::{bron_kerbosch, brute_force_maximal, join_based_mine, OracleConfig};
pub use pipeline::{mine, Algorithm, MineOptions, MineReport};
pub use neighborhood::{neighbor_pairs, GridIndex, NeighborPair};
pub use scalar::Scalar;
pub use size2::{
    build_feature_graph, dpi, dpr, prevalent_size2, size2_table_instances, FeatureCounts,
    FeatureGraph, Row, TableInstance,
};
pub use snapshot::{diff_snapshots, DynamicDatasetSeries, SeriesRecord, Snapshot, SnapshotRecord};
pub use verify::{
    candidate_table_instance, derive_all_prevalent, verify_all, PatternResult, Pruning,
    VerifyOutcome, VerifyStats,
};

/// Exact rational coordinates.
pub type Exact = num_rational::Ratio<i64>;

pub type Series = DynamicDatasetSeries<f64>;
pub type Series32 = DynamicDatasetSeries<f32>;
pub type ExactSeries = DynamicDatasetSeries<Exact>;
pub type Config = MiningConfig<f64>;
pub type Instance = DynamicInstance<f64>;

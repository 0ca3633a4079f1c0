//! Small hand-built and seeded random inputs shared by tests, the acceptance
//! suite and the CLI `check` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{DynamicFeature, FeatureId, Kind, LifeCycles, MiningConfig, Spans};
use crate::size2::FeatureGraph;
use crate::snapshot::{DynamicDatasetSeries, SeriesRecord, Snapshot};

/// The running example: three base features, two snapshots, one window.
///
/// With `d_d = 10` the neighbor pairs are
/// `A_new.1-B_new.2, A_new.2-B_new.2, A_new.1-C_new.3, A_new.3-C_new.3,
/// A_dead.1-B_new.1, A_dead.1-B_new.2, A_dead.2-B_new.1, A_dead.1-C_dead.2,
/// B_new.1-C_dead.2, A_dead.2-B_dead.1`. The persistent `D` object produces
/// no dynamic instance.
pub fn example_snapshots() -> Vec<Snapshot<f64>> {
    let mut t0 = Snapshot::new(0);
    let mut t1 = Snapshot::new(1);
    for (f, id, x, y) in [
        ("A", "5", 8.0, 0.0),
        ("A", "6", 22.0, -6.0),
        ("B", "3", 28.0, -12.0),
        ("C", "4", 400.0, 100.0),
        ("C", "5", 12.0, 6.0),
        ("D", "1", 5.0, 5.0),
    ] {
        t0.push(f, id, x, y);
    }
    for (f, id, x, y) in [
        ("A", "1", 0.0, 8.0),
        ("A", "2", -8.0, -3.0),
        ("A", "3", -6.0, 22.0),
        ("A", "4", 100.0, 100.0),
        ("B", "1", 16.0, 0.0),
        ("B", "2", 0.0, 0.0),
        ("C", "1", 200.0, 100.0),
        ("C", "2", 300.0, 100.0),
        ("C", "3", -2.0, 16.0),
        ("D", "1", 5.0, 5.0),
    ] {
        t1.push(f, id, x, y);
    }
    vec![t0, t1]
}

/// Thresholds for the running example.
pub fn example_config() -> MiningConfig<f64> {
    MiningConfig::new(10.0, 0.3, 3.0).expect("valid example thresholds")
}

/// Life cycles for the running example; with a single window they do not
/// affect the result.
pub fn example_life_cycles() -> LifeCycles {
    LifeCycles::uniform(["A", "B", "C"], 9.0).expect("positive life cycle")
}

/// A randomly generated input small enough for the exhaustive oracles.
#[derive(Debug, Clone)]
pub struct SmallCase {
    pub seed: u64,
    pub series: DynamicDatasetSeries<f64>,
    pub life_cycles: LifeCycles,
    pub config: MiningConfig<f64>,
}

impl SmallCase {
    pub fn spans(&self) -> Result<Spans> {
        Spans::from_life_cycles(
            self.series.universe(),
            &self.life_cycles,
            self.config.time_span,
        )
    }
}

/// Limits for [`small_case`].
#[derive(Debug, Clone, Copy)]
pub struct SmallCaseLimits {
    pub max_base_features: usize,
    pub max_instances: usize,
    pub max_windows: usize,
}

impl Default for SmallCaseLimits {
    fn default() -> Self {
        Self {
            max_base_features: 8,
            max_instances: 150,
            max_windows: 5,
        }
    }
}

/// Clustered random series. Most instances fall on small shared sites so that
/// size-3 and larger patterns actually occur.
pub fn small_case(seed: u64, limits: SmallCaseLimits) -> SmallCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_base = rng.gen_range(2..=limits.max_base_features.max(2));
    let n_windows = rng.gen_range(1..=limits.max_windows.max(1));
    let n_instances = rng.gen_range(10..=limits.max_instances.max(10));
    let d_d = rng.gen_range(4..=12) as f64;
    let min_prev = [0.1, 0.2, 0.25, 0.3, 0.4, 0.5][rng.gen_range(0..6)];
    let area = 100.0;

    let bases: Vec<String> = (0..n_base).map(|i| base_name(i)).collect();
    // a few instances per site keeps instance-level cliques, and rows, small
    let n_sites = (n_instances / rng.gen_range(3..=8)).max(1);
    let centers: Vec<(f64, f64, usize)> = (0..n_sites)
        .map(|_| {
            (
                rng.gen_range(0.0..area),
                rng.gen_range(0.0..area),
                rng.gen_range(0..n_windows),
            )
        })
        .collect();

    let mut ordinals = std::collections::HashMap::new();
    let mut records = Vec::with_capacity(n_instances);
    for _ in 0..n_instances {
        let base = &bases[rng.gen_range(0..n_base)];
        let kind = if rng.gen_bool(0.5) { Kind::New } else { Kind::Dead };
        let (x, y, t) = if rng.gen_bool(0.75) {
            let (cx, cy, ct) = centers[rng.gen_range(0..centers.len())];
            let t = if rng.gen_bool(0.7) { ct } else { rng.gen_range(0..n_windows) };
            (
                cx + rng.gen_range(-d_d..=d_d) * 0.6,
                cy + rng.gen_range(-d_d..=d_d) * 0.6,
                t,
            )
        } else {
            (
                rng.gen_range(0.0..area),
                rng.gen_range(0.0..area),
                rng.gen_range(0..n_windows),
            )
        };
        let feature = DynamicFeature::new(base.as_str(), kind);
        let ord = ordinals.entry(feature.clone()).or_insert(0u32);
        *ord += 1;
        records.push(SeriesRecord {
            feature,
            ordinal: *ord,
            // integer thousandths keep the CSV round trip exact
            x: (x * 1000.0).round() / 1000.0,
            y: (y * 1000.0).round() / 1000.0,
            t_index: t as u32,
        });
    }
    let series = DynamicDatasetSeries::from_records(n_windows, records)
        .expect("generated records are consistent");
    let life_cycles = LifeCycles::new(bases.iter().map(|b| crate::model::BaseFeature {
        id: b.clone(),
        life_cycle: rng.gen_range(1..=30) as f64,
    }))
    .expect("positive life cycles");
    SmallCase {
        seed,
        series,
        life_cycles,
        config: MiningConfig::new(d_d, min_prev, 3.0).expect("valid thresholds"),
    }
}

/// Random simple graph on `n` vertices where each edge is present with
/// probability `density`.
pub fn random_graph(seed: u64, n: usize, density: f64) -> FeatureGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            if rng.gen_bool(density) {
                edges.push((FeatureId(a), FeatureId(b)));
            }
        }
    }
    let mut g = FeatureGraph::from_edges(edges);
    for v in 0..n as u32 {
        g.add_vertex(FeatureId(v));
    }
    g
}

/// `A`, `B`, ..., `Z`, `AA`, `AB`, ...
pub fn base_name(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

//! Seeded synthetic snapshot series with planted co-location patterns.
//!
//! Every planned dynamic instance is an *event*: a birth (the object appears
//! at `t_{k+1}`) or a death (the object exists from `t_0` and is gone at
//! `t_{k+1}`). Diffing the snapshots therefore yields exactly one dynamic
//! instance per event, in window `k`.
//!
//! A `churn_ratio` share of the events is planted. Each of the
//! `cluster_count` planted clusters owns a set of dynamic features (distinct
//! base features, 2 to `max_cluster_features` of them). A planted group event
//! picks a cluster round robin, a window and a fresh site center uniformly in
//! the area, then emits one event per cluster feature placed uniformly in the
//! disc of radius `cluster_radius` around that center. Each group is a row
//! instance whenever `2 * cluster_radius <= d_d`. The remaining events pick a
//! random feature, kind, window and position. `background_per_feature` static
//! objects per base feature are present at every time point and produce no
//! events.
//!
//! Positions are integer multiples of 0.001 so CSV round trips are exact.
//! The generator is ChaCha8 seeded from `seed`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixtures::base_name;
use crate::model::{BaseFeature, DynamicFeature, Kind, LifeCycles};
use crate::snapshot::Snapshot;

pub const DEFAULT_LIFE_CYCLES: [f64; 10] = [9.0, 3.0, 30.0, 15.0, 27.0, 24.0, 30.0, 3.0, 24.0, 18.0];

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub area: (f64, f64),
    pub n_time_points: usize,
    pub time_span: f64,
    pub n_base_features: usize,
    pub life_cycles: Vec<f64>,
    pub n_dynamic_instances: usize,
    pub cluster_count: usize,
    pub cluster_radius: f64,
    pub max_cluster_features: usize,
    pub churn_ratio: f64,
    pub background_per_feature: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            area: (1000.0, 1000.0),
            n_time_points: 11,
            time_span: 3.0,
            n_base_features: 10,
            life_cycles: DEFAULT_LIFE_CYCLES.to_vec(),
            n_dynamic_instances: 10_000,
            cluster_count: 10,
            cluster_radius: 15.0,
            max_cluster_features: 4,
            churn_ratio: 0.5,
            background_per_feature: 10,
            seed: 1,
        }
    }
}

impl GenConfig {
    /// The defaults with a different instance count and feature count.
    /// Life cycles cycle through the default list.
    pub fn scaled(n_dynamic_instances: usize, n_base_features: usize, seed: u64) -> Self {
        Self {
            n_dynamic_instances,
            n_base_features,
            life_cycles: (0..n_base_features)
                .map(|i| DEFAULT_LIFE_CYCLES[i % DEFAULT_LIFE_CYCLES.len()])
                .collect(),
            seed,
            ..Self::default()
        }
    }

    fn planted_budget(&self) -> usize {
        (self.churn_ratio * self.n_dynamic_instances as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.area;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::config("area must be positive"));
        }
        if self.n_time_points < 2 {
            return Err(Error::config("at least two time points are needed"));
        }
        if self.n_base_features == 0 {
            return Err(Error::config("at least one base feature is needed"));
        }
        if self.life_cycles.len() != self.n_base_features {
            return Err(Error::config(format!(
                "{} life cycles given for {} base features",
                self.life_cycles.len(),
                self.n_base_features
            )));
        }
        if !(0.0..=1.0).contains(&self.churn_ratio) {
            return Err(Error::config("churn_ratio must lie in [0, 1]"));
        }
        if !(self.cluster_radius >= 0.0 && self.cluster_radius <= w.min(h) / 2.0) {
            return Err(Error::config(
                "cluster_radius must lie in [0, min(width, height) / 2]",
            ));
        }
        if self.planted_budget() > 0 {
            if self.cluster_count == 0 {
                return Err(Error::config("churn_ratio > 0 needs at least one cluster"));
            }
            if self.max_cluster_features < 2 || self.n_base_features < 2 {
                return Err(Error::config(
                    "clusters need at least two features and two base features",
                ));
            }
            let smallest_round = 2 * self.cluster_count;
            if self.planted_budget() < smallest_round {
                return Err(Error::config(format!(
                    "{} planted instances cannot seed {} clusters",
                    self.planted_budget(),
                    self.cluster_count
                )));
            }
        }
        LifeCycles::new(self.base_ids().into_iter().zip(&self.life_cycles).map(
            |(id, &life_cycle)| BaseFeature { id, life_cycle },
        ))?;
        Ok(())
    }

    pub fn base_ids(&self) -> Vec<String> {
        (0..self.n_base_features).map(base_name).collect()
    }

    pub fn life_cycles(&self) -> Result<LifeCycles> {
        LifeCycles::new(
            self.base_ids()
                .into_iter()
                .zip(&self.life_cycles)
                .map(|(id, &life_cycle)| BaseFeature { id, life_cycle }),
        )
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown keys fail.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut explicit_lc = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(Some(n as u64 + 1), "expected `key = value`"))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::format(Some(n as u64 + 1), e.to_string()))?;
            explicit_lc |= k.trim() == "life_cycles";
        }
        if !explicit_lc && cfg.life_cycles.len() != cfg.n_base_features {
            cfg.life_cycles = Self::scaled(0, cfg.n_base_features, 0).life_cycles;
        }
        Ok(cfg)
    }

    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<V: std::str::FromStr>(key: &str, v: &str) -> Result<V> {
            v.parse()
                .map_err(|_| Error::config(format!("invalid value `{v}` for {key}")))
        }
        match key {
            "area" => {
                let (w, h) = value
                    .split_once(['x', ','])
                    .ok_or_else(|| Error::config("area is `width x height`"))?;
                self.area = (num(key, w.trim())?, num(key, h.trim())?);
            }
            "n_time_points" => self.n_time_points = num(key, value)?,
            "time_span" => self.time_span = num(key, value)?,
            "n_base_features" => self.n_base_features = num(key, value)?,
            "life_cycles" => {
                self.life_cycles = value
                    .split(',')
                    .map(|v| num(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "n_dynamic_instances" => self.n_dynamic_instances = num(key, value)?,
            "cluster_count" => self.cluster_count = num(key, value)?,
            "cluster_radius" => self.cluster_radius = num(key, value)?,
            "max_cluster_features" => self.max_cluster_features = num(key, value)?,
            "churn_ratio" => self.churn_ratio = num(key, value)?,
            "background_per_feature" => self.background_per_feature = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCluster {
    pub features: Vec<DynamicFeature>,
    pub radius: f64,
    /// Group events, each at its own site.
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenReport {
    pub seed: u64,
    pub n_windows: usize,
    /// `[window][feature] -> count`, keyed by dynamic feature.
    pub per_window: Vec<BTreeMap<DynamicFeature, usize>>,
    pub clusters: Vec<PlantedCluster>,
    pub planted_instances: usize,
    pub uniform_instances: usize,
}

impl GenReport {
    pub fn total(&self) -> usize {
        self.per_window.iter().flat_map(|w| w.values()).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "windows: {}", self.n_windows);
        let _ = writeln!(s, "dynamic_instances: {}", self.total());
        let _ = writeln!(s, "planted_instances: {}", self.planted_instances);
        let _ = writeln!(s, "uniform_instances: {}", self.uniform_instances);
        for (i, c) in self.clusters.iter().enumerate() {
            let names: Vec<String> = c.features.iter().map(|f| f.to_string()).collect();
            let _ = writeln!(
                s,
                "cluster {}: {{{}}} radius={} events={}",
                i + 1,
                names.join(","),
                c.radius,
                c.events
            );
        }
        for (k, w) in self.per_window.iter().enumerate() {
            let cells: Vec<String> = w.iter().map(|(f, n)| format!("{f}={n}")).collect();
            let _ = writeln!(s, "window {k}: {}", cells.join(" "));
        }
        s
    }
}

struct Object {
    base: usize,
    id: u32,
    pos: (f64, f64),
    /// Present at time points `born..died`.
    born: usize,
    died: usize,
}

fn thousandths(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn in_disc(rng: &mut ChaCha8Rng, c: (f64, f64), r: f64, area: (f64, f64)) -> (f64, f64) {
    loop {
        let dx = rng.gen_range(-1.0..=1.0);
        let dy = rng.gen_range(-1.0..=1.0);
        if dx * dx + dy * dy > 1.0 {
            continue;
        }
        // rounding may push a point out by half a thousandth; keep it inside
        // the disc at the cost of a rejection
        let p = (thousandths(c.0 + dx * r), thousandths(c.1 + dy * r));
        let (ex, ey) = (p.0 - c.0, p.1 - c.1);
        if ex * ex + ey * ey <= r * r && (0.0..=area.0).contains(&p.0) && (0.0..=area.1).contains(&p.1)
        {
            return p;
        }
    }
}

pub fn generate(config: &GenConfig) -> Result<(Vec<Snapshot<f64>>, GenReport)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (w, h) = config.area;
    let n_windows = config.n_time_points - 1;
    let n_base = config.n_base_features;
    let bases = config.base_ids();
    let r = config.cluster_radius;

    let mut clusters: Vec<PlantedCluster> = Vec::new();
    let budget = config.planted_budget();
    if budget > 0 {
        let mut base_pool: Vec<usize> = (0..n_base).collect();
        for _ in 0..config.cluster_count {
            let size = rng.gen_range(2..=config.max_cluster_features.min(n_base));
            base_pool.shuffle(&mut rng);
            let mut chosen: Vec<usize> = base_pool[..size].to_vec();
            chosen.sort_unstable();
            let mut features: Vec<DynamicFeature> = chosen
                .iter()
                .map(|&b| {
                    let kind = if rng.gen_bool(0.5) { Kind::New } else { Kind::Dead };
                    DynamicFeature::new(bases[b].as_str(), kind)
                })
                .collect();
            features.sort();
            clusters.push(PlantedCluster {
                features,
                radius: r,
                events: 0,
            });
        }
    }

    let mut objects: Vec<Object> = Vec::new();
    let mut next_id = vec![1u32; n_base];
    let mut per_window: Vec<BTreeMap<DynamicFeature, usize>> = vec![BTreeMap::new(); n_windows];
    let base_index = |f: &DynamicFeature| bases.iter().position(|b| **b == *f.base).expect("known base");
    let mut emit = |objects: &mut Vec<Object>, f: &DynamicFeature, pos: (f64, f64), k: usize| {
        let base = base_index(f);
        let id = next_id[base];
        next_id[base] += 1;
        let (born, died) = match f.kind {
            Kind::New => (k + 1, n_windows + 1),
            Kind::Dead => (0, k + 1),
        };
        objects.push(Object {
            base,
            id,
            pos,
            born,
            died,
        });
        *per_window[k].entry(f.clone()).or_insert(0) += 1;
    };

    // planted groups, round robin over clusters until the budget is used
    let mut planted = 0;
    let mut stalled = 0;
    let mut c = 0;
    while !clusters.is_empty() && stalled < clusters.len() {
        let size = clusters[c].features.len();
        if planted + size <= budget {
            let k = rng.gen_range(0..n_windows);
            let center = (rng.gen_range(r..=w - r), rng.gen_range(r..=h - r));
            for f in clusters[c].features.clone() {
                let pos = in_disc(&mut rng, center, r, config.area);
                emit(&mut objects, &f, pos, k);
            }
            clusters[c].events += 1;
            planted += size;
            stalled = 0;
        } else {
            stalled += 1;
        }
        c = (c + 1) % clusters.len();
    }

    let uniform = config.n_dynamic_instances - planted;
    for _ in 0..uniform {
        let b = rng.gen_range(0..n_base);
        let kind = if rng.gen_bool(0.5) { Kind::New } else { Kind::Dead };
        let pos = (
            thousandths(rng.gen_range(0.0..=w)),
            thousandths(rng.gen_range(0.0..=h)),
        );
        let k = rng.gen_range(0..n_windows);
        emit(&mut objects, &DynamicFeature::new(bases[b].as_str(), kind), pos, k);
    }

    for b in 0..n_base {
        for _ in 0..config.background_per_feature {
            let id = next_id[b];
            next_id[b] += 1;
            objects.push(Object {
                base: b,
                id,
                pos: (
                    thousandths(rng.gen_range(0.0..=w)),
                    thousandths(rng.gen_range(0.0..=h)),
                ),
                born: 0,
                died: n_windows + 1,
            });
        }
    }

    objects.sort_by_key(|o| (o.base, o.id));
    let snapshots = (0..config.n_time_points)
        .map(|t| {
            let mut s = Snapshot::new(t as u32);
            for o in objects.iter().filter(|o| o.born <= t && t < o.died) {
                s.push(bases[o.base].as_str(), o.id.to_string(), o.pos.0, o.pos.1);
            }
            s
        })
        .collect();

    Ok((
        snapshots,
        GenReport {
            seed: config.seed,
            n_windows,
            per_window,
            clusters,
            planted_instances: planted,
            uniform_instances: uniform,
        },
    ))
}

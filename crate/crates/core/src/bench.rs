//! Parameter sweeps over generated data, one CSV row per point and algorithm.
//!
//! A sweep spec holds `key = v1, v2, ...` lines. Each of `instances`, `d_d`,
//! `min_prev` and `features` that appears is swept on its own while the
//! others stay at the base point. The base point defaults to 10000 instances,
//! 10 base features, `d_d = 35` and `min_prev = 0.1`, and can be moved with
//! `base.<key> = value`. `algos` picks from `mdc`, `mdc-noprune` and `join`;
//! `seed` and `repeats` (best of n) complete a sweep spec. Generator settings
//! other than size, feature count and seed are overridden with
//! `gen.<key> = value`, using the generator's config keys.
//!
//! For the MDC variants `millis` covers maximal mining only; the prevalent
//! count comes from expanding the maximal set afterwards. The join baseline
//! mines every prevalent pattern directly, so its time covers that.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use crate::datagen::{generate, GenConfig};
use crate::error::{Error, Result};
use crate::model::{MiningConfig, Spans};
use crate::pipeline::{mine, Algorithm, MineOptions};
use crate::snapshot::{diff_snapshots, DynamicDatasetSeries};
use crate::verify::Pruning;

pub const BENCH_HEADER: [&str; 6] = [
    "param",
    "value",
    "algo",
    "maximal_count",
    "prevalent_count",
    "millis",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchAlgo {
    Mdc,
    MdcNoPrune,
    Join,
}

impl BenchAlgo {
    fn options(self) -> MineOptions {
        match self {
            BenchAlgo::Mdc => MineOptions::default(),
            BenchAlgo::MdcNoPrune => MineOptions {
                pruning: Pruning::NONE,
                ..MineOptions::default()
            },
            BenchAlgo::Join => MineOptions {
                algorithm: Algorithm::Join,
                derive_all: true,
                ..MineOptions::default()
            },
        }
    }
}

impl fmt::Display for BenchAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchAlgo::Mdc => "mdc",
            BenchAlgo::MdcNoPrune => "mdc-noprune",
            BenchAlgo::Join => "join",
        })
    }
}

impl FromStr for BenchAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mdc" => Ok(BenchAlgo::Mdc),
            "mdc-noprune" => Ok(BenchAlgo::MdcNoPrune),
            "join" => Ok(BenchAlgo::Join),
            _ => Err(Error::config(format!("unknown algo `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchPoint {
    pub instances: usize,
    pub features: usize,
    pub d_d: f64,
    pub min_prev: f64,
}

impl Default for BenchPoint {
    fn default() -> Self {
        Self {
            instances: 10_000,
            features: 10,
            d_d: 35.0,
            min_prev: 0.1,
        }
    }
}

impl BenchPoint {
    fn with(mut self, param: &str, value: f64) -> Self {
        match param {
            "instances" => self.instances = value as usize,
            "features" => self.features = value as usize,
            "d_d" => self.d_d = value,
            _ => self.min_prev = value,
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: BenchPoint,
    /// `(param, values)` in spec order.
    pub sweeps: Vec<(String, Vec<f64>)>,
    pub algos: Vec<BenchAlgo>,
    pub seed: u64,
    pub repeats: usize,
    /// Generator overrides, applied in order.
    pub gen: Vec<(String, String)>,
}

const PARAMS: [&str; 4] = ["instances", "d_d", "min_prev", "features"];

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SweepSpec {
            base: BenchPoint::default(),
            sweeps: Vec::new(),
            algos: vec![BenchAlgo::Mdc, BenchAlgo::Join],
            seed: 1,
            repeats: 1,
            gen: Vec::new(),
        };
        for (n, raw) in text.lines().enumerate() {
            let line_no = Some(n as u64 + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once('=')
                .ok_or_else(|| Error::format(line_no, "expected `key = v1, v2, ...`"))?;
            let key = key.trim();
            let values: Vec<&str> = values.split(',').map(str::trim).collect();
            let nums = || -> Result<Vec<f64>> {
                values
                    .iter()
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| Error::format(line_no, format!("invalid number `{v}`")))
                    })
                    .collect()
            };
            let single = || -> Result<f64> {
                match nums()?.as_slice() {
                    [v] => Ok(*v),
                    _ => Err(Error::format(line_no, format!("{key} takes one value"))),
                }
            };
            match key {
                k if PARAMS.contains(&k) => spec.sweeps.push((k.to_owned(), nums()?)),
                k if k.strip_prefix("base.").is_some_and(|p| PARAMS.contains(&p)) => {
                    spec.base = spec.base.with(&k[5..], single()?);
                }
                "algos" => {
                    spec.algos = values
                        .iter()
                        .map(|v| v.parse().map_err(|e: Error| Error::format(line_no, e.to_string())))
                        .collect::<Result<_>>()?
                }
                k if k.starts_with("gen.") => {
                    let key = &k[4..];
                    if ["n_dynamic_instances", "n_base_features", "life_cycles", "seed"].contains(&key) {
                        return Err(Error::format(line_no, format!("{key} is set by the sweep")));
                    }
                    let value = line.split_once('=').expect("checked").1.trim().to_owned();
                    GenConfig::default()
                        .set(key, &value)
                        .map_err(|e| Error::format(line_no, e.to_string()))?;
                    spec.gen.push((key.to_owned(), value));
                }
                "seed" => spec.seed = single()? as u64,
                "repeats" => spec.repeats = (single()? as usize).max(1),
                _ => return Err(Error::format(line_no, format!("unknown key `{key}`"))),
            }
        }
        Ok(spec)
    }

    /// Generator config for a point.
    pub fn gen_config(&self, point: &BenchPoint) -> Result<GenConfig> {
        let mut cfg = GenConfig::scaled(point.instances, point.features, self.seed);
        for (k, v) in &self.gen {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every `(param, value, point)` in run order.
    pub fn points(&self) -> Vec<(String, f64, BenchPoint)> {
        self.sweeps
            .iter()
            .flat_map(|(p, vs)| vs.iter().map(move |&v| (p.clone(), v, self.base.with(p, v))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub param: String,
    pub value: f64,
    pub algo: BenchAlgo,
    pub maximal_count: usize,
    pub prevalent_count: usize,
    pub elapsed: Duration,
}

struct Dataset {
    series: DynamicDatasetSeries<f64>,
    life_cycles: crate::model::LifeCycles,
    time_span: f64,
}

fn dataset(cfg: &GenConfig) -> Result<Dataset> {
    let (snaps, _) = generate(cfg)?;
    Ok(Dataset {
        series: diff_snapshots(&snaps)?,
        life_cycles: cfg.life_cycles()?,
        time_span: cfg.time_span,
    })
}

/// Runs one algorithm at one point, best of `repeats`.
pub fn run_point(
    series: &DynamicDatasetSeries<f64>,
    spans: &Spans,
    config: &MiningConfig<f64>,
    algo: BenchAlgo,
    repeats: usize,
) -> Result<(usize, usize, Duration)> {
    let mut best: Option<(usize, usize, Duration)> = None;
    for _ in 0..repeats.max(1) {
        let options = algo.options();
        let (maximal, prevalent, elapsed) = match algo {
            BenchAlgo::Join => {
                let r = mine(series, spans, config, options)?;
                (r.maximal_count(), r.patterns.len(), r.timings.total())
            }
            _ => {
                let r = mine(
                    series,
                    spans,
                    config,
                    MineOptions {
                        derive_all: true,
                        ..options
                    },
                )?;
                let t = r.timings.total() - r.timings.derive;
                (r.maximal_count(), r.patterns.len(), t)
            }
        };
        if best.is_none_or(|b| elapsed < b.2) {
            best = Some((maximal, prevalent, elapsed));
        }
    }
    Ok(best.expect("at least one repeat"))
}

pub fn run_sweep(spec: &SweepSpec, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut cache: HashMap<(usize, usize), Dataset> = HashMap::new();
    let mut rows = Vec::new();
    for (param, value, point) in spec.points() {
        let key = (point.instances, point.features);
        if !cache.contains_key(&key) {
            cache.insert(key, dataset(&spec.gen_config(&point)?)?);
        }
        let data = &cache[&key];
        let config = MiningConfig::new(point.d_d, point.min_prev, data.time_span)?;
        let spans =
            Spans::from_life_cycles(data.series.universe(), &data.life_cycles, data.time_span)?;
        for &algo in &spec.algos {
            let (maximal_count, prevalent_count, elapsed) =
                run_point(&data.series, &spans, &config, algo, spec.repeats)?;
            let row = BenchRow {
                param: param.clone(),
                value,
                algo,
                maximal_count,
                prevalent_count,
                elapsed,
            };
            progress(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_bench(rows: &[BenchRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BENCH_HEADER)?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            r.value.to_string(),
            r.algo.to_string(),
            r.maximal_count.to_string(),
            r.prevalent_count.to_string(),
            format!("{:.3}", r.elapsed.as_secs_f64() * 1000.0),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_spec() {
        let spec = SweepSpec::parse(
            "d_d = 15, 20, 25\nmin_prev = 0.2\nbase.instances = 500\nalgos = mdc, join\nseed = 4\n",
        )
        .unwrap();
        assert_eq!(spec.base.instances, 500);
        assert_eq!(spec.seed, 4);
        let pts = spec.points();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].2.d_d, 15.0);
        assert_eq!(pts[3].2.min_prev, 0.2);
        assert_eq!(pts[3].2.d_d, 35.0);
        assert!(SweepSpec::parse("radius = 3").is_err());
        assert!(SweepSpec::parse("algos = fast").is_err());
        assert!(SweepSpec::parse("d_d = x").is_err());
        let spec = SweepSpec::parse("gen.churn_ratio = 0.9\ngen.area = 500 x 500").unwrap();
        let cfg = spec.gen_config(&spec.base).unwrap();
        assert_eq!((cfg.churn_ratio, cfg.area), (0.9, (500.0, 500.0)));
        assert!(SweepSpec::parse("gen.seed = 3").is_err());
        assert!(SweepSpec::parse("gen.churn = 3").is_err());
    }

    #[test]
    fn single_point_gives_one_row_per_algo() {
        let spec =
            SweepSpec::parse("base.instances = 300\nbase.features = 4\nd_d = 35\nalgos = mdc, mdc-noprune, join")
                .unwrap();
        let rows = run_sweep(&spec, |_| {}).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.maximal_count <= r.prevalent_count));
        assert_eq!(rows[0].maximal_count, rows[1].maximal_count);
        assert_eq!(rows[0].prevalent_count, rows[2].prevalent_count);
        assert_eq!(rows[0].maximal_count, rows[2].maximal_count);
        let mut buf = Vec::new();
        write_bench(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("param,value,algo,maximal_count,prevalent_count,millis\nd_d,35,mdc,"));
    }
}

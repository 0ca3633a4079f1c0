use mdc_core::io::write_snapshots;
use mdc_core::{
    diff_snapshots, generate, mine, DynamicFeature, GenConfig, MineOptions, MiningConfig, Pattern,
    Spans,
};

fn csv(cfg: &GenConfig) -> Vec<u8> {
    let (snaps, _) = generate(cfg).unwrap();
    let mut buf = Vec::new();
    write_snapshots(&snaps, &mut buf).unwrap();
    buf
}

#[test]
fn same_seed_gives_identical_csv() {
    let cfg = GenConfig::scaled(1500, 6, 11);
    assert_eq!(csv(&cfg), csv(&cfg));
}

#[test]
fn default_config_validates() {
    let cfg = GenConfig::default();
    assert_eq!(cfg.area, (1000.0, 1000.0));
    assert_eq!(cfg.n_time_points, 11);
    assert_eq!(cfg.n_dynamic_instances, 10_000);
    assert_eq!(cfg.life_cycles, [9.0, 3.0, 30.0, 15.0, 27.0, 24.0, 30.0, 3.0, 24.0, 18.0]);
    cfg.validate().unwrap();
}

fn mine_generated(cfg: &GenConfig, derive_all: bool) -> (mdc_core::DynamicDatasetSeries<f64>, mdc_core::MineReport) {
    let (snaps, _) = generate(cfg).unwrap();
    let series = diff_snapshots(&snaps).unwrap();
    let config = MiningConfig::new(35.0, 0.1, cfg.time_span).unwrap();
    let spans =
        Spans::from_life_cycles(series.universe(), &cfg.life_cycles().unwrap(), cfg.time_span)
            .unwrap();
    let options = MineOptions {
        derive_all,
        ..MineOptions::default()
    };
    let mined = mine(&series, &spans, &config, options).unwrap();
    (series, mined)
}

/// Every planted feature set shows up inside some mined maximal pattern.
#[test]
fn planted_clusters_are_recovered() {
    for seed in 0..10 {
        let cfg = GenConfig::scaled(2000, 10, seed);
        assert!(cfg.churn_ratio >= 0.5);
        let (_, report) = generate(&cfg).unwrap();
        let (series, mined) = mine_generated(&cfg, false);
        for c in &report.clusters {
            let planted = Pattern::new(c.features.iter().map(|f: &DynamicFeature| {
                series.universe().id_of(f).expect("planted feature occurs")
            }))
            .unwrap();
            assert!(
                mined.patterns.iter().any(|m| planted.is_subset_of(&m.pattern)),
                "seed {seed}: {} not recovered",
                series.universe().display(&planted)
            );
        }
    }
}

/// Pure noise still yields chance size-2 patterns at `min_prev = 0.1`, since
/// a feature with few instances needs only a handful of chance neighbors.
/// Larger patterns stay rare next to planted data of the same size.
#[test]
fn no_churn_plants_nothing_and_leaves_little_beyond_pairs() {
    let larger = |cfg: &GenConfig| -> usize {
        let (_, mined) = mine_generated(cfg, true);
        mined.counts_by_size().range(3..).map(|(_, n)| n).sum()
    };
    for seed in 0..5 {
        let noise = GenConfig {
            churn_ratio: 0.0,
            ..GenConfig::scaled(1000, 10, seed)
        };
        let (_, report) = generate(&noise).unwrap();
        assert_eq!(report.planted_instances, 0);
        assert_eq!(report.uniform_instances, report.total());
        let planted = GenConfig::scaled(1000, 10, seed);
        let (from_noise, from_planted) = (larger(&noise), larger(&planted));
        assert!(
            4 * from_noise <= from_planted,
            "seed {seed}: {from_noise} vs {from_planted}"
        );
    }
}

use std::fs::File;

use chrono::{Duration, TimeZone, Utc};
use ghforecast::experiment::{self, DataSource, ExperimentConfig};
use ghforecast::pipeline::{
    compute_sdv, interpolate_weekly_to_daily, Column, Interval, PreparedDataset, SplitSpec, TimeSeriesTable,
};
use ghforecast::synth::{self, Scenario};
use proptest::prelude::*;

fn write_synth_files(scenario: Scenario, dir: &std::path::Path) -> ExperimentConfig {
    let cfg = ExperimentConfig::new(scenario);
    let DataSource::Synth(s) = &cfg.source else {
        unreachable!()
    };
    let data = synth::generate(s).unwrap();
    let hourly = dir.join("hourly.csv");
    data.hourly.write_csv(File::create(&hourly).unwrap()).unwrap();
    let weekly = data.weekly.map(|w| {
        let p = dir.join("weekly.csv");
        w.write_csv(File::create(&p).unwrap()).unwrap();
        p
    });
    ExperimentConfig {
        source: DataSource::Files { hourly, weekly },
        ..cfg
    }
}

#[test]
fn csv_round_trip_gives_the_same_dataset() {
    for scenario in [Scenario::FicusSdv, Scenario::TomatoYield] {
        let dir = tempfile::tempdir().unwrap();
        let from_files = experiment::prepare(&write_synth_files(scenario, dir.path())).unwrap();
        let direct = experiment::prepare(&ExperimentConfig::new(scenario)).unwrap();
        assert_eq!(from_files.counts, direct.counts);
        assert_eq!(from_files.test.target_times(), direct.test.target_times());
        for (a, b) in from_files.test.targets().iter().zip(direct.test.targets()) {
            assert!((a - b).abs() < 1e-9, "{scenario}: {a} vs {b}");
        }
    }
}

#[test]
fn preparation_is_deterministic() {
    let cfg = ExperimentConfig::new(Scenario::TomatoYield);
    let a = experiment::prepare(&cfg).unwrap();
    let b = experiment::prepare(&cfg).unwrap();
    assert_eq!(a.manifest(), b.manifest());
    assert_eq!(a.test.targets(), b.test.targets());
}

#[test]
fn normalization_ignores_rows_after_training() {
    let table = experiment::model_table(&ExperimentConfig::new(Scenario::FicusSdv)).unwrap();
    let spec = SplitSpec::default();
    let base = PreparedDataset::prepare(&table, "sdv", 7, &spec).unwrap();
    let train_end = 7 + base.counts.train;

    // Blow up every row the training samples do not read.
    let spiked = TimeSeriesTable::new(
        table.timestamps().to_vec(),
        table
            .columns()
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: c
                    .values
                    .iter()
                    .enumerate()
                    .map(|(r, v)| if r >= train_end { v * 1e3 + 1e3 } else { *v })
                    .collect(),
            })
            .collect(),
        table.interval(),
    )
    .unwrap();
    let spiked = PreparedDataset::prepare(&spiked, "sdv", 7, &spec).unwrap();
    assert_eq!(base.norm, spiked.norm);
    assert_eq!(base.train.targets(), spiked.train.targets());
    assert_ne!(base.test.targets(), spiked.test.targets());
}

#[test]
fn splits_for_one_hundred_samples() {
    let c = SplitSpec::default().counts(100).unwrap();
    assert_eq!((c.train, c.validation, c.test), (60, 15, 25));
}

#[test]
fn tomato_yield_hits_weekly_anchors() {
    let cfg = ExperimentConfig::new(Scenario::TomatoYield);
    let (_, weekly) = experiment::load_raw(&cfg).unwrap();
    let weekly = weekly.unwrap();
    let daily = interpolate_weekly_to_daily(&weekly).unwrap();
    let (w, d) = (weekly.column("yield").unwrap(), daily.column("yield").unwrap());
    assert_eq!(d.len(), 7 * (w.len() - 1) + 1);
    for (k, anchor) in w.iter().enumerate() {
        assert_eq!(d[7 * k], *anchor);
        assert_eq!(daily.timestamps()[7 * k], weekly.timestamps()[k]);
    }
}

proptest! {
    #[test]
    fn sdv_cumsum_recovers_diameter(d in prop::collection::vec(5.0f64..15.0, 2..200)) {
        let sdv = compute_sdv(&d).unwrap();
        let mut acc = d[0];
        for (i, v) in sdv.iter().enumerate() {
            acc += v;
            prop_assert!((acc - d[i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_is_between_anchors(w in prop::collection::vec(0.0f64..5.0, 2..12)) {
        let start = Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap();
        let ts = (0..w.len()).map(|k| start + Duration::weeks(k as i64)).collect();
        let t = TimeSeriesTable::new(ts, vec![Column { name: "yield".into(), values: w.clone() }], Interval::Weekly).unwrap();
        let d = interpolate_weekly_to_daily(&t).unwrap();
        let d = d.column("yield").unwrap();
        for (k, pair) in w.windows(2).enumerate() {
            prop_assert_eq!(d[7 * k], pair[0]);
            let (lo, hi) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            for v in &d[7 * k..=7 * k + 7] {
                prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }
    }
}

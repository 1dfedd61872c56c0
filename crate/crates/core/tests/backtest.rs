use std::path::Path;

use recession_core::backtest::{
    load_forecasts, run_backtest, write_forecasts, BacktestConfig, RelabelEvent, Strategy,
};
use recession_core::cv::{CvOptions, Grid};
use recession_core::data_io::load_vintage;
use recession_core::glm::{ModelKind, PenaltySpec};
use recession_core::preprocess::{build_design, DesignOptions};
use recession_core::synthgen::{generate, ScenarioSpec, Simulation};
use recession_core::{Error, Month};

fn scenario(dir: &Path) -> Simulation {
    generate(&ScenarioSpec::default(), dir).unwrap()
}

fn ridge(dir: &Path, first: Month, last: Month) -> BacktestConfig {
    let mut cfg = BacktestConfig::new(dir, 1, ModelKind::Ridge, first, last);
    cfg.grid = Some(Grid::single(PenaltySpec::new(0.0, 1e-2).unwrap()));
    cfg.cv = CvOptions {
        block_len: 240,
        step: 60,
        ..CvOptions::default()
    };
    cfg
}

#[test]
fn one_record_per_month_with_matching_targets() {
    let dir = tempfile::tempdir().unwrap();
    let sim = scenario(dir.path());
    let first = sim.spec.first_as_of();
    let out = run_backtest(&ridge(dir.path(), first, first + 2)).unwrap();
    assert_eq!(out.forecasts.len(), 3);
    assert_eq!(out.snapshots.len(), 3);
    for (i, f) in out.forecasts.iter().enumerate() {
        assert_eq!(f.as_of, first + i as i32);
        assert_eq!(f.target, f.as_of + 1);
        assert_eq!(f.refit, f.as_of);
        assert!((0.0..=1.0).contains(&f.probability));
        assert_eq!(f.call, u8::from(f.probability >= f.threshold));
    }

    let path = dir.path().join("forecasts.csv");
    write_forecasts(&path, &out.forecasts).unwrap();
    let back = load_forecasts(&path).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in back.iter().zip(&out.forecasts) {
        assert_eq!((a.as_of, a.target, a.call), (b.as_of, b.target, b.call));
        assert!((a.probability - b.probability).abs() < 1e-11);
    }
}

#[test]
fn training_window_expands_by_one_row_per_month() {
    let dir = tempfile::tempdir().unwrap();
    let sim = scenario(dir.path());
    let a = sim.spec.first_as_of();
    let rows = |m: Month| {
        let snap = load_vintage(dir.path(), m).unwrap();
        build_design(&snap, 1, &snap.metas(), DesignOptions::default()).unwrap().train.nrows()
    };
    assert_eq!(rows(a + 1), rows(a) + 1);
    assert_eq!(rows(a + 2), rows(a) + 2);
}

#[test]
fn missing_vintage_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let sim = scenario(dir.path());
    let first = sim.spec.first_as_of();
    let gone = first + 1;
    std::fs::remove_dir_all(dir.path().join(gone.to_string())).unwrap();
    let err = run_backtest(&ridge(dir.path(), first, first + 2)).unwrap_err();
    assert!(err.to_string().contains(&gone.to_string()), "{err}");
    assert!(err.is_validation());
    assert!(matches!(err, Error::AsOf { as_of, .. } if as_of == gone));
}

#[test]
fn freeze_holds_the_peak_refit_until_the_trough_is_announced() {
    let dir = tempfile::tempdir().unwrap();
    let sim = scenario(dir.path());
    let (first, last) = (sim.spec.first_as_of(), sim.spec.last_as_of());
    let events: Vec<RelabelEvent> = RelabelEvent::from_log(&sim.announcements)
        .into_iter()
        .filter(|e| e.announced() + 1 > first && e.announced() + 1 <= last)
        .collect();
    let (peak_at, trough_at) = events
        .windows(2)
        .find_map(|w| match (w[0], w[1]) {
            (RelabelEvent::Peak { announced: p, .. }, RelabelEvent::Trough { announced: t, .. }) => {
                Some((p + 1, t + 1))
            }
            _ => None,
        })
        .expect("the scenario announces a full recession inside the backtest window");

    let standard = run_backtest(&ridge(dir.path(), first, last)).unwrap();
    let mut cfg = ridge(dir.path(), first, last);
    cfg.strategy = Strategy::FreezeOnAnnouncement;
    let frozen = run_backtest(&cfg).unwrap();
    assert_eq!(frozen.forecasts.len(), standard.forecasts.len());

    let first_event = events[0].announced() + 1;
    for (s, f) in standard.forecasts.iter().zip(&frozen.forecasts) {
        if f.as_of < first_event {
            assert_eq!(s, f, "before any announcement the strategies agree");
        }
        if f.as_of >= peak_at && f.as_of < trough_at {
            assert_eq!(f.refit, peak_at, "{}", f.as_of);
        } else {
            assert_eq!(f.refit, f.as_of, "{}", f.as_of);
        }
    }
    assert!(frozen.snapshots.len() < standard.snapshots.len());
}

#[test]
fn zero_retune_interval_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sim = scenario(dir.path());
    let mut cfg = ridge(dir.path(), sim.spec.first_as_of(), sim.spec.first_as_of());
    cfg.retune_every = 0;
    assert!(run_backtest(&cfg).unwrap_err().is_validation());
    let mut cfg = ridge(dir.path(), sim.spec.first_as_of(), sim.spec.first_as_of());
    cfg.horizon = 2;
    assert!(matches!(run_backtest(&cfg), Err(Error::UnsupportedHorizon(2))));
}

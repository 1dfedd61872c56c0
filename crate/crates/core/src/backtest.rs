//! Expanding-window, vintage-faithful out-of-sample forecasting.
//!
//! Each as-of month loads only its own vintage, builds the design for the
//! horizon, tunes hyperparameters by blocked cross-validation, refits on all
//! available rows and forecasts `as_of + horizon`. The freeze strategy stops
//! refitting between a peak announcement and the matching trough
//! announcement.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::cv::{grid_search, CostSpec, CvOptions, Grid, TuneResult};
use crate::data_io::{
    for_each_row, load_announcements, load_vintage, parse_f64, vintage_dir, write_csv, AnnouncementLog,
    BinarySeries, TurningKind, VintageSnapshot, ANNOUNCEMENTS_FILE,
};
use crate::dating::{alternative_indicator, BbParams};
use crate::error::{Error, Result};
use crate::glm::{class_weights, fit_with, linear_predictor, sigmoid, ClassWeights, ModelKind, PenaltySpec};
use crate::month::Month;
use crate::numfmt::format_value;
use crate::preprocess::{build_design_with, ColumnId, Design, DesignOptions, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Standard,
    FreezeOnAnnouncement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// The recession indicator published in each vintage.
    NberVintage,
    /// Turning points dated from each vintage's coincident series.
    AlternativeIndicator,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Strategy::Standard),
            "freeze" | "freeze-on-announcement" => Ok(Strategy::FreezeOnAnnouncement),
            _ => Err(Error::Validation(format!(
                "unknown strategy `{s}`; expected standard or freeze"
            ))),
        }
    }
}

impl std::str::FromStr for LabelSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nber" | "nber-vintage" => Ok(LabelSource::NberVintage),
            "alternative" | "alternative-indicator" => Ok(LabelSource::AlternativeIndicator),
            _ => Err(Error::Validation(format!(
                "unknown label source `{s}`; expected nber or alternative"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub root: PathBuf,
    pub horizon: u32,
    pub model: ModelKind,
    pub first: Month,
    pub last: Month,
    pub strategy: Strategy,
    pub labels: LabelSource,
    /// `None` uses the model family's default grid.
    pub grid: Option<Grid>,
    /// Misclassification costs for threshold selection; `None` uses the
    /// training class weights at each tuning.
    pub costs: Option<CostSpec>,
    pub cv: CvOptions,
    pub design: DesignOptions,
    /// Hyperparameters are re-tuned every this many as-of months, counted
    /// from `first`; coefficients are refit every month regardless.
    pub retune_every: usize,
    /// Series for the alternative indicator's common factor.
    pub coincident: Vec<String>,
    pub dating: BbParams,
}

impl BacktestConfig {
    pub fn new(root: impl Into<PathBuf>, horizon: u32, model: ModelKind, first: Month, last: Month) -> Self {
        BacktestConfig {
            root: root.into(),
            horizon,
            model,
            first,
            last,
            strategy: Strategy::Standard,
            labels: LabelSource::NberVintage,
            grid: None,
            costs: None,
            cv: CvOptions::default(),
            design: DesignOptions::default(),
            retune_every: 1,
            coincident: crate::synthgen::COINCIDENT_IDS.iter().map(|s| s.to_string()).collect(),
            dating: BbParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub as_of: Month,
    pub target: Month,
    pub horizon: u32,
    pub model: ModelKind,
    pub probability: f64,
    pub threshold: f64,
    pub call: u8,
    /// As-of month of the refit whose coefficients produced this forecast.
    pub refit: Month,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSnapshot {
    pub as_of: Month,
    pub model: ModelKind,
    pub horizon: u32,
    pub penalty: PenaltySpec,
    pub threshold: f64,
    pub converged: bool,
    pub columns: Vec<ColumnId>,
    /// Intercept first, then one per column.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionRow {
    pub variable: String,
    pub lag: u32,
    pub target_lag: u32,
    pub count: usize,
    pub total: usize,
    pub percentage: f64,
    pub flagged: bool,
}

/// Share of refits at which each (variable, lag) has a nonzero coefficient.
pub type InclusionTable = Vec<InclusionRow>;

pub const INCLUSION_FLAG: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutput {
    pub forecasts: Vec<ForecastRecord>,
    pub snapshots: Vec<CoefficientSnapshot>,
}

/// Counts exact nonzeros per (variable, lag) over L1-penalized refits and
/// flags those included at least 80% of the time. Rows follow first
/// appearance in the snapshots' column order.
pub fn inclusion_frequency(snapshots: &[CoefficientSnapshot]) -> Result<InclusionTable> {
    if snapshots.is_empty() {
        return Err(Error::Validation("no coefficient snapshots".into()));
    }
    if let Some(s) = snapshots.iter().find(|s| !(s.penalty.alpha > 0.0)) {
        return Err(Error::Validation(format!(
            "inclusion frequency needs L1-penalized fits; the {} refit has alpha {}",
            s.as_of, s.penalty.alpha
        )));
    }
    let total = snapshots.len();
    let mut order: Vec<(ColumnId, u32)> = Vec::new();
    let mut counts: BTreeMap<(String, u32), usize> = BTreeMap::new();
    for s in snapshots {
        for (col, &b) in s.columns.iter().zip(&s.coefficients[1..]) {
            let key = (col.variable.clone(), col.lag);
            let c = counts.entry(key).or_insert_with(|| {
                order.push((col.clone(), col.lag + s.horizon));
                0
            });
            if b != 0.0 {
                *c += 1;
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|(col, target_lag)| {
            let count = counts[&(col.variable.clone(), col.lag)];
            let percentage = 100.0 * count as f64 / total as f64;
            InclusionRow {
                variable: col.variable,
                lag: col.lag,
                target_lag,
                count,
                total,
                percentage,
                flagged: percentage >= INCLUSION_FLAG,
            }
        })
        .collect())
}

/// A turning point becoming known, with the peak it belongs to for troughs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelabelEvent {
    Peak { peak: Month, announced: Month },
    Trough { peak: Month, trough: Month, announced: Month },
}

impl RelabelEvent {
    pub fn announced(&self) -> Month {
        match *self {
            RelabelEvent::Peak { announced, .. } | RelabelEvent::Trough { announced, .. } => announced,
        }
    }

    /// Events of `log` in announcement order. A trough whose peak lies
    /// before the log starts is paired with the month before the series.
    pub fn from_log(log: &AnnouncementLog) -> Vec<RelabelEvent> {
        let mut events = Vec::new();
        let mut last_peak: Option<Month> = None;
        for a in log.entries() {
            match a.kind {
                TurningKind::Peak => {
                    last_peak = Some(a.turning_point);
                    events.push(RelabelEvent::Peak {
                        peak: a.turning_point,
                        announced: a.announced,
                    });
                }
                TurningKind::Trough => events.push(RelabelEvent::Trough {
                    peak: last_peak.unwrap_or(Month::from_index(i32::MIN / 2)),
                    trough: a.turning_point,
                    announced: a.announced,
                }),
            }
        }
        events.sort_by_key(|e| e.announced());
        events
    }
}

/// Rewrites history once a turning point is announced. A peak sets every
/// month after it to 1; a trough sets the months from the peak (exclusive)
/// through the trough to 1 and every later month to 0. The label at the peak
/// month itself must be 0.
pub fn relabel_history(labels: &BinarySeries, event: &RelabelEvent) -> Result<BinarySeries> {
    let (peak, trough) = match *event {
        RelabelEvent::Peak { peak, announced } => {
            if announced <= peak {
                return Err(Error::Validation(format!("peak {peak} announced at {announced}")));
            }
            (peak, None)
        }
        RelabelEvent::Trough { peak, trough, announced } => {
            if !(peak < trough && trough < announced) {
                return Err(Error::Validation(format!(
                    "trough event needs peak < trough < announcement, got {peak}, {trough}, {announced}"
                )));
            }
            (peak, Some(trough))
        }
    };
    if labels.get(peak) == Some(1) {
        return Err(Error::Validation(format!(
            "peak month {peak} is labelled as recession; the event contradicts the labels"
        )));
    }
    let values = labels
        .iter()
        .map(|(m, v)| match trough {
            _ if m <= peak => v,
            None => 1,
            Some(t) => u8::from(m <= t),
        })
        .collect();
    BinarySeries::new(labels.start, values)
}

/// Labels for `as_of` obtained by carrying `prev` forward to `as_of - 1` and
/// applying the events first visible at `as_of`.
fn advance_labels(prev: &BinarySeries, as_of: Month, events: &[RelabelEvent]) -> Result<BinarySeries> {
    let mut values = prev.values.clone();
    let last = values.last().copied().unwrap_or(0);
    let target_len = (as_of - prev.start).max(0) as usize;
    values.resize(target_len, last);
    let mut labels = BinarySeries::new(prev.start, values)?;
    for e in events.iter().filter(|e| e.announced() + 1 == as_of) {
        labels = relabel_history(&labels, e)?;
    }
    Ok(labels)
}

struct Fitted {
    as_of: Month,
    coefficients: Vec<f64>,
    standardizer: Standardizer,
    columns: Vec<ColumnId>,
    threshold: f64,
}

/// Runs the backtest for one model and horizon over `first..=last`.
pub fn run_backtest(cfg: &BacktestConfig) -> Result<BacktestOutput> {
    if cfg.last < cfg.first {
        return Err(Error::Validation(format!(
            "backtest period {}..{} is empty",
            cfg.first, cfg.last
        )));
    }
    if cfg.retune_every == 0 {
        return Err(Error::Validation("retune_every must be at least 1".into()));
    }
    crate::preprocess::lag_spec(cfg.horizon)?;
    let freeze = cfg.strategy == Strategy::FreezeOnAnnouncement;
    if freeze && cfg.labels == LabelSource::AlternativeIndicator {
        return Err(Error::Validation(
            "the freeze strategy needs announced turning points; use the nber label source".into(),
        ));
    }
    let months: Vec<Month> = cfg.first.through(cfg.last).collect();
    if let Some(&missing) = months.iter().find(|&&m| !vintage_dir(&cfg.root, m).is_dir()) {
        return Err(Error::NotFound(vintage_dir(&cfg.root, missing)).at(missing));
    }
    let events = if freeze {
        RelabelEvent::from_log(&load_announcements(&cfg.root.join(ANNOUNCEMENTS_FILE))?)
    } else {
        Vec::new()
    };
    let grid = cfg.grid.clone().unwrap_or_else(|| Grid::for_model(cfg.model));
    let mut cv = cfg.cv;
    cv.require_convergence = cfg.model.penalized();

    let mut forecasts = Vec::with_capacity(months.len());
    let mut snapshots = Vec::new();
    let mut tuned: Option<TuneResult> = None;
    let mut labels_state: Option<BinarySeries> = None;
    let mut frozen: Option<Fitted> = None;

    for (step, &as_of) in months.iter().enumerate() {
        let mut run = || -> Result<()> {
            let snapshot = load_vintage(&cfg.root, as_of)?;
            let labels = match (cfg.labels, freeze) {
                (LabelSource::AlternativeIndicator, _) => {
                    alternative_indicator(&snapshot, &cfg.coincident, &cfg.dating)?
                }
                (LabelSource::NberVintage, false) => snapshot.indicator.clone(),
                (LabelSource::NberVintage, true) => match &labels_state {
                    None => snapshot.indicator.clone(),
                    Some(prev) => advance_labels(prev, as_of, &events)?,
                },
            };
            let new_events: Vec<&RelabelEvent> =
                events.iter().filter(|e| e.announced() + 1 == as_of).collect();
            labels_state = Some(labels.clone());

            let peak_now = new_events.iter().any(|e| matches!(e, RelabelEvent::Peak { .. }));
            let trough_now = new_events.iter().any(|e| matches!(e, RelabelEvent::Trough { .. }));
            if frozen.is_some() && trough_now && !peak_now {
                frozen = None;
            }

            if let Some(f) = &frozen {
                let design = design_for(cfg, &snapshot, &labels, Some(&f.standardizer))?;
                check_columns(&design, &f.columns)?;
                let p = sigmoid(linear_predictor(&f.coefficients, &design.forecast_row));
                forecasts.push(record(cfg, as_of, p, f.threshold, f.as_of));
                return Ok(());
            }

            let design = design_for(cfg, &snapshot, &labels, None)?;
            let x = &design.train.x;
            let y = &design.train.labels;
            let retune = tuned.is_none() || step % cfg.retune_every == 0 || peak_now;
            if retune {
                let costs = match cfg.costs {
                    Some(c) => c,
                    None => CostSpec::from_labels(y)?,
                };
                tuned = Some(grid_search(x, y, cfg.model.weighted(), &grid, &costs, &cv)?);
            }
            let tune = tuned.as_ref().expect("tuned above");
            let weights = if cfg.model.weighted() {
                class_weights(y)?
            } else {
                ClassWeights::unit()
            };
            let fit = fit_with(x, y, &weights, &tune.best, &cv.solver, None)?;
            let p = sigmoid(linear_predictor(&fit.coefficients, &design.forecast_row));
            forecasts.push(record(cfg, as_of, p, tune.threshold, as_of));
            snapshots.push(CoefficientSnapshot {
                as_of,
                model: cfg.model,
                horizon: cfg.horizon,
                penalty: tune.best,
                threshold: tune.threshold,
                converged: fit.converged,
                columns: design.train.columns.clone(),
                coefficients: fit.coefficients.clone(),
            });
            let fitted = Fitted {
                as_of,
                coefficients: fit.coefficients,
                standardizer: design.standardizer,
                columns: design.train.columns,
                threshold: tune.threshold,
            };
            if freeze && peak_now && !trough_now {
                frozen = Some(fitted);
            }
            Ok(())
        };
        run().map_err(|e| e.at(as_of))?;
    }
    Ok(BacktestOutput {
        forecasts,
        snapshots,
    })
}

fn design_for(
    cfg: &BacktestConfig,
    snapshot: &VintageSnapshot,
    labels: &BinarySeries,
    fixed: Option<&Standardizer>,
) -> Result<Design> {
    build_design_with(snapshot, cfg.horizon, &snapshot.metas(), labels, cfg.design, fixed)
}

fn check_columns(design: &Design, columns: &[ColumnId]) -> Result<()> {
    if design.train.columns != columns {
        return Err(Error::Validation(
            "the variable set changed while coefficients were frozen".into(),
        ));
    }
    Ok(())
}

fn record(cfg: &BacktestConfig, as_of: Month, p: f64, threshold: f64, refit: Month) -> ForecastRecord {
    ForecastRecord {
        as_of,
        target: as_of + cfg.horizon as i32,
        horizon: cfg.horizon,
        model: cfg.model,
        probability: p,
        threshold,
        call: u8::from(p >= threshold),
        refit,
    }
}

pub const FORECAST_HEADER: [&str; 7] = ["as_of", "target", "horizon", "model", "probability", "threshold", "call"];

pub fn write_forecasts(path: &Path, records: &[ForecastRecord]) -> Result<()> {
    write_csv(
        path,
        &FORECAST_HEADER,
        records.iter().map(|r| {
            vec![
                r.as_of.to_string(),
                r.target.to_string(),
                r.horizon.to_string(),
                r.model.to_string(),
                format_value(r.probability),
                format_value(r.threshold),
                r.call.to_string(),
            ]
        }),
    )
}

/// Reads a file written by [`write_forecasts`]. The refit month is not
/// stored and is set to `as_of`.
pub fn load_forecasts(path: &Path) -> Result<Vec<ForecastRecord>> {
    let mut out = Vec::new();
    for_each_row(path, &FORECAST_HEADER, |r| {
        let as_of: Month = r[0].trim().parse()?;
        let target: Month = r[1].trim().parse()?;
        let horizon: u32 = r[2]
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("invalid horizon `{}`", &r[2])))?;
        if target != as_of + horizon as i32 {
            return Err(Error::Validation(format!(
                "target {target} is not {horizon} months after {as_of}"
            )));
        }
        let probability = parse_f64(&r[4])?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::Validation(format!("probability {probability} outside [0, 1]")));
        }
        let call = match r[6].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Validation(format!("call `{other}` is not 0 or 1"))),
        };
        out.push(ForecastRecord {
            as_of,
            target,
            horizon,
            model: r[3].trim().parse()?,
            probability,
            threshold: parse_f64(&r[5])?,
            call,
            refit: as_of,
        });
        Ok(())
    })?;
    Ok(out)
}

/// One row per coefficient per refit; the intercept appears as variable
/// `intercept` with lag 0.
pub fn write_coefficients(path: &Path, snapshots: &[CoefficientSnapshot]) -> Result<()> {
    write_csv(
        path,
        &["model", "horizon", "as_of", "alpha", "lambda", "variable", "lag", "value"],
        snapshots.iter().flat_map(|s| {
            let head = vec![
                s.model.to_string(),
                s.horizon.to_string(),
                s.as_of.to_string(),
                format_value(s.penalty.alpha),
                format_value(s.penalty.lambda),
            ];
            std::iter::once(("intercept".to_string(), 0u32))
                .chain(s.columns.iter().map(|c| (c.variable.clone(), c.lag)))
                .zip(&s.coefficients)
                .map(move |((var, lag), b)| {
                    let mut row = head.clone();
                    row.extend([var, lag.to_string(), format_value(*b)]);
                    row
                })
        }),
    )
}

/// Per-refit tuning outcome: chosen penalty, threshold and convergence.
pub fn write_refits(path: &Path, snapshots: &[CoefficientSnapshot]) -> Result<()> {
    write_csv(
        path,
        &["model", "horizon", "as_of", "alpha", "lambda", "threshold", "converged", "nonzero"],
        snapshots.iter().map(|s| {
            vec![
                s.model.to_string(),
                s.horizon.to_string(),
                s.as_of.to_string(),
                format_value(s.penalty.alpha),
                format_value(s.penalty.lambda),
                format_value(s.threshold),
                u8::from(s.converged).to_string(),
                s.coefficients[1..].iter().filter(|b| **b != 0.0).count().to_string(),
            ]
        }),
    )
}

/// Inclusion tables for several (model, horizon) runs in one file.
pub fn write_inclusion(path: &Path, tables: &[(ModelKind, u32, InclusionTable)]) -> Result<()> {
    write_csv(
        path,
        &["model", "horizon", "variable", "lag", "target_lag", "count", "total", "percentage", "flagged"],
        tables.iter().flat_map(|(model, horizon, table)| {
            table.iter().map(move |r| {
                vec![
                    model.to_string(),
                    horizon.to_string(),
                    r.variable.clone(),
                    r.lag.to_string(),
                    r.target_lag.to_string(),
                    r.count.to_string(),
                    r.total.to_string(),
                    format!("{:.1}", r.percentage),
                    u8::from(r.flagged).to_string(),
                ]
            })
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Month {
        s.parse().unwrap()
    }

    fn zeros(from: &str, to: &str) -> BinarySeries {
        BinarySeries::zeros(m(from), (m(to) - m(from) + 1) as usize)
    }

    #[test]
    fn peak_relabel_great_recession() {
        let labels = zeros("2005-01", "2008-11");
        let out = relabel_history(
            &labels,
            &RelabelEvent::Peak {
                peak: m("2007-12"),
                announced: m("2008-12"),
            },
        )
        .unwrap();
        for (month, v) in out.iter() {
            assert_eq!(v, u8::from(month >= m("2008-01")), "{month}");
        }
        assert_eq!(out.get(m("2008-11")), Some(1));
    }

    #[test]
    fn trough_relabel_clears_false_tail() {
        let mut labels = zeros("2005-01", "2010-09");
        for (i, (month, _)) in labels.clone().iter().enumerate() {
            labels.values[i] = u8::from(month >= m("2008-01"));
        }
        let out = relabel_history(
            &labels,
            &RelabelEvent::Trough {
                peak: m("2007-12"),
                trough: m("2009-06"),
                announced: m("2010-09"),
            },
        )
        .unwrap();
        let flipped: Vec<Month> = labels
            .iter()
            .zip(out.iter())
            .filter(|((_, a), (_, b))| a != b)
            .map(|((mo, _), _)| mo)
            .collect();
        assert_eq!(flipped, m("2009-07").through(m("2010-09")).collect::<Vec<_>>());
        // applying it again changes nothing
        let again = relabel_history(
            &out,
            &RelabelEvent::Trough {
                peak: m("2007-12"),
                trough: m("2009-06"),
                announced: m("2010-09"),
            },
        )
        .unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn inconsistent_event_rejected() {
        let mut labels = zeros("2007-01", "2008-11");
        labels.values.iter_mut().for_each(|v| *v = 1);
        let e = RelabelEvent::Peak {
            peak: m("2007-12"),
            announced: m("2008-12"),
        };
        assert!(matches!(relabel_history(&labels, &e), Err(Error::Validation(_))));
    }

    fn snapshot(as_of: &str, alpha: f64, coefs: &[f64]) -> CoefficientSnapshot {
        CoefficientSnapshot {
            as_of: m(as_of),
            model: ModelKind::Lasso,
            horizon: 1,
            penalty: PenaltySpec { alpha, lambda: 0.1 },
            threshold: 0.5,
            converged: true,
            columns: vec![
                ColumnId { variable: "spread".into(), lag: 11 },
                ColumnId { variable: "noise01".into(), lag: 2 },
            ],
            coefficients: coefs.to_vec(),
        }
    }

    #[test]
    fn inclusion_counts() {
        let mut snaps = Vec::new();
        for i in 0..180 {
            let noise = if i < 150 { 0.2 } else { 0.0 };
            snaps.push(snapshot("2010-01", 1.0, &[0.1, -1.0, noise]));
        }
        let t = inclusion_frequency(&snaps).unwrap();
        assert_eq!((t[0].count, t[0].total, t[0].percentage, t[0].flagged), (180, 180, 100.0, true));
        assert_eq!(t[0].target_lag, 12);
        assert_eq!(t[1].count, 150);
        assert!((t[1].percentage - 83.333).abs() < 1e-3 && t[1].flagged);

        let never = inclusion_frequency(&[snapshot("2010-01", 1.0, &[0.0, 0.0, 0.0])]).unwrap();
        assert_eq!((never[0].percentage, never[0].flagged), (0.0, false));
        assert!(inclusion_frequency(&[]).is_err());
        assert!(inclusion_frequency(&[snapshot("2010-01", 0.0, &[0.0, 1.0, 1.0])]).is_err());
    }
}

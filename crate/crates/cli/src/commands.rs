//! The four batch commands. Each returns the files it wrote.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use recession_core::backtest::{
    inclusion_frequency, load_forecasts, run_backtest, write_coefficients, write_forecasts, write_inclusion,
    write_refits, BacktestConfig, BacktestOutput, ForecastRecord, InclusionTable,
};
use recession_core::cv::{CvOptions, Grid};
use recession_core::data_io::{list_vintages, load_labels, load_vintage, write_csv, write_indicator, BinarySeries};
use recession_core::dating::{coincident_factor, date_factor, to_indicator, write_factor, write_turning_points};
use recession_core::glm::ModelKind;
use recession_core::metrics::{
    auprc_with, auroc, confusion, point_metrics, pr_curve, roc_curve, CurvePoint, PointMetrics,
};
use recession_core::numfmt::format_value;
use recession_core::preprocess::DesignOptions;
use recession_core::synthgen::{generate, TRUTH_FILE};
use recession_core::{Error, Month, Result};

use crate::config::RunConfig;

pub const FORECASTS_FILE: &str = "forecasts.csv";
pub const COEFFICIENTS_FILE: &str = "coefficients.csv";
pub const REFITS_FILE: &str = "refits.csv";
pub const INCLUSION_FILE: &str = "inclusion.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CURVES_DIR: &str = "curves";
pub const TURNING_POINTS_FILE: &str = "turning_points.csv";
pub const FACTOR_FILE: &str = "factor.csv";
pub const ALT_INDICATOR_FILE: &str = "alt_indicator.csv";
pub const DATING_SUMMARY_FILE: &str = "dating_summary.csv";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Simulates the configured scenario into the vintage root.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sim = generate(&cfg.scenario, &cfg.vintages)?;
    let mut files: Vec<PathBuf> = sim
        .as_of_months()
        .map(|m| recession_core::data_io::vintage_dir(&cfg.vintages, m))
        .collect();
    files.push(cfg.vintages.join(recession_core::data_io::ANNOUNCEMENTS_FILE));
    files.push(cfg.vintages.join(TRUTH_FILE));
    Ok(files)
}

/// The backtest period: configured bounds, else the vintage tree's extent.
fn period(cfg: &RunConfig) -> Result<(Month, Month)> {
    if let (Some(a), Some(b)) = (cfg.first, cfg.last) {
        return Ok((a, b));
    }
    let months = list_vintages(&cfg.vintages)?;
    let (Some(&lo), Some(&hi)) = (months.first(), months.last()) else {
        return Err(Error::Validation(format!(
            "no YYYY-MM vintage directories under {}",
            cfg.vintages.display()
        )));
    };
    Ok((cfg.first.unwrap_or(lo), cfg.last.unwrap_or(hi)))
}

fn grid_for(cfg: &RunConfig, model: ModelKind) -> Grid {
    let mut grid = Grid::for_model(model);
    if model == ModelKind::ElasticNet {
        grid.alphas = cfg.enet_alphas.clone();
    }
    match cfg.lambda_count {
        Some(n) => grid.with_lambda_count(n),
        None => grid,
    }
}

/// Configuration of the single-model, single-horizon run.
pub fn backtest_config(cfg: &RunConfig, model: ModelKind, horizon: u32) -> Result<BacktestConfig> {
    let (first, last) = period(cfg)?;
    let mut bt = BacktestConfig::new(&cfg.vintages, horizon, model, first, last);
    bt.strategy = cfg.strategy;
    bt.labels = cfg.label_source;
    bt.grid = Some(grid_for(cfg, model));
    bt.costs = cfg.costs;
    bt.cv = CvOptions {
        block_len: cfg.block_len,
        step: cfg.block_step,
        train_fraction: cfg.train_fraction,
        selection: cfg.selection,
        ..CvOptions::default()
    };
    bt.design = DesignOptions { knn_k: cfg.knn_k };
    bt.retune_every = cfg.retune_every;
    bt.coincident = cfg.coincident.clone();
    bt.dating = cfg.dating;
    Ok(bt)
}

/// Runs every configured (model, horizon) pair and writes forecasts,
/// coefficients, per-refit tuning results and, for L1 models, inclusion
/// frequencies to the output directory.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.models.is_empty() {
        return Err(Error::Validation("the model list is empty".into()));
    }
    if cfg.horizons.is_empty() {
        return Err(Error::Validation("the horizon list is empty".into()));
    }
    if cfg.enet_alphas.is_empty() && cfg.models.contains(&ModelKind::ElasticNet) {
        return Err(Error::Validation("enet needs at least one mixing weight".into()));
    }
    let pairs: Vec<(ModelKind, u32)> = cfg
        .models
        .iter()
        .flat_map(|&m| cfg.horizons.iter().map(move |&h| (m, h)))
        .collect();
    let configs = pairs
        .iter()
        .map(|&(m, h)| backtest_config(cfg, m, h))
        .collect::<Result<Vec<_>>>()?;
    let outputs: Vec<BacktestOutput> = configs
        .par_iter()
        .map(|bt| {
            run_backtest(bt).map_err(|e| e.context(format!("{} h={}", bt.model, bt.horizon)))
        })
        .collect::<Result<_>>()?;

    let forecasts: Vec<ForecastRecord> = outputs.iter().flat_map(|o| o.forecasts.iter().cloned()).collect();
    let snapshots: Vec<_> = outputs.iter().flat_map(|o| o.snapshots.iter().cloned()).collect();
    let mut tables: Vec<(ModelKind, u32, InclusionTable)> = Vec::new();
    for (&(m, h), out) in pairs.iter().zip(&outputs) {
        if m.selects_variables() {
            tables.push((m, h, inclusion_frequency(&out.snapshots)?));
        }
    }

    create_dir(&cfg.output)?;
    let files = [FORECASTS_FILE, COEFFICIENTS_FILE, REFITS_FILE, INCLUSION_FILE].map(|f| cfg.output.join(f));
    write_forecasts(&files[0], &forecasts)?;
    write_coefficients(&files[1], &snapshots)?;
    write_refits(&files[2], &snapshots)?;
    write_inclusion(&files[3], &tables)?;
    Ok(files.to_vec())
}

/// Metrics for one (model, horizon) group of forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRow {
    pub model: ModelKind,
    pub horizon: u32,
    pub n: usize,
    pub positives: usize,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub point: PointMetrics,
    pub roc: Vec<CurvePoint>,
    pub pr: Vec<CurvePoint>,
}

/// Scores every (model, horizon) group against `labels`, ordered by
/// horizon then model. Forecasts whose target month has no label are
/// dropped.
pub fn evaluate(forecasts: &[ForecastRecord], labels: &BinarySeries, cfg: &RunConfig) -> Result<Vec<EvaluationRow>> {
    let mut keys: Vec<(u32, usize)> = forecasts
        .iter()
        .map(|f| (f.horizon, ModelKind::ALL.iter().position(|&k| k == f.model).expect("known model")))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let mut rows = Vec::with_capacity(keys.len());
    for (horizon, mi) in keys {
        let model = ModelKind::ALL[mi];
        let group: Vec<(&ForecastRecord, u8)> = forecasts
            .iter()
            .filter(|f| f.horizon == horizon && f.model == model)
            .filter_map(|f| labels.get(f.target).map(|y| (f, y)))
            .collect();
        if group.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no {model} h={horizon} forecast targets a labelled month"
            )));
        }
        let y: Vec<u8> = group.iter().map(|(_, y)| *y).collect();
        let p: Vec<f64> = group.iter().map(|(f, _)| f.probability).collect();
        let calls: Vec<u8> = group.iter().map(|(f, _)| f.call).collect();
        let mut point = point_metrics(&confusion(&y, &calls)?)?;
        let positives = y.iter().filter(|&&v| v == 1).count();
        let both = positives > 0 && positives < y.len();
        let (auroc_v, auprc_v, roc, pr) = if both {
            (
                Some(auroc(&y, &p)?),
                Some(auprc_with(&y, &p, cfg.pr_integration)?),
                roc_curve(&y, &p)?,
                pr_curve(&y, &p)?,
            )
        } else {
            point.degenerate.extend(["auroc", "auprc"]);
            (None, None, Vec::new(), Vec::new())
        };
        rows.push(EvaluationRow {
            model,
            horizon,
            n: y.len(),
            positives,
            auroc: auroc_v,
            auprc: auprc_v,
            point,
            roc,
            pr,
        });
    }
    Ok(rows)
}

pub const METRICS_HEADER: [&str; 13] = [
    "horizon",
    "model",
    "n",
    "positives",
    "auroc",
    "auprc",
    "bacc",
    "mcc",
    "f1",
    "sensitivity",
    "specificity",
    "precision",
    "degenerate",
];

pub fn write_metrics(path: &Path, rows: &[EvaluationRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), format_value);
    write_csv(
        path,
        &METRICS_HEADER,
        rows.iter().map(|r| {
            let m = &r.point;
            vec![
                r.horizon.to_string(),
                r.model.to_string(),
                r.n.to_string(),
                r.positives.to_string(),
                opt(r.auroc),
                opt(r.auprc),
                format_value(m.balanced_accuracy),
                format_value(m.mcc),
                format_value(m.f1),
                format_value(m.sensitivity),
                format_value(m.specificity),
                format_value(m.precision),
                m.degenerate.join(";"),
            ]
        }),
    )
}

pub fn write_curve(path: &Path, x: &str, y: &str, points: &[CurvePoint]) -> Result<()> {
    write_csv(
        path,
        &["cutpoint", x, y],
        points
            .iter()
            .map(|c| vec![format_value(c.cutpoint), format_value(c.x), format_value(c.y)]),
    )
}

/// Scores the forecasts file against the label file and writes the
/// metrics table plus ROC and PR curve files per group.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let forecasts_path = cfg.forecasts.clone().unwrap_or_else(|| cfg.output.join(FORECASTS_FILE));
    let labels_path = cfg.labels.clone().unwrap_or_else(|| cfg.vintages.join(TRUTH_FILE));
    let forecasts = load_forecasts(&forecasts_path)?;
    if forecasts.is_empty() {
        return Err(Error::Validation(format!("{} holds no forecasts", forecasts_path.display())));
    }
    let labels = load_labels(&labels_path)?;
    let rows = evaluate(&forecasts, &labels, cfg)?;

    let curves = cfg.output.join(CURVES_DIR);
    create_dir(&curves)?;
    let mut files = vec![cfg.output.join(METRICS_FILE)];
    write_metrics(&files[0], &rows)?;
    for r in rows.iter().filter(|r| r.auroc.is_some()) {
        let roc = curves.join(format!("roc_{}_h{}.csv", r.model, r.horizon));
        let pr = curves.join(format!("pr_{}_h{}.csv", r.model, r.horizon));
        write_curve(&roc, "fpr", "tpr", &r.roc)?;
        write_curve(&pr, "recall", "precision", &r.pr)?;
        files.extend([roc, pr]);
    }
    Ok(files)
}

/// Dates the coincident factor of one vintage, writes its turning points,
/// factor scores and implied indicator, and compares that indicator with
/// the vintage's published one.
pub fn cmd_date(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let as_of = match cfg.as_of {
        Some(m) => m,
        None => *list_vintages(&cfg.vintages)?.last().ok_or_else(|| {
            Error::Validation(format!("no YYYY-MM vintage directories under {}", cfg.vintages.display()))
        })?,
    };
    let snapshot = load_vintage(&cfg.vintages, as_of)?;
    let factor = coincident_factor(&snapshot, &cfg.coincident)?;
    let points = date_factor(&factor, &cfg.dating)?;
    let end = factor.start + factor.component.scores.len() as i32 - 1;
    let indicator = to_indicator(&points, factor.start, end)?;

    let (a, b): (Vec<u8>, Vec<u8>) = indicator
        .iter()
        .filter_map(|(m, v)| snapshot.indicator.get(m).map(|w| (v, w)))
        .unzip();
    let phi = recession_core::metrics::phi_coefficient(&a, &b).ok();

    create_dir(&cfg.output)?;
    let files = [TURNING_POINTS_FILE, FACTOR_FILE, ALT_INDICATOR_FILE, DATING_SUMMARY_FILE].map(|f| cfg.output.join(f));
    write_turning_points(&files[0], &points)?;
    write_factor(&files[1], &factor)?;
    write_indicator(&files[2], &indicator)?;
    let count = |k| points.iter().filter(|(_, t)| *t == k).count().to_string();
    write_csv(
        &files[3],
        &["as_of", "factor_start", "factor_end", "explained", "peaks", "troughs", "compared", "phi"],
        std::iter::once(vec![
            as_of.to_string(),
            factor.start.to_string(),
            end.to_string(),
            format_value(factor.component.explained),
            count(recession_core::data_io::TurningKind::Peak),
            count(recession_core::data_io::TurningKind::Trough),
            a.len().to_string(),
            phi.map_or_else(|| "NA".to_string(), format_value),
        ]),
    )?;
    Ok(files.to_vec())
}

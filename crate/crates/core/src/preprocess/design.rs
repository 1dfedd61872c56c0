use std::path::Path;

use nalgebra::DMatrix;

use crate::data_io::{write_csv, BinarySeries, Frequency, Transform, Variable, VariableMeta, VintageSnapshot};
use crate::error::{Error, Result};
use crate::month::Month;
use crate::numfmt::format_value;

use super::{
    aggregate_to_monthly, fit_standardizer, knn_impute, lag_spec, spline_interpolate_quarterly,
    transform_knots, transform_monthly, LagStructure, MonthlySeries, Standardizer,
};

/// A predictor column: a variable at a lag before the forecast origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnId {
    pub variable: String,
    pub lag: u32,
}

impl ColumnId {
    pub fn name(&self) -> String {
        format!("{}_{}", self.variable, self.lag)
    }
}

/// Training rows. Column 0 of `x` is the intercept; column `j + 1` holds
/// `columns[j]`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub targets: Vec<Month>,
    pub columns: Vec<ColumnId>,
    pub x: DMatrix<f64>,
    pub labels: Vec<u8>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    /// Width including the intercept.
    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct Design {
    pub lags: LagStructure,
    pub train: DesignMatrix,
    pub forecast_target: Month,
    /// Out-of-sample feature row, intercept first.
    pub forecast_row: Vec<f64>,
    pub standardizer: Standardizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignOptions {
    pub knn_k: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions { knn_k: 5 }
    }
}

/// A variable's levels at monthly frequency: daily data averaged, quarterly
/// knots spline-interpolated, monthly data as published.
pub fn monthly_levels(var: &Variable, as_of: Month) -> Result<MonthlySeries> {
    let months = |obs: &[(crate::data_io::Stamp, f64)]| -> Vec<(Month, f64)> {
        obs.iter().map(|(s, v)| (s.month, *v)).collect()
    };
    match var.meta.frequency {
        Frequency::Daily => Ok(aggregate_to_monthly(&var.observations)),
        Frequency::Monthly => Ok(MonthlySeries::from_pairs(&months(&var.observations))),
        Frequency::Quarterly => spline_interpolate_quarterly(&months(&var.observations), as_of),
    }
}

/// A variable's stationary monthly series. Quarterly knots are transformed
/// before interpolation; daily data are averaged to months first.
pub fn transformed_monthly(var: &Variable, as_of: Month) -> Result<MonthlySeries> {
    let t = var.meta.transform;
    let id = &var.meta.id;
    let wrap = |e: Error| match e {
        Error::Domain(msg) => Error::Domain(format!("`{id}`: {msg}")),
        Error::InsufficientData(msg) => Error::InsufficientData(format!("`{id}`: {msg}")),
        other => other,
    };
    match var.meta.frequency {
        Frequency::Quarterly => {
            let knots: Vec<(Month, f64)> = var
                .observations
                .iter()
                .filter(|(s, _)| s.month < as_of)
                .map(|(s, v)| (s.month, *v))
                .collect();
            let knots = if t == Transform::None {
                knots
            } else {
                transform_knots(&knots, t).map_err(wrap)?
            };
            spline_interpolate_quarterly(&knots, as_of).map_err(wrap)
        }
        _ => transform_monthly(&monthly_levels(var, as_of)?, t).map_err(wrap),
    }
}

/// Builds the design for `horizon` from the snapshot's own recession
/// indicator, standardizing on the training rows.
pub fn build_design(
    snapshot: &VintageSnapshot,
    horizon: u32,
    metas: &[VariableMeta],
    opts: DesignOptions,
) -> Result<Design> {
    build_design_with(snapshot, horizon, metas, &snapshot.indicator, opts, None)
}

/// Like [`build_design`] but with explicit labels and, optionally, a
/// previously fitted standardizer.
///
/// Row `t` pairs the label at target month `t` with each variable at
/// `t - horizon - lag`. Rows start once every lagged column lies within its
/// series and end at the last labelled month before `as_of`; interior and
/// trailing gaps are filled by kNN imputation.
pub fn build_design_with(
    snapshot: &VintageSnapshot,
    horizon: u32,
    metas: &[VariableMeta],
    labels: &BinarySeries,
    opts: DesignOptions,
    fixed: Option<&Standardizer>,
) -> Result<Design> {
    let lags = lag_spec(horizon)?;
    if metas.is_empty() {
        return Err(Error::Validation("no predictor variables".into()));
    }
    let as_of = snapshot.as_of;
    let h = horizon as i32;

    let mut series = Vec::with_capacity(metas.len());
    let mut first_row = labels.start;
    for meta in metas {
        let var = snapshot
            .variable(&meta.id)
            .ok_or_else(|| Error::Validation(format!("variable `{}` missing from vintage", meta.id)))?;
        let s = transformed_monthly(var, as_of)?;
        let first = s.first_observed().ok_or_else(|| {
            Error::InsufficientData(format!("`{}` has no usable observations", meta.id))
        })?;
        first_row = first_row.max(first + h + lags.max_lag() as i32);
        series.push(s);
    }
    let last_row = (as_of - 1).min(labels.end() - 1);
    if labels.is_empty() || first_row > last_row {
        return Err(Error::InsufficientData(format!(
            "no usable training rows for horizon {horizon} as of {as_of}"
        )));
    }

    let columns: Vec<ColumnId> = metas
        .iter()
        .flat_map(|m| {
            lags.lags.iter().map(move |&lag| ColumnId {
                variable: m.id.clone(),
                lag,
            })
        })
        .collect();
    let names: Vec<String> = columns.iter().map(ColumnId::name).collect();

    let raw_row = |origin: Month| -> Vec<Option<f64>> {
        series
            .iter()
            .flat_map(|s| lags.lags.iter().map(move |&lag| s.get(origin - lag as i32)))
            .collect()
    };
    let targets: Vec<Month> = first_row.through(last_row).collect();
    let forecast_target = as_of + h;
    let mut raw: Vec<Vec<Option<f64>>> = targets.iter().map(|&t| raw_row(t - h)).collect();
    raw.push(raw_row(as_of));

    let mut filled = knn_impute(&raw, opts.knn_k, &names)?;
    let forecast_raw = filled.pop().expect("forecast row present");
    let standardizer = match fixed {
        Some(s) => {
            if s.means.len() != names.len() {
                return Err(Error::Dimension(format!(
                    "standardizer has {} columns, design has {}",
                    s.means.len(),
                    names.len()
                )));
            }
            s.clone()
        }
        None => fit_standardizer(&filled, &names)?,
    };

    let n = targets.len();
    let k = names.len() + 1;
    let mut x = DMatrix::<f64>::zeros(n, k);
    for (i, row) in filled.iter().enumerate() {
        x[(i, 0)] = 1.0;
        for (j, v) in standardizer.apply_row(row).into_iter().enumerate() {
            x[(i, j + 1)] = v;
        }
    }
    let mut forecast_row = Vec::with_capacity(k);
    forecast_row.push(1.0);
    forecast_row.extend(standardizer.apply_row(&forecast_raw));

    let label_values = targets
        .iter()
        .map(|&t| labels.get(t).expect("rows lie within the label range"))
        .collect();

    Ok(Design {
        lags,
        train: DesignMatrix {
            targets,
            columns,
            x,
            labels: label_values,
        },
        forecast_target,
        forecast_row,
        standardizer,
    })
}

/// Training rows as `target_month,label,<variable>_<lag>...`.
pub fn write_design_csv(path: &Path, design: &DesignMatrix) -> Result<()> {
    let mut header = vec!["target_month".to_string(), "label".to_string()];
    header.extend(design.columns.iter().map(ColumnId::name));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header_refs,
        (0..design.nrows()).map(|i| {
            let mut row = vec![design.targets[i].to_string(), design.labels[i].to_string()];
            row.extend((1..design.ncols()).map(|j| format_value(design.x[(i, j)])));
            row
        }),
    )
}

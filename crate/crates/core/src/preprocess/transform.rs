use crate::data_io::Transform;
use crate::error::{Error, Result};
use crate::month::Month;

use super::MonthlySeries;

fn step(transform: Transform, prev: f64, cur: f64) -> Result<f64> {
    match transform {
        Transform::LogGrowth => {
            if prev <= 0.0 || cur <= 0.0 {
                return Err(Error::Domain(format!(
                    "log growth needs positive values, got {prev} -> {cur}"
                )));
            }
            Ok(cur.ln() - prev.ln())
        }
        Transform::FirstDifference => Ok(cur - prev),
        Transform::PercentChange => {
            if prev == 0.0 {
                return Err(Error::Domain("percent change over a zero value".into()));
            }
            Ok((cur - prev) / prev)
        }
        Transform::None => Ok(cur),
    }
}

/// Applies a stationarity transform to consecutive observations. Every
/// transform except `None` drops the first observation.
pub fn transform_series(values: &[f64], transform: Transform) -> Result<Vec<f64>> {
    if transform == Transform::None {
        return Ok(values.to_vec());
    }
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{transform} needs at least 2 observations, got {}",
            values.len()
        )));
    }
    values
        .windows(2)
        .map(|w| step(transform, w[0], w[1]))
        .collect()
}

/// Month-by-month transform of a series that may contain gaps; a month whose
/// predecessor is missing becomes a gap.
pub fn transform_monthly(series: &MonthlySeries, transform: Transform) -> Result<MonthlySeries> {
    if transform == Transform::None {
        return Ok(series.clone());
    }
    if series.values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{transform} needs at least 2 observations"
        )));
    }
    let values = series
        .values
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => step(transform, a, b).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonthlySeries {
        start: series.start + 1,
        values,
    })
}

/// Transform applied to quarterly knots, keeping each result on the later
/// knot's month.
pub fn transform_knots(knots: &[(Month, f64)], transform: Transform) -> Result<Vec<(Month, f64)>> {
    let values: Vec<f64> = knots.iter().map(|k| k.1).collect();
    let out = transform_series(&values, transform)?;
    let skip = knots.len() - out.len();
    Ok(knots[skip..].iter().map(|k| k.0).zip(out).collect())
}

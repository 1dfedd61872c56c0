//! Turning-point dating of a common factor: the first principal component of
//! coincident series, Bry-Boschan peak and trough selection, and the binary
//! recession indicator those turning points imply.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data_io::{write_csv, BinarySeries, TurningKind, VintageSnapshot};
use crate::error::{Error, Result};
use crate::month::Month;
use crate::numfmt::format_value;
use crate::preprocess::monthly_levels;

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponent {
    pub scores: Vec<f64>,
    /// Unit norm; the first entry is non-negative.
    pub loadings: Vec<f64>,
    pub eigenvalue: f64,
    /// Share of total variance, i.e. eigenvalue over column count.
    pub explained: f64,
}

/// First principal component of the correlation matrix of `data`'s columns.
/// Columns are standardized internally with the population standard
/// deviation, and scores are the standardized data times the loadings.
pub fn first_principal_component(data: &DMatrix<f64>) -> Result<PrincipalComponent> {
    let (n, p) = data.shape();
    if p < 2 || n < 3 {
        return Err(Error::Dimension(format!(
            "principal components need at least 3 rows and 2 columns, got {n}x{p}"
        )));
    }
    let mut z = data.clone();
    for j in 0..p {
        let mut col = z.column_mut(j);
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if !(sd > 1e-12 * (1.0 + mean.abs())) {
            return Err(Error::DegenerateColumn(format!("column {j}")));
        }
        col.apply(|v| *v = (*v - mean) / sd);
    }
    let corr = z.transpose() * &z / n as f64;
    let eig = SymmetricEigen::new(corr);
    let top = eig.eigenvalues.imax();
    let mut loadings: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let norm = loadings.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lead = loadings.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    for v in &mut loadings {
        *v *= sign / norm;
    }
    let scores = (0..n)
        .map(|i| (0..p).map(|j| z[(i, j)] * loadings[j]).sum())
        .collect();
    let eigenvalue = eig.eigenvalues[top];
    Ok(PrincipalComponent {
        scores,
        loadings,
        eigenvalue,
        explained: eigenvalue / p as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BbParams {
    /// Half-width of the local-extremum window and of the end-point trim.
    pub window: usize,
    pub min_phase: usize,
    pub min_cycle: usize,
}

impl Default for BbParams {
    fn default() -> Self {
        BbParams {
            window: 5,
            min_phase: 5,
            min_cycle: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TurningPoint {
    pub index: usize,
    pub kind: TurningKind,
}

/// Is `a` a more extreme turning point than `b` of the same kind? Ties go to
/// the earlier one.
fn dominates(series: &[f64], a: TurningPoint, b: TurningPoint) -> bool {
    let (va, vb) = (series[a.index], series[b.index]);
    match a.kind {
        TurningKind::Peak => va > vb || (va == vb && a.index < b.index),
        TurningKind::Trough => va < vb || (va == vb && a.index < b.index),
    }
}

fn alternate(series: &[f64], points: Vec<TurningPoint>) -> Vec<TurningPoint> {
    let mut out: Vec<TurningPoint> = Vec::with_capacity(points.len());
    for p in points {
        match out.last_mut() {
            Some(last) if last.kind == p.kind => {
                if dominates(series, p, *last) {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

/// Bry-Boschan turning points of a smooth monthly series.
///
/// Candidates are local extrema within `window` months either side (the
/// earlier of equal values wins). Same-kind neighbours are reduced to the
/// more extreme one. Phases shorter than `min_phase` lose both endpoints and
/// cycles shorter than `min_cycle` lose the weaker of their two same-kind
/// ends together with the point between; the shortest violation goes first
/// and alternation is re-enforced after each drop. Points within `window`
/// months of either end are discarded last.
pub fn bry_boschan(series: &[f64], params: &BbParams) -> Result<Vec<TurningPoint>> {
    let n = series.len();
    if n <= params.min_cycle {
        return Err(Error::InsufficientData(format!(
            "series of {n} months; dating needs more than {}",
            params.min_cycle
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("series must be finite".into()));
    }
    let w = params.window;
    let mut candidates = Vec::new();
    for t in 0..n {
        let lo = t.saturating_sub(w);
        let hi = (t + w).min(n - 1);
        let v = series[t];
        let before = &series[lo..t];
        let after = &series[t + 1..=hi];
        if before.iter().all(|&u| v > u) && after.iter().all(|&u| v >= u) {
            candidates.push(TurningPoint { index: t, kind: TurningKind::Peak });
        } else if before.iter().all(|&u| v < u) && after.iter().all(|&u| v <= u) {
            candidates.push(TurningPoint { index: t, kind: TurningKind::Trough });
        }
    }
    let mut points = alternate(series, candidates);

    loop {
        // shortest phase below the minimum
        let phase = points
            .windows(2)
            .enumerate()
            .map(|(i, p)| (p[1].index - p[0].index, i))
            .filter(|&(len, _)| len < params.min_phase)
            .min();
        if let Some((_, i)) = phase {
            points.drain(i..i + 2);
            points = alternate(series, points);
            continue;
        }
        let cycle = points
            .windows(3)
            .enumerate()
            .map(|(i, p)| (p[2].index - p[0].index, i))
            .filter(|&(len, _)| len < params.min_cycle)
            .min();
        if let Some((_, i)) = cycle {
            if dominates(series, points[i], points[i + 2]) {
                points.drain(i + 1..i + 3);
            } else {
                points.drain(i..i + 2);
            }
            points = alternate(series, points);
            continue;
        }
        break;
    }

    points.retain(|p| p.index >= w && p.index + w < n);
    Ok(points)
}

/// Checks alternation, minimum phase and minimum cycle length.
pub fn validate_turning_points(points: &[TurningPoint], params: &BbParams) -> Result<()> {
    for p in points.windows(2) {
        if p[0].kind == p[1].kind || p[1].index <= p[0].index {
            return Err(Error::Validation(format!(
                "turning points at {} and {} do not alternate",
                p[0].index, p[1].index
            )));
        }
        if p[1].index - p[0].index < params.min_phase {
            return Err(Error::Validation(format!(
                "phase {}..{} shorter than {}",
                p[0].index, p[1].index, params.min_phase
            )));
        }
    }
    for p in points.windows(3) {
        if p[2].index - p[0].index < params.min_cycle {
            return Err(Error::Validation(format!(
                "cycle {}..{} shorter than {}",
                p[0].index, p[2].index, params.min_cycle
            )));
        }
    }
    Ok(())
}

/// Monthly indicator over `start..=end`: 1 from the month after each peak
/// through the following trough, and from a trailing peak to `end`.
/// Turning points are given as months.
pub fn to_indicator(points: &[(Month, TurningKind)], start: Month, end: Month) -> Result<BinarySeries> {
    if end < start {
        return Err(Error::Validation(format!("range {start}..{end} is empty")));
    }
    for p in points.windows(2) {
        if p[0].1 == p[1].1 || p[1].0 <= p[0].0 {
            return Err(Error::Validation(format!(
                "turning points {} and {} do not alternate",
                p[0].0, p[1].0
            )));
        }
    }
    let mut next = 0;
    let mut state = 0u8;
    let values = start
        .through(end)
        .map(|m| {
            while next < points.len() && points[next].0 < m {
                state = u8::from(points[next].1 == TurningKind::Peak);
                next += 1;
            }
            state
        })
        .collect();
    BinarySeries::new(start, values)
}

/// The common factor of `ids` over the months where all of them have a
/// level: first principal component of the monthly levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub start: Month,
    pub component: PrincipalComponent,
}

impl Factor {
    pub fn months(&self) -> impl Iterator<Item = Month> + '_ {
        (0..self.component.scores.len()).map(|i| self.start + i as i32)
    }
}

pub fn coincident_factor(snapshot: &VintageSnapshot, ids: &[String]) -> Result<Factor> {
    if ids.len() < 2 {
        return Err(Error::Validation("the coincident factor needs at least two series".into()));
    }
    let mut levels = Vec::with_capacity(ids.len());
    for id in ids {
        let var = snapshot
            .variable(id)
            .ok_or_else(|| Error::Validation(format!("coincident series `{id}` missing from vintage")))?;
        levels.push(monthly_levels(var, snapshot.as_of)?);
    }
    let first = levels
        .iter()
        .map(|s| s.first_observed())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::InsufficientData("a coincident series is empty".into()))?
        .into_iter()
        .max()
        .expect("at least two series");
    // Last month at which every series is observed, stopping at the first
    // gap after `first` so the factor is contiguous.
    let mut months = Vec::new();
    let mut m = first;
    while m < snapshot.as_of && levels.iter().all(|s| s.get(m).is_some()) {
        months.push(m);
        m = m + 1;
    }
    let mut data = DMatrix::<f64>::zeros(months.len(), ids.len());
    for (i, &m) in months.iter().enumerate() {
        for (j, s) in levels.iter().enumerate() {
            data[(i, j)] = s.get(m).expect("checked above");
        }
    }
    Ok(Factor {
        start: first,
        component: first_principal_component(&data)?,
    })
}

/// Dated turning points of the factor, as months.
pub fn date_factor(factor: &Factor, params: &BbParams) -> Result<Vec<(Month, TurningKind)>> {
    Ok(bry_boschan(&factor.component.scores, params)?
        .into_iter()
        .map(|p| (factor.start + p.index as i32, p.kind))
        .collect())
}

/// Recession labels for `snapshot` derived from its own coincident data,
/// covering the factor's first month through `as_of - 1`.
pub fn alternative_indicator(
    snapshot: &VintageSnapshot,
    ids: &[String],
    params: &BbParams,
) -> Result<BinarySeries> {
    let factor = coincident_factor(snapshot, ids)?;
    let points = date_factor(&factor, params)?;
    to_indicator(&points, factor.start, snapshot.as_of - 1)
}

pub fn write_turning_points(path: &Path, points: &[(Month, TurningKind)]) -> Result<()> {
    write_csv(
        path,
        &["month", "type"],
        points.iter().map(|(m, k)| vec![m.to_string(), k.to_string()]),
    )
}

pub fn write_factor(path: &Path, factor: &Factor) -> Result<()> {
    write_csv(
        path,
        &["month", "score"],
        factor
            .months()
            .zip(&factor.component.scores)
            .map(|(m, s)| vec![m.to_string(), format_value(*s)]),
    )
}

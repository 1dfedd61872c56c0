//! Confusion-matrix metrics and threshold-free curve areas.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }
}

fn check_binary(name: &str, v: &[u8]) -> Result<()> {
    if v.iter().any(|&x| x > 1) {
        return Err(Error::Validation(format!("{name} must be 0 or 1")));
    }
    Ok(())
}

pub fn confusion(labels: &[u8], calls: &[u8]) -> Result<ConfusionMatrix> {
    if labels.len() != calls.len() {
        return Err(Error::Dimension(format!(
            "{} labels but {} calls",
            labels.len(),
            calls.len()
        )));
    }
    check_binary("labels", labels)?;
    check_binary("calls", calls)?;
    let mut cm = ConfusionMatrix::default();
    for (&y, &c) in labels.iter().zip(calls) {
        match (y, c) {
            (1, 1) => cm.tp += 1,
            (1, _) => cm.fn_ += 1,
            (_, 1) => cm.fp += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub balanced_accuracy: f64,
    pub mcc: f64,
    pub f1: f64,
    /// Metrics whose denominator vanished and were reported as 0.
    pub degenerate: Vec<&'static str>,
}

/// Sensitivity, specificity, precision, balanced accuracy, Matthews
/// correlation and F1. A metric with a zero denominator is reported as 0 and
/// named in `degenerate`.
pub fn point_metrics(cm: &ConfusionMatrix) -> Result<PointMetrics> {
    if cm.total() == 0 {
        return Err(Error::Validation("empty confusion matrix".into()));
    }
    let mut degenerate = Vec::new();
    let mut ratio = |name: &'static str, num: u64, den: u64| {
        if den == 0 {
            degenerate.push(name);
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let sensitivity = ratio("sensitivity", cm.tp, cm.tp + cm.fn_);
    let specificity = ratio("specificity", cm.tn, cm.fp + cm.tn);
    let precision = ratio("precision", cm.tp, cm.tp + cm.fp);
    let balanced_accuracy = (sensitivity + specificity) / 2.0;

    let (tp, fn_, fp, tn) = (cm.tp as f64, cm.fn_ as f64, cm.fp as f64, cm.tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = if den == 0.0 {
        degenerate.push("mcc");
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    };
    let f1 = if degenerate.contains(&"precision") || cm.tp == 0 {
        if !degenerate.contains(&"precision") {
            degenerate.push("f1");
        }
        0.0
    } else {
        2.0 / (1.0 / sensitivity + 1.0 / precision)
    };
    Ok(PointMetrics {
        sensitivity,
        specificity,
        precision,
        balanced_accuracy,
        mcc,
        f1,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Calls are positive when score >= cutpoint.
    pub cutpoint: f64,
    pub x: f64,
    pub y: f64,
}

/// Cumulative (threshold, tp, fp) at each distinct score, highest first.
fn sweep(labels: &[u8], scores: &[f64]) -> Result<(Vec<(f64, u64, u64)>, u64, u64)> {
    if labels.len() != scores.len() {
        return Err(Error::Dimension(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    check_binary("labels", labels)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Validation("scores must be finite".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateClass);
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((s, tp, fp));
    }
    Ok((out, pos, neg))
}

/// ROC points from (0, 0) to (1, 1); x is the false positive rate and y the
/// true positive rate.
pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<Vec<CurvePoint>> {
    let (steps, pos, neg) = sweep(labels, scores)?;
    let mut pts = vec![CurvePoint {
        cutpoint: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    pts.extend(steps.iter().map(|&(c, tp, fp)| CurvePoint {
        cutpoint: c,
        x: fp as f64 / neg as f64,
        y: tp as f64 / pos as f64,
    }));
    Ok(pts)
}

/// Trapezoidal area under the ROC curve. Tied scores form one diagonal
/// segment, so the area equals the Mann-Whitney statistic exactly; the sum is
/// accumulated in integers and divided once.
pub fn auroc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (steps, pos, neg) = sweep(labels, scores)?;
    let mut twice_area: u128 = 0;
    let (mut tp0, mut fp0) = (0u64, 0u64);
    for &(_, tp, fp) in &steps {
        twice_area += (fp - fp0) as u128 * (tp + tp0) as u128;
        tp0 = tp;
        fp0 = fp;
    }
    Ok(twice_area as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Precision-recall points, recall on x. The recall-0 endpoint carries the
/// precision of the first point with positive recall.
pub fn pr_curve(labels: &[u8], scores: &[f64]) -> Result<Vec<CurvePoint>> {
    let (steps, pos, _) = sweep(labels, scores)?;
    let first_precision = steps
        .iter()
        .find(|s| s.1 > 0)
        .map(|&(_, tp, fp)| tp as f64 / (tp + fp) as f64)
        .expect("at least one positive");
    let mut pts = vec![CurvePoint {
        cutpoint: f64::INFINITY,
        x: 0.0,
        y: first_precision,
    }];
    pts.extend(steps.iter().map(|&(c, tp, fp)| CurvePoint {
        cutpoint: c,
        x: tp as f64 / pos as f64,
        y: tp as f64 / (tp + fp) as f64,
    }));
    Ok(pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrIntegration {
    /// Right-continuous steps: each recall increment weighted by the
    /// precision reached at its end.
    #[default]
    Step,
    Trapezoid,
}

pub fn auprc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    auprc_with(labels, scores, PrIntegration::Step)
}

pub fn auprc_with(labels: &[u8], scores: &[f64], rule: PrIntegration) -> Result<f64> {
    let pts = pr_curve(labels, scores)?;
    Ok(pts
        .windows(2)
        .map(|w| {
            let dx = w[1].x - w[0].x;
            match rule {
                PrIntegration::Step => dx * w[1].y,
                PrIntegration::Trapezoid => dx * (w[0].y + w[1].y) / 2.0,
            }
        })
        .sum())
}

/// Pearson correlation of two binary series, i.e. the Matthews correlation of
/// one against the other.
pub fn phi_coefficient(a: &[u8], b: &[u8]) -> Result<f64> {
    let cm = confusion(a, b)?;
    if cm.positives() == 0 || cm.negatives() == 0 || cm.tp + cm.fp == 0 || cm.fn_ + cm.tn == 0 {
        return Err(Error::Validation(
            "phi coefficient needs both series to take both values".into(),
        ));
    }
    Ok(point_metrics(&cm)?.mcc)
}

//! Blocked rolling-window cross-validation and cost-sensitive thresholds.
//!
//! Each block is a contiguous window of the training sample split into an
//! earlier train part and a later validation part. Candidates are compared
//! by their mean validation misclassification cost, each block scored at its
//! own cost-minimizing cutpoint.

use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data_io::write_csv;
use crate::error::{Error, Result};
use crate::glm::{
    class_weights, fit_with, predict_proba_matrix, ClassWeights, ModelKind, PenaltySpec,
    SolverOptions, PROB_CLAMP,
};
use crate::numfmt::format_value;

pub const DEFAULT_BLOCK_LEN: usize = 288;
pub const DEFAULT_STEP: usize = 12;
pub const DEFAULT_TRAIN_FRACTION: f64 = 5.0 / 6.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub train: Range<usize>,
    pub validation: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    pub blocks: Vec<Block>,
}

pub fn make_blocks(t: usize, block_len: usize, step: usize, train_fraction: f64) -> Result<BlockPlan> {
    if block_len < 2 || step == 0 {
        return Err(Error::Validation(format!(
            "block length {block_len} and step {step} must be positive"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    if t < block_len {
        return Err(Error::InsufficientData(format!(
            "{t} rows, a cross-validation block needs {block_len}"
        )));
    }
    // Round away float noise such as 5/6 * 288 = 240.00000000000003.
    let raw = train_fraction * block_len as f64;
    let n_train = ((raw - 1e-9).ceil() as usize).clamp(1, block_len - 1);
    let blocks = (0..)
        .map(|i| i * step)
        .take_while(|s| s + block_len <= t)
        .map(|start| Block {
            start,
            end: start + block_len,
            train: start..start + n_train,
            validation: start + n_train..start + block_len,
        })
        .collect();
    Ok(BlockPlan { blocks })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec {
    pub cost_fn: f64,
    pub cost_fp: f64,
}

impl CostSpec {
    pub fn new(cost_fn: f64, cost_fp: f64) -> Result<Self> {
        if !(cost_fp > 0.0 && cost_fn.is_finite()) || cost_fn < cost_fp {
            return Err(Error::Validation(format!(
                "costs must satisfy cost_fn >= cost_fp > 0, got {cost_fn} and {cost_fp}"
            )));
        }
        Ok(CostSpec { cost_fn, cost_fp })
    }

    /// Costs equal to the balanced class weights of `labels`.
    pub fn from_labels(labels: &[u8]) -> Result<Self> {
        let w = class_weights(labels)?;
        CostSpec::new(w.w_pos, w.w_neg)
    }

    pub fn as_weights(&self) -> ClassWeights {
        ClassWeights {
            w_pos: self.cost_fn,
            w_neg: self.cost_fp,
        }
    }
}

fn better(a: f64, b: f64) -> bool {
    a < b - 1e-12 * a.abs().max(b.abs())
}

/// Cutpoint minimizing `cost_fn * FN + cost_fp * FP`, calling positive when
/// `p >= c`. Candidates are 0, 1 and the midpoints between adjacent distinct
/// probabilities; cost is constant between them, so one is a minimizer. Ties
/// (to 1e-12 relative) go to the smallest cutpoint. Returns (cutpoint, cost).
pub fn optimal_threshold(probabilities: &[f64], labels: &[u8], costs: &CostSpec) -> Result<(f64, f64)> {
    if probabilities.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} probabilities but {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Validation("probabilities must lie in [0, 1]".into()));
    }
    let pos_total = labels.iter().filter(|&&y| y == 1).count();
    if pos_total == 0 || pos_total == labels.len() {
        return Err(Error::DegenerateClass);
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| probabilities[a].total_cmp(&probabilities[b]));

    // Walk cutpoints upward; everything strictly below the cutpoint is
    // called negative.
    let cost = |fn_: usize, fp: usize| costs.cost_fn * fn_ as f64 + costs.cost_fp * fp as f64;
    let neg_total = labels.len() - pos_total;
    let (mut fn_, mut fp) = (0usize, neg_total);
    let mut best = (0.0, cost(fn_, fp));
    let mut i = 0;
    while i < order.len() {
        let p = probabilities[order[i]];
        while i < order.len() && probabilities[order[i]] == p {
            if labels[order[i]] == 1 {
                fn_ += 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
        let c = if i < order.len() {
            let next = probabilities[order[i]];
            let mid = p + (next - p) / 2.0;
            if mid > p {
                mid
            } else {
                next
            }
        } else {
            1.0
        };
        if c <= p {
            // p == 1: no cutpoint in [0, 1] separates it from below
            continue;
        }
        let v = cost(fn_, fp);
        if better(v, best.1) {
            best = (c, v);
        }
    }
    Ok(best)
}

/// `n` log-spaced values from `hi` down to `lo`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                hi
            } else if i == n - 1 {
                lo
            } else {
                (b + (a - b) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Hyperparameter candidates: one path per `alpha`, each walking `lambdas`
/// in the given order (descending for warm starts).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Grid {
    pub fn single(penalty: PenaltySpec) -> Self {
        Grid {
            alphas: vec![penalty.alpha],
            lambdas: vec![penalty.lambda],
        }
    }

    /// Default grid for each model family: 1000 values of lambda over
    /// [1e-5, 1e2] for Ridge and LASSO, 200 values times alpha in
    /// {0.25, 0.5, 0.75} for Elastic Net, and no penalty for the logits.
    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Logit | ModelKind::WeightedLogit => Grid::single(PenaltySpec::none()),
            ModelKind::Ridge => Grid {
                alphas: vec![0.0],
                lambdas: log_grid(1e-5, 1e2, 1000),
            },
            ModelKind::Lasso => Grid {
                alphas: vec![1.0],
                lambdas: log_grid(1e-5, 1e2, 1000),
            },
            ModelKind::ElasticNet => Grid {
                alphas: vec![0.25, 0.5, 0.75],
                lambdas: log_grid(1e-5, 1e2, 200),
            },
        }
    }

    /// Same shape with `n` lambdas; used to trade resolution for speed.
    pub fn with_lambda_count(mut self, n: usize) -> Self {
        if self.lambdas.len() > 1 && n >= 1 {
            let hi = self.lambdas[0];
            let lo = *self.lambdas.last().unwrap();
            self.lambdas = log_grid(lo, hi, n);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.alphas.len() * self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidates in path order: alpha-major, lambda as listed.
    pub fn candidates(&self) -> Vec<PenaltySpec> {
        self.alphas
            .iter()
            .flat_map(|&a| self.lambdas.iter().map(move |&l| PenaltySpec { alpha: a, lambda: l }))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    /// Mean validation cost at each block's optimal cutpoint, ties broken by
    /// weighted validation log-loss.
    #[default]
    Cost,
    LogLoss,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub block_len: usize,
    pub step: usize,
    pub train_fraction: f64,
    pub selection: SelectionMetric,
    pub solver: SolverOptions,
    /// When false, candidates are scored even if their fits did not
    /// converge. Unpenalized models have nothing to select, so a
    /// non-converged fit still yields a usable threshold. A candidate with
    /// `lambda == 0` is always exempt: under separation it has no finite
    /// optimum to converge to.
    pub require_convergence: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            block_len: DEFAULT_BLOCK_LEN,
            step: DEFAULT_STEP,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            selection: SelectionMetric::Cost,
            solver: SolverOptions::default(),
            require_convergence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub candidate: usize,
    pub block: usize,
    pub penalty: PenaltySpec,
    pub cost: f64,
    pub log_loss: f64,
    pub threshold: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub penalty: PenaltySpec,
    /// NaN when the candidate was not eligible.
    pub mean_cost: f64,
    pub mean_log_loss: f64,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: PenaltySpec,
    pub per_block_thresholds: Vec<f64>,
    /// Mean of `per_block_thresholds`.
    pub threshold: f64,
    pub scores: Vec<CandidateScore>,
    /// Blocks that had both classes in both splits.
    pub scored_blocks: Vec<usize>,
    pub trace: Vec<TraceRow>,
}

fn weighted_log_loss(probs: &[f64], labels: &[u8], w: &ClassWeights) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let s = w.of(y);
        num -= s * if y == 1 { p.ln() } else { (1.0 - p).ln() };
        den += s;
    }
    num / den
}

fn rows(x: &DMatrix<f64>, r: &Range<usize>) -> DMatrix<f64> {
    x.rows(r.start, r.len()).into_owned()
}

fn has_both(labels: &[u8]) -> bool {
    labels.contains(&0) && labels.contains(&1)
}

/// Runs every alpha path of `grid` on one block. Along a path each fit is
/// warm-started from the previous one.
fn score_block(
    x: &DMatrix<f64>,
    labels: &[u8],
    block: &Block,
    block_id: usize,
    grid: &Grid,
    weighted: bool,
    costs: &CostSpec,
    opts: &CvOptions,
) -> Result<Vec<TraceRow>> {
    let xt = rows(x, &block.train);
    let yt = &labels[block.train.clone()];
    let xv = rows(x, &block.validation);
    let yv = &labels[block.validation.clone()];
    let weights = if weighted {
        class_weights(yt)?
    } else {
        ClassWeights::unit()
    };
    let loss_weights = costs.as_weights();
    let mut out = Vec::with_capacity(grid.len());
    for (ai, &alpha) in grid.alphas.iter().enumerate() {
        let mut warm: Option<Vec<f64>> = None;
        for (li, &lambda) in grid.lambdas.iter().enumerate() {
            let penalty = PenaltySpec::new(alpha, lambda)?;
            let fit = fit_with(&xt, yt, &weights, &penalty, &opts.solver, warm.as_deref())?;
            let probs = predict_proba_matrix(&fit.coefficients, &xv);
            let (threshold, cost) = optimal_threshold(&probs, yv, costs)?;
            out.push(TraceRow {
                candidate: ai * grid.lambdas.len() + li,
                block: block_id,
                penalty,
                cost,
                log_loss: weighted_log_loss(&probs, yv, &loss_weights),
                threshold,
                converged: fit.converged,
            });
            warm = Some(fit.coefficients);
        }
    }
    Ok(out)
}

/// Scores every candidate of `grid` on every usable block of the sample and
/// returns the winner with the mean of its per-block cutpoints. `weighted`
/// selects balanced class weights in the fits; `costs` prices validation
/// errors. Blocks whose train or validation split holds a single class are
/// skipped.
pub fn grid_search(
    x: &DMatrix<f64>,
    labels: &[u8],
    weighted: bool,
    grid: &Grid,
    costs: &CostSpec,
    opts: &CvOptions,
) -> Result<TuneResult> {
    if x.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::Validation("empty hyperparameter grid".into()));
    }
    let plan = make_blocks(labels.len(), opts.block_len, opts.step, opts.train_fraction)?;
    let usable: Vec<(usize, &Block)> = plan
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| has_both(&labels[b.train.clone()]) && has_both(&labels[b.validation.clone()]))
        .collect();
    if usable.is_empty() {
        return Err(Error::Tuning(
            "every cross-validation block has a single-class split".into(),
        ));
    }

    let per_block: Vec<Vec<TraceRow>> = usable
        .par_iter()
        .map(|&(id, b)| score_block(x, labels, b, id, grid, weighted, costs, opts))
        .collect::<Result<_>>()?;

    let candidates = grid.candidates();
    let nb = per_block.len() as f64;
    let scores: Vec<CandidateScore> = candidates
        .iter()
        .enumerate()
        .map(|(c, &penalty)| {
            let eligible = !opts.require_convergence
                || penalty.lambda == 0.0
                || per_block.iter().all(|b| b[c].converged);
            let (mean_cost, mean_log_loss) = if eligible {
                (
                    per_block.iter().map(|b| b[c].cost).sum::<f64>() / nb,
                    per_block.iter().map(|b| b[c].log_loss).sum::<f64>() / nb,
                )
            } else {
                (f64::NAN, f64::NAN)
            };
            CandidateScore {
                penalty,
                mean_cost,
                mean_log_loss,
                eligible,
            }
        })
        .collect();

    let key = |s: &CandidateScore| match opts.selection {
        SelectionMetric::Cost => (s.mean_cost, s.mean_log_loss),
        SelectionMetric::LogLoss => (s.mean_log_loss, s.mean_cost),
    };
    let mut best: Option<usize> = None;
    for (c, s) in scores.iter().enumerate() {
        if !s.eligible {
            continue;
        }
        best = match best {
            None => Some(c),
            Some(b) => {
                let (k1, k2) = key(s);
                let (b1, b2) = key(&scores[b]);
                if better(k1, b1) || (!better(b1, k1) && better(k2, b2)) {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best = best.ok_or_else(|| {
        Error::Tuning(format!("none of {} candidates converged on every block", scores.len()))
    })?;
    let per_block_thresholds: Vec<f64> = per_block.iter().map(|b| b[best].threshold).collect();
    let threshold = per_block_thresholds.iter().sum::<f64>() / nb;
    Ok(TuneResult {
        best: candidates[best],
        per_block_thresholds,
        threshold,
        scores,
        scored_blocks: usable.iter().map(|&(id, _)| id).collect(),
        trace: per_block.into_iter().flatten().collect(),
    })
}

pub fn write_trace_csv(path: &Path, result: &TuneResult) -> Result<()> {
    write_csv(
        path,
        &["candidate", "alpha", "lambda", "block", "validation_cost", "log_loss", "threshold", "converged"],
        result.trace.iter().map(|r| {
            vec![
                r.candidate.to_string(),
                format_value(r.penalty.alpha),
                format_value(r.penalty.lambda),
                r.block.to_string(),
                format_value(r.cost),
                format_value(r.log_loss),
                format_value(r.threshold),
                u8::from(r.converged).to_string(),
            ]
        }),
    )
}

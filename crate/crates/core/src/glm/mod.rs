//! Logit, weighted logit, Ridge, LASSO and Elastic Net logistic regression.
//!
//! All five estimators minimize one objective,
//!
//! ```text
//! -sum_t s_t [y_t ln p_t + (1 - y_t) ln(1 - p_t)] + lambda ((1 - alpha) sum_j b_j^2 + alpha sum_j |b_j|)
//! ```
//!
//! where `s_t` is the class weight of observation `t` (1 when unweighted) and
//! the penalty sums run over slopes only. The log-likelihood is a raw sum, not
//! a mean, so `lambda` is on the scale of the summed weights.

mod solver;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use solver::{fit, fit_with, lambda_max, SolverOptions};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logs.
pub const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub alpha: f64,
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Validation(format!("alpha {alpha} outside [0, 1]")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Validation(format!("lambda {lambda} must be finite and >= 0")));
        }
        Ok(PenaltySpec { alpha, lambda })
    }

    pub fn none() -> Self {
        PenaltySpec {
            alpha: 0.0,
            lambda: 0.0,
        }
    }

    pub fn l1_weight(&self) -> f64 {
        self.alpha * self.lambda
    }

    pub fn l2_weight(&self) -> f64 {
        (1.0 - self.alpha) * self.lambda
    }

    /// Penalty on `beta`, skipping the intercept at index 0.
    pub fn value(&self, beta: &[f64]) -> f64 {
        let slopes = &beta[1..];
        self.l2_weight() * slopes.iter().map(|b| b * b).sum::<f64>()
            + self.l1_weight() * slopes.iter().map(|b| b.abs()).sum::<f64>()
    }
}

/// Per-class observation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub w_pos: f64,
    pub w_neg: f64,
}

impl ClassWeights {
    pub fn unit() -> Self {
        ClassWeights {
            w_pos: 1.0,
            w_neg: 1.0,
        }
    }

    pub fn of(&self, label: u8) -> f64 {
        if label == 1 {
            self.w_pos
        } else {
            self.w_neg
        }
    }

    pub fn per_observation(&self, labels: &[u8]) -> Vec<f64> {
        labels.iter().map(|&y| self.of(y)).collect()
    }
}

/// Balanced weights `1 / (2 N+)` and `1 / (2 N-)`; they sum to one over the
/// sample.
pub fn class_weights(labels: &[u8]) -> Result<ClassWeights> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateClass);
    }
    Ok(ClassWeights {
        w_pos: 0.5 / pos as f64,
        w_neg: 0.5 / neg as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Logit,
    WeightedLogit,
    Ridge,
    Lasso,
    ElasticNet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Logit,
        ModelKind::WeightedLogit,
        ModelKind::Lasso,
        ModelKind::Ridge,
        ModelKind::ElasticNet,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Logit => "logit",
            ModelKind::WeightedLogit => "wlogit",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::ElasticNet => "enet",
        }
    }

    /// Penalized fits use class weights, as does the weighted logit.
    pub fn weighted(self) -> bool {
        self != ModelKind::Logit
    }

    pub fn penalized(self) -> bool {
        matches!(self, ModelKind::Ridge | ModelKind::Lasso | ModelKind::ElasticNet)
    }

    /// True when the penalty has an L1 part, so zero coefficients are exact.
    pub fn selects_variables(self) -> bool {
        matches!(self, ModelKind::Lasso | ModelKind::ElasticNet)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown model `{s}`, expected one of logit, wlogit, lasso, ridge, enet"
                ))
            })
    }
}

/// Which estimator to fit and with what penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub penalty: PenaltySpec,
    pub weighted: bool,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, penalty: PenaltySpec) -> Result<Self> {
        let ok = match kind {
            ModelKind::Logit | ModelKind::WeightedLogit => penalty.lambda == 0.0,
            ModelKind::Ridge => penalty.alpha == 0.0,
            ModelKind::Lasso => penalty.alpha == 1.0,
            ModelKind::ElasticNet => true,
        };
        if !ok {
            return Err(Error::Validation(format!(
                "penalty alpha={} lambda={} does not fit model {kind}",
                penalty.alpha, penalty.lambda
            )));
        }
        Ok(ModelSpec {
            kind,
            penalty,
            weighted: kind.weighted(),
        })
    }

    pub fn unpenalized(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            penalty: PenaltySpec::none(),
            weighted: kind.weighted(),
        }
    }

    pub fn weights(&self, labels: &[u8]) -> Result<ClassWeights> {
        if self.weighted {
            class_weights(labels)
        } else {
            Ok(ClassWeights::unit())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Intercept first, then one slope per design column.
    pub coefficients: Vec<f64>,
    /// Set only when the solver stopped on its coefficient-change criterion
    /// and the KKT residual at exit is below tolerance.
    pub converged: bool,
    /// Coordinate-descent sweeps plus exact quadratic solves.
    pub iterations: usize,
    pub objective: f64,
    pub kkt: f64,
}

/// Numerically stable inverse logit.
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn linear_predictor(beta: &[f64], row: &[f64]) -> f64 {
    beta.iter().zip(row).map(|(b, x)| b * x).sum()
}

pub fn predict_proba(beta: &[f64], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|r| {
            if r.len() != beta.len() {
                return Err(Error::Dimension(format!(
                    "row has {} entries, coefficients {}",
                    r.len(),
                    beta.len()
                )));
            }
            Ok(sigmoid(linear_predictor(beta, r)))
        })
        .collect()
}

pub fn predict_proba_matrix(beta: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
    let eta = x * nalgebra::DVector::from_column_slice(beta);
    eta.iter().map(|&e| sigmoid(e)).collect()
}

fn check_dims(beta: &[f64], x: &DMatrix<f64>, labels: &[u8]) -> Result<()> {
    if beta.len() != x.ncols() || labels.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "design {}x{}, {} labels, {} coefficients",
            x.nrows(),
            x.ncols(),
            labels.len(),
            beta.len()
        )));
    }
    Ok(())
}

/// Weighted negative log-likelihood of linear predictors `eta`.
pub(crate) fn neg_log_likelihood(eta: &[f64], labels: &[u8], weights: &ClassWeights) -> f64 {
    eta.iter()
        .zip(labels)
        .map(|(&e, &y)| {
            let p = sigmoid(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -weights.w_pos * p.ln()
            } else {
                -weights.w_neg * (1.0 - p).ln()
            }
        })
        .sum()
}

/// Penalized weighted negative log-likelihood.
pub fn objective(
    beta: &[f64],
    x: &DMatrix<f64>,
    labels: &[u8],
    weights: &ClassWeights,
    penalty: &PenaltySpec,
) -> Result<f64> {
    check_dims(beta, x, labels)?;
    let eta = x * nalgebra::DVector::from_column_slice(beta);
    Ok(neg_log_likelihood(eta.as_slice(), labels, weights) + penalty.value(beta))
}

/// Gradient of the weighted negative log-likelihood (the smooth part).
pub fn gradient(
    beta: &[f64],
    x: &DMatrix<f64>,
    labels: &[u8],
    weights: &ClassWeights,
) -> Result<Vec<f64>> {
    check_dims(beta, x, labels)?;
    let eta = x * nalgebra::DVector::from_column_slice(beta);
    Ok(gradient_from_eta(eta.as_slice(), x, labels, weights))
}

pub(crate) fn gradient_from_eta(
    eta: &[f64],
    x: &DMatrix<f64>,
    labels: &[u8],
    weights: &ClassWeights,
) -> Vec<f64> {
    let n = x.nrows();
    let resid: Vec<f64> = eta
        .iter()
        .zip(labels)
        .map(|(&e, &y)| weights.of(y) * (sigmoid(e) - f64::from(y)))
        .collect();
    let data = x.as_slice();
    (0..x.ncols())
        .map(|j| {
            data[j * n..(j + 1) * n]
                .iter()
                .zip(&resid)
                .map(|(a, r)| a * r)
                .sum()
        })
        .collect()
}

pub(crate) fn kkt_from_gradient(beta: &[f64], grad: &[f64], penalty: &PenaltySpec) -> f64 {
    let l1 = penalty.l1_weight();
    let l2 = penalty.l2_weight();
    let mut worst = grad[0].abs();
    for j in 1..beta.len() {
        let r = if beta[j] == 0.0 {
            (grad[j].abs() - l1).max(0.0)
        } else {
            (grad[j] + l1 * beta[j].signum() + 2.0 * l2 * beta[j]).abs()
        };
        worst = worst.max(r);
    }
    worst
}

/// Largest violation of the optimality conditions at `beta`: the subgradient
/// condition on each slope and the plain gradient on the intercept.
pub fn kkt_residual(
    beta: &[f64],
    x: &DMatrix<f64>,
    labels: &[u8],
    weights: &ClassWeights,
    penalty: &PenaltySpec,
) -> Result<f64> {
    let grad = gradient(beta, x, labels, weights)?;
    Ok(kkt_from_gradient(beta, &grad, penalty))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_weight_formula() {
        let mut labels = vec![1u8; 20];
        labels.extend(vec![0u8; 160]);
        let w = class_weights(&labels).unwrap();
        assert_eq!(w.w_pos, 0.025);
        assert_eq!(w.w_neg, 0.003125);
        let total: f64 = w.per_observation(&labels).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_weights_are_one_over_n() {
        let labels = [1u8, 0, 1, 0, 1, 0];
        let w = class_weights(&labels).unwrap();
        assert!((w.w_pos - 1.0 / 6.0).abs() < 1e-15);
        assert!((w.w_neg - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(class_weights(&[0, 0, 0]), Err(Error::DegenerateClass)));
        assert!(matches!(class_weights(&[1]), Err(Error::DegenerateClass)));
    }

    #[test]
    fn objective_at_zero_is_n_ln2() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, 1.0, -1.0, 1.0, 2.0, 1.0, 0.5]);
        let labels = [1, 0, 1, 0];
        let pen = PenaltySpec::new(0.5, 3.0).unwrap();
        let v = objective(&[0.0, 0.0], &x, &labels, &ClassWeights::unit(), &pen).unwrap();
        assert!((v - 4.0 * std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn objective_matches_hand_summation() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -1.0, 1.0, -0.2, 0.4, 1.0, 1.5, 0.0]);
        let labels = [1u8, 0, 0];
        let beta = [0.1, -0.7, 0.3];
        let w = ClassWeights {
            w_pos: 0.5,
            w_neg: 0.25,
        };
        let pen = PenaltySpec::new(0.25, 0.2).unwrap();
        let mut expect = 0.0;
        for i in 0..3 {
            let mut eta = 0.0_f64;
            for j in 0..3 {
                eta += x[(i, j)] * beta[j];
            }
            let p = 1.0 / (1.0 + (-eta).exp());
            expect -= if labels[i] == 1 { 0.5 * p.ln() } else { 0.25 * (1.0 - p).ln() };
        }
        expect += 0.2 * (0.75 * (0.49 + 0.09) + 0.25 * (0.7 + 0.3));
        let got = objective(&beta, &x, &labels, &w, &pen).unwrap();
        assert!((got - expect).abs() < 1e-14);
        let unpen = objective(&beta, &x, &labels, &w, &PenaltySpec::none()).unwrap();
        assert!((unpen - (expect - 0.2 * (0.75 * 0.58 + 0.25))).abs() < 1e-14);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        let p = predict_proba(&[0.0, 0.0], &[vec![1.0, 9.0], vec![1.0, -3.0]]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn model_ids_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.id().parse::<ModelKind>().unwrap(), k);
        }
        assert!("probit".parse::<ModelKind>().is_err());
    }

    #[test]
    fn model_spec_checks_penalty_shape() {
        assert!(ModelSpec::new(ModelKind::Lasso, PenaltySpec::new(0.5, 1.0).unwrap()).is_err());
        assert!(ModelSpec::new(ModelKind::Logit, PenaltySpec::new(0.0, 1.0).unwrap()).is_err());
        assert!(ModelSpec::new(ModelKind::Ridge, PenaltySpec::new(0.0, 1.0).unwrap()).is_ok());
    }
}

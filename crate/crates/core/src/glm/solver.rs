//! Proximal-Newton solver: an IRLS outer loop forms a weighted least-squares
//! approximation of the log-likelihood, and cyclic coordinate descent with
//! soft-thresholding minimizes that approximation plus the penalty.

use nalgebra::{DMatrix, DVector};

use super::{
    class_weights, gradient_from_eta, kkt_from_gradient, neg_log_likelihood, sigmoid,
    ClassWeights, FitResult, ModelSpec, PenaltySpec,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once no coefficient moves more than this across an outer step.
    pub coef_tol: f64,
    /// A fit is reported converged only if its KKT residual is below this.
    pub kkt_tol: f64,
    /// Inner coordinate-descent stopping threshold on coefficient change.
    pub inner_tol: f64,
    pub max_sweeps: usize,
    pub max_outer: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            coef_tol: 1e-7,
            kkt_tol: 1e-6,
            inner_tol: 1e-10,
            max_sweeps: 100_000,
            max_outer: 200,
        }
    }
}

/// Fits `model` with default solver settings, starting from slopes at zero
/// and the intercept at the weighted base-rate logit.
pub fn fit(x: &DMatrix<f64>, labels: &[u8], model: &ModelSpec) -> Result<FitResult> {
    let weights = model.weights(labels)?;
    fit_with(x, labels, &weights, &model.penalty, &SolverOptions::default(), None)
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Smallest `lambda` at which every slope is zero for mixing weight `alpha`.
pub fn lambda_max(x: &DMatrix<f64>, labels: &[u8], weights: &ClassWeights, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Ok(f64::INFINITY);
    }
    class_weights(labels)?;
    let (pos, neg) = labels.iter().fold((0.0, 0.0), |(p, q), &y| {
        if y == 1 {
            (p + weights.w_pos, q)
        } else {
            (p, q + weights.w_neg)
        }
    });
    let b0 = (pos / neg).ln();
    let eta = vec![b0; labels.len()];
    let grad = gradient_from_eta(&eta, x, labels, weights);
    Ok(grad[1..].iter().fold(0.0f64, |m, g| m.max(g.abs())) / alpha)
}

/// Minimizes the penalized objective. `warm` seeds the coefficients.
pub fn fit_with(
    x: &DMatrix<f64>,
    labels: &[u8],
    weights: &ClassWeights,
    penalty: &PenaltySpec,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<FitResult> {
    let n = x.nrows();
    let k = x.ncols();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{n} rows but {} labels", labels.len())));
    }
    if k == 0 || n == 0 {
        return Err(Error::Dimension("empty design".into()));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Validation("labels must be 0 or 1".into()));
    }
    class_weights(labels)?;

    let data = x.as_slice();
    let col = |j: usize| &data[j * n..(j + 1) * n];
    let s: Vec<f64> = labels.iter().map(|&y| weights.of(y)).collect();
    let l1 = penalty.l1_weight();
    let l2 = penalty.l2_weight();

    let mut beta = match warm {
        Some(w) if w.len() == k => w.to_vec(),
        Some(w) => {
            return Err(Error::Dimension(format!(
                "warm start has {} coefficients, design {k}",
                w.len()
            )))
        }
        None => {
            let mut b = vec![0.0; k];
            let (pos, neg) = labels.iter().zip(&s).fold((0.0, 0.0), |(p, q), (&y, &w)| {
                if y == 1 {
                    (p + w, q)
                } else {
                    (p, q + w)
                }
            });
            b[0] = (pos / neg).ln();
            b
        }
    };

    let mut eta = vec![0.0; n];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (e, a) in eta.iter_mut().zip(col(j)) {
                *e += a * b;
            }
        }
    }
    let mut obj = neg_log_likelihood(&eta, labels, weights) + penalty.value(&beta);
    let mut grad = gradient_from_eta(&eta, x, labels, weights);
    let mut kkt = kkt_from_gradient(&beta, &grad, penalty);
    let mut sweeps = 0usize;

    let mut scaled = DMatrix::<f64>::zeros(n, k);
    let mut trial = beta.clone();
    let mut eta_trial = vec![0.0; n];
    let mut sv = vec![0.0; n];

    // A warm start that already satisfies the optimality conditions is
    // returned as is; along a path this covers every lambda above the point
    // where the first slope enters.
    let mut settled = kkt <= opts.kkt_tol * 1e-3;
    let outer_budget = if settled { 0 } else { opts.max_outer };

    for _ in 0..outer_budget {
        if sweeps >= opts.max_sweeps {
            break;
        }
        // Quadratic model of the smooth part around beta:
        //   0.5 d' G d - c' d,  G = X' V X,  c = X' s (y - p) = -grad.
        // Rows of X are scaled by sqrt(v) so G is a plain cross product.
        for (i, w) in sv.iter_mut().enumerate() {
            let p = sigmoid(eta[i]);
            *w = (s[i] * (p * (1.0 - p)).max(1e-10)).sqrt();
        }
        for j in 0..k {
            let src = col(j);
            for ((dst, a), w) in scaled.column_mut(j).iter_mut().zip(src).zip(&sv) {
                *dst = a * w;
            }
        }
        let c: Vec<f64> = grad.iter().map(|g| -g).collect();

        let solved = if l1 == 0.0 { newton_step(&scaled, &c, &beta, l2) } else { None };
        match solved {
            Some(b) => {
                trial = b;
                sweeps += 1;
            }
            None => {
                trial.copy_from_slice(&beta);
                let mut gram = LazyGram::new(&scaled);
                sweeps = coordinate_descent(&mut gram, &c, &beta, &mut trial, l1, l2, opts, sweeps);
            }
        }

        // Backtrack along the segment from beta to the quadratic minimizer
        // if the full step does not decrease the objective.
        let delta: Vec<f64> = trial.iter().zip(&beta).map(|(t, b)| t - b).collect();
        let mut xd = vec![0.0; n];
        for (j, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                for (e, a) in xd.iter_mut().zip(col(j)) {
                    *e += a * d;
                }
            }
        }
        let mut step = 1.0;
        let mut new_obj;
        loop {
            for i in 0..n {
                eta_trial[i] = eta[i] + step * xd[i];
            }
            let candidate: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
            new_obj = neg_log_likelihood(&eta_trial, labels, weights) + penalty.value(&candidate);
            if new_obj <= obj + 1e-13 * obj.abs().max(1.0) || step < 1e-9 {
                trial = candidate;
                break;
            }
            step *= 0.5;
        }

        let change = beta
            .iter()
            .zip(&trial)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        beta.copy_from_slice(&trial);
        eta.copy_from_slice(&eta_trial);
        obj = new_obj;
        grad = gradient_from_eta(&eta, x, labels, weights);
        kkt = kkt_from_gradient(&beta, &grad, penalty);
        if change < opts.coef_tol {
            settled = true;
            break;
        }
    }

    Ok(FitResult {
        // Under separation the gradient vanishes while coefficients keep
        // growing, so a small KKT residual alone is not enough.
        converged: settled && kkt < opts.kkt_tol,
        coefficients: beta,
        iterations: sweeps,
        objective: obj,
        kkt,
    })
}

/// Exact minimizer of the quadratic model plus a pure L2 penalty on the
/// slopes: solves (G + 2 l2 D) b = G beta + c with D zero on the intercept.
/// `None` when the system is not positive definite.
fn newton_step(scaled: &DMatrix<f64>, c: &[f64], beta: &[f64], l2: f64) -> Option<Vec<f64>> {
    let k = beta.len();
    let gram = scaled.tr_mul(scaled);
    let mut a = gram.clone();
    for j in 1..k {
        a[(j, j)] += 2.0 * l2;
    }
    let gb = &gram * DVector::from_column_slice(beta);
    let rhs = DVector::from_iterator(k, (0..k).map(|j| gb[j] + c[j]));
    let chol = a.cholesky()?;
    let b = chol.solve(&rhs);
    b.iter().all(|v| v.is_finite()).then(|| b.iter().copied().collect())
}

/// Columns of G = S'S computed on first use; coordinates that never move
/// never need theirs.
struct LazyGram<'a> {
    scaled: &'a DMatrix<f64>,
    diag: Vec<f64>,
    cols: Vec<Option<Vec<f64>>>,
}

impl<'a> LazyGram<'a> {
    fn new(scaled: &'a DMatrix<f64>) -> Self {
        let diag = scaled.column_iter().map(|c| c.norm_squared()).collect();
        LazyGram {
            scaled,
            diag,
            cols: vec![None; scaled.ncols()],
        }
    }

    fn column(&mut self, j: usize) -> &[f64] {
        let scaled = self.scaled;
        self.cols[j].get_or_insert_with(|| {
            let cj = scaled.column(j);
            scaled.column_iter().map(|c| c.dot(&cj)).collect()
        })
    }
}

/// Cyclic coordinate descent on 0.5 d' G d - c' d + penalty(beta + d),
/// iterating on the active set between full passes. Each coordinate update
/// costs O(k) once its Gram column is known. Returns the running sweep
/// count.
#[allow(clippy::too_many_arguments)]
fn coordinate_descent(
    gram: &mut LazyGram<'_>,
    c: &[f64],
    beta: &[f64],
    trial: &mut [f64],
    l1: f64,
    l2: f64,
    opts: &SolverOptions,
    mut sweeps: usize,
) -> usize {
    // q = G (trial - beta) - c, the gradient of the quadratic at trial
    let mut q: Vec<f64> = c.iter().map(|v| -v).collect();

    let mut coordinate = |j: usize, trial: &mut [f64], q: &mut [f64]| -> f64 {
        let hj = gram.diag[j];
        if hj <= 0.0 {
            return 0.0;
        }
        let old = trial[j];
        let z = hj * old - q[j];
        let new = if j == 0 { z / hj } else { soft_threshold(z, l1) / (hj + 2.0 * l2) };
        let delta = new - old;
        if delta != 0.0 {
            trial[j] = new;
            for (qi, gi) in q.iter_mut().zip(gram.column(j)) {
                *qi += gi * delta;
            }
        }
        delta.abs()
    };

    let k = beta.len();
    'outer: loop {
        let mut biggest = 0.0f64;
        for j in 0..k {
            biggest = biggest.max(coordinate(j, trial, &mut q));
        }
        sweeps += 1;
        if biggest < opts.inner_tol || sweeps >= opts.max_sweeps {
            break;
        }
        loop {
            let mut biggest = 0.0f64;
            for j in 0..k {
                if j == 0 || trial[j] != 0.0 {
                    biggest = biggest.max(coordinate(j, trial, &mut q));
                }
            }
            sweeps += 1;
            if sweeps >= opts.max_sweeps {
                break 'outer;
            }
            if biggest < opts.inner_tol {
                break;
            }
        }
    }
    sweeps
}

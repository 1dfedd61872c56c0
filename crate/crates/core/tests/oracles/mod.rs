//! Independent reference computations for the numerical tests. Nothing here
//! calls into the code paths it checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sig(e: f64) -> f64 {
    1.0 / (1.0 + (-e).exp())
}

/// Random logistic fixture: intercept column plus `p` standard-normal
/// columns, labels drawn from a logit model with modest coefficients.
pub fn logistic_fixture(r: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, Vec<u8>) {
    loop {
        let mut x = DMatrix::<f64>::zeros(n, p + 1);
        let truth: Vec<f64> = (0..=p).map(|_| { let z: f64 = StandardNormal.sample(r); 0.6 * z }).collect();
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            let mut eta = truth[0];
            for j in 1..=p {
                let v: f64 = StandardNormal.sample(r);
                x[(i, j)] = v;
                eta += truth[j] * v;
            }
            labels.push(u8::from(r.random::<f64>() < sig(eta)));
        }
        let pos = labels.iter().filter(|&&y| y == 1).count();
        if pos >= 5 && n - pos >= 5 {
            return (x, labels);
        }
    }
}

/// Damped Newton-Raphson on the weighted log-likelihood using a dense solve.
pub fn newton_mle(x: &DMatrix<f64>, labels: &[u8], w_pos: f64, w_neg: f64) -> Vec<f64> {
    let (n, k) = x.shape();
    let s: Vec<f64> = labels.iter().map(|&y| if y == 1 { w_pos } else { w_neg }).collect();
    let nll = |b: &DVector<f64>| -> f64 {
        let eta = x * b;
        (0..n)
            .map(|i| {
                let e = eta[i];
                // log(1 + exp(e)) computed stably
                let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
                s[i] * (softplus - f64::from(labels[i]) * e)
            })
            .sum()
    };
    let mut b = DVector::<f64>::zeros(k);
    for _ in 0..200 {
        let eta = x * &b;
        let mut g = DVector::<f64>::zeros(k);
        let mut h = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            let p = sig(eta[i]);
            let row = x.row(i).transpose();
            g += &row * (s[i] * (p - f64::from(labels[i])));
            h += &row * row.transpose() * (s[i] * p * (1.0 - p));
        }
        if g.amax() < 1e-13 {
            break;
        }
        let step = h.lu().solve(&g).expect("nonsingular Hessian");
        let f0 = nll(&b);
        let mut t = 1.0;
        loop {
            let cand = &b - &step * t;
            if nll(&cand) <= f0 || t < 1e-10 {
                b = cand;
                break;
            }
            t *= 0.5;
        }
    }
    b.iter().copied().collect()
}

/// Penalized objective evaluated with plain loops.
pub fn naive_objective(
    x: &DMatrix<f64>,
    labels: &[u8],
    w_pos: f64,
    w_neg: f64,
    alpha: f64,
    lambda: f64,
    b: &[f64],
) -> f64 {
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let mut eta = 0.0;
        for j in 0..x.ncols() {
            eta += x[(i, j)] * b[j];
        }
        let p = sig(eta).clamp(1e-15, 1.0 - 1e-15);
        total -= if labels[i] == 1 { w_pos * p.ln() } else { w_neg * (1.0 - p).ln() };
    }
    let mut l2 = 0.0;
    let mut l1 = 0.0;
    for v in &b[1..] {
        l2 += v * v;
        l1 += v.abs();
    }
    total + lambda * ((1.0 - alpha) * l2 + alpha * l1)
}

/// Mann-Whitney statistic by explicit pair counting: P(s+ > s-) + P(tie) / 2.
pub fn mann_whitney(labels: &[u8], scores: &[f64]) -> f64 {
    let mut num = 0u64; // counts half-pairs
    let mut pairs = 0u64;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                num += 2;
            } else if scores[i] == scores[j] {
                num += 1;
            }
        }
    }
    num as f64 / (2 * pairs) as f64
}

/// Minimum asymmetric misclassification cost over `points` equally spaced
/// cutpoints on [0, 1], calling positive when probability >= cutpoint.
pub fn dense_grid_min_cost(probs: &[f64], labels: &[u8], cost_fn: f64, cost_fp: f64, points: usize) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..points {
        let c = k as f64 / (points - 1) as f64;
        let mut cost = 0.0;
        for (p, &y) in probs.iter().zip(labels) {
            let call = *p >= c;
            if y == 1 && !call {
                cost += cost_fn;
            } else if y == 0 && call {
                cost += cost_fp;
            }
        }
        best = best.min(cost);
    }
    best
}

pub fn cost_at(probs: &[f64], labels: &[u8], cost_fn: f64, cost_fp: f64, c: f64) -> f64 {
    let mut cost = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        let call = *p >= c;
        if y == 1 && !call {
            cost += cost_fn;
        } else if y == 0 && call {
            cost += cost_fp;
        }
    }
    cost
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Leading eigenvector of a symmetric matrix by power iteration.
pub fn power_iteration(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let k = m.nrows();
    let mut v = DVector::<f64>::from_fn(k, |i, _| 1.0 + i as f64 * 0.01);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = m * &v;
        let nl = w.norm();
        let next = w / nl;
        let diff = (&next - &v).norm();
        v = next;
        lambda = nl;
        if diff < 1e-15 {
            break;
        }
    }
    (lambda, v.iter().copied().collect())
}

/// Minimum cost over cutpoints placed at every observed probability plus one
/// above them all; exact for any resolution of the scores.
pub fn exhaustive_min_cost(probs: &[f64], labels: &[u8], cost_fn: f64, cost_fp: f64) -> f64 {
    probs
        .iter()
        .copied()
        .chain(std::iter::once(f64::INFINITY))
        .map(|c| cost_at(probs, labels, cost_fn, cost_fp, c))
        .fold(f64::INFINITY, f64::min)
}

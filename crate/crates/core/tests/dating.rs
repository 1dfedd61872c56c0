mod oracles;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use recession_core::data_io::TurningKind;
use recession_core::dating::{
    bry_boschan, first_principal_component, to_indicator, validate_turning_points, BbParams,
};
use recession_core::metrics::phi_coefficient;
use recession_core::Month;

#[test]
fn loadings_match_power_iteration() {
    let mut r = oracles::rng(21);
    let n = 300;
    let factor: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let betas = [0.9, 0.7, -0.5, 0.3];
    let data = DMatrix::from_fn(n, 4, |i, j| {
        let e: f64 = StandardNormal.sample(&mut r);
        betas[j] * factor[i] + 0.5 * e
    });
    let pc = first_principal_component(&data).unwrap();

    // Oracle: correlation matrix from pairwise Pearson, then power iteration.
    let cols: Vec<Vec<f64>> = (0..4).map(|j| data.column(j).iter().copied().collect()).collect();
    let corr = DMatrix::from_fn(4, 4, |a, b| oracles::pearson(&cols[a], &cols[b]));
    let (lambda, mut v) = oracles::power_iteration(&corr);
    if v[0] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    for (a, b) in pc.loadings.iter().zip(&v) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    assert!((pc.eigenvalue - lambda).abs() < 1e-8);
    assert!((pc.loadings.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(pc.loadings[0] >= 0.0);
}

#[test]
fn sinusoid_interior_extrema_exact() {
    for phase in 0..24 {
        let s: Vec<f64> = (0..60)
            .map(|t| (2.0 * std::f64::consts::PI * (t as f64 - phase as f64) / 24.0).cos())
            .collect();
        let pts = bry_boschan(&s, &BbParams::default()).unwrap();
        // analytic extrema: peaks at phase + 24k, troughs at phase + 12 + 24k
        let mut expect = Vec::new();
        for t in 5..55usize {
            let d = (t + 24 - phase) % 24;
            if d == 0 {
                expect.push((t, TurningKind::Peak));
            } else if d == 12 {
                expect.push((t, TurningKind::Trough));
            }
        }
        let got: Vec<(usize, TurningKind)> = pts.iter().map(|p| (p.index, p.kind)).collect();
        assert_eq!(got, expect, "phase {phase}");
    }
}

#[test]
fn multi_cycle_indicator_matches_hand_series() {
    let start = Month::new(1990, 1).unwrap();
    let pts = [
        (start + 3, TurningKind::Trough),
        (start + 12, TurningKind::Peak),
        (start + 18, TurningKind::Trough),
        (start + 40, TurningKind::Peak),
        (start + 46, TurningKind::Trough),
        (start + 55, TurningKind::Peak),
    ];
    let ind = to_indicator(&pts, start, start + 59).unwrap();
    let mut hand = vec![0u8; 60];
    for i in 13..=18 {
        hand[i] = 1;
    }
    for i in 41..=46 {
        hand[i] = 1;
    }
    for i in 56..60 {
        hand[i] = 1;
    }
    assert_eq!(ind.values, hand);
}

fn random_walk(seed: u64, n: usize) -> Vec<f64> {
    let mut r = oracles::rng(seed);
    let mut v = 0.0;
    (0..n)
        .map(|_| {
            v += r.random_range(-1.0..1.0);
            v
        })
        .collect()
}

proptest! {
    #[test]
    fn output_satisfies_invariants(seed in 0u64..10_000, n in 20usize..300) {
        let s = random_walk(seed, n);
        let params = BbParams::default();
        let pts = bry_boschan(&s, &params).unwrap();
        prop_assert!(validate_turning_points(&pts, &params).is_ok());
        prop_assert!(pts.iter().all(|p| p.index >= 5 && p.index + 5 < n));
    }

    #[test]
    fn negation_swaps_kinds(seed in 0u64..10_000, n in 20usize..300) {
        // continuous values, so plateaus have probability zero
        let s = random_walk(seed, n);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let a = bry_boschan(&s, &BbParams::default()).unwrap();
        let b = bry_boschan(&neg, &BbParams::default()).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            prop_assert_eq!(p.index, q.index);
            prop_assert_ne!(p.kind, q.kind);
        }
    }
}

#[test]
fn factor_dating_recovers_planted_regimes() {
    // Three coincident series driven by a level that falls in planted
    // recessions; the dated factor should track the true indicator.
    let mut r = oracles::rng(8);
    let n = 360;
    let mut truth = vec![0u8; n];
    for &(a, b) in &[(40usize, 52usize), (130, 140), (220, 236), (300, 309)] {
        for t in a + 1..=b {
            truth[t] = 1;
        }
    }
    let mut level = 0.0;
    let mut lv = Vec::with_capacity(n);
    for t in 0..n {
        level += if truth[t] == 1 { -0.8 } else { 0.25 };
        lv.push(level);
    }
    let data = DMatrix::from_fn(n, 3, |i, j| {
        let e: f64 = StandardNormal.sample(&mut r);
        (1.0 + 0.3 * j as f64) * lv[i] + 0.3 * e
    });
    let pc = first_principal_component(&data).unwrap();
    let pts: Vec<(Month, TurningKind)> = bry_boschan(&pc.scores, &BbParams::default())
        .unwrap()
        .into_iter()
        .map(|p| (Month::from_index(p.index as i32), p.kind))
        .collect();
    let ind = to_indicator(&pts, Month::from_index(0), Month::from_index(n as i32 - 1)).unwrap();
    let phi = phi_coefficient(&truth, &ind.values).unwrap();
    assert!(phi >= 0.9, "phi {phi}");
}

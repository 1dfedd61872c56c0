use crate::error::{Error, Result};
use crate::month::Month;

use super::MonthlySeries;

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivative at each knot; zero at both ends.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Dimension(format!(
                "{} knot positions but {} values",
                xs.len(),
                ys.len()
            )));
        }
        let n = xs.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "a spline needs at least 2 knots, got {n}"
            )));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("spline knots must be strictly increasing".into()));
        }

        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for the interior second derivatives, solved
            // with the Thomas algorithm.
            let k = n - 2;
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                rhs[i] = 6.0
                    * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(NaturalCubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    fn interval(&self, x: f64) -> usize {
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i => (i - 1).min(self.xs.len() - 2),
        }
    }

    /// Value at `x`; outside the knot range the end cubic is extended.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.interval(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - x, x - x0);
        self.m[i] * a.powi(3) / (6.0 * h)
            + self.m[i + 1] * b.powi(3) / (6.0 * h)
            + (self.ys[i] / h - self.m[i] * h / 6.0) * a
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0) * b
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.interval(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - x, x - x0);
        -self.m[i] * a * a / (2.0 * h) + self.m[i + 1] * b * b / (2.0 * h)
            - (self.ys[i] / h - self.m[i] * h / 6.0)
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let i = self.interval(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        (self.m[i] * (x1 - x) + self.m[i + 1] * (x - x0)) / h
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.m
    }
}

/// Monthly values from a natural cubic spline through every quarterly knot
/// dated before `as_of`. Covers the first through the last knot month; there
/// is no extrapolation past the last knot.
pub fn spline_interpolate_quarterly(knots: &[(Month, f64)], as_of: Month) -> Result<MonthlySeries> {
    let usable: Vec<(Month, f64)> = knots.iter().copied().filter(|k| k.0 < as_of).collect();
    if usable.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "spline interpolation needs at least 2 quarterly knots before {as_of}, got {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|k| k.0.index() as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|k| k.1).collect();
    let spline = NaturalCubicSpline::fit(&xs, &ys)?;
    let first = usable[0].0;
    let last = usable[usable.len() - 1].0;
    let mut values = Vec::with_capacity((last - first + 1) as usize);
    let mut next_knot = 0;
    for m in first.through(last) {
        // Knot months reproduce the observed value bit-for-bit.
        if usable[next_knot].0 == m {
            values.push(Some(usable[next_knot].1));
            next_knot += 1;
        } else {
            values.push(Some(spline.eval(m.index() as f64)));
        }
    }
    Ok(MonthlySeries {
        start: first,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Independent oracle: one cubic per interval, a_i + b_i t + c_i t^2 + d_i t^3
    /// in local t = x - x_i, with all interpolation, C1, C2 and natural end
    /// conditions assembled into one dense 4(n-1) system.
    fn dense_oracle(xs: &[f64], ys: &[f64], at: f64) -> f64 {
        let p = xs.len() - 1;
        let dim = 4 * p;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        let mut row = 0;
        for i in 0..p {
            let h = xs[i + 1] - xs[i];
            a[(row, 4 * i)] = 1.0;
            b[row] = ys[i];
            row += 1;
            for k in 0..4 {
                a[(row, 4 * i + k)] = h.powi(k as i32);
            }
            b[row] = ys[i + 1];
            row += 1;
            if i + 1 < p {
                // first derivative continuity
                a[(row, 4 * i + 1)] = 1.0;
                a[(row, 4 * i + 2)] = 2.0 * h;
                a[(row, 4 * i + 3)] = 3.0 * h * h;
                a[(row, 4 * (i + 1) + 1)] = -1.0;
                row += 1;
                // second derivative continuity
                a[(row, 4 * i + 2)] = 2.0;
                a[(row, 4 * i + 3)] = 6.0 * h;
                a[(row, 4 * (i + 1) + 2)] = -2.0;
                row += 1;
            }
        }
        a[(row, 2)] = 2.0;
        row += 1;
        let h = xs[p] - xs[p - 1];
        a[(row, 4 * (p - 1) + 2)] = 2.0;
        a[(row, 4 * (p - 1) + 3)] = 6.0 * h;
        row += 1;
        assert_eq!(row, dim);
        let coef = a.lu().solve(&b).unwrap();
        let i = (0..p).rev().find(|&i| xs[i] <= at).unwrap_or(0);
        let t = at - xs[i];
        coef[4 * i] + coef[4 * i + 1] * t + coef[4 * i + 2] * t * t + coef[4 * i + 3] * t.powi(3)
    }

    fn q(s: &str) -> Month {
        s.parse().unwrap()
    }

    #[test]
    fn linear_knots_stay_linear() {
        let knots: Vec<_> = (0..5).map(|i| (q("2000-03") + 3 * i, 2.0 + 0.5 * i as f64)).collect();
        let s = spline_interpolate_quarterly(&knots, q("2002-01")).unwrap();
        assert_eq!(s.values.len(), 13);
        for (k, v) in s.values.iter().enumerate() {
            let expected = 2.0 + 0.5 * k as f64 / 3.0;
            assert!((v.unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn two_knots_interpolate_linearly() {
        let knots = [(q("2000-03"), 1.0), (q("2000-06"), 4.0)];
        let s = spline_interpolate_quarterly(&knots, q("2000-07")).unwrap();
        let got: Vec<f64> = s.values.iter().map(|v| v.unwrap()).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn knots_at_or_after_as_of_are_ignored() {
        let knots = [(q("2000-03"), 1.0), (q("2000-06"), 4.0), (q("2000-09"), 0.0)];
        let s = spline_interpolate_quarterly(&knots, q("2000-09")).unwrap();
        assert_eq!(s.end(), q("2000-07"));
        assert!(matches!(
            spline_interpolate_quarterly(&knots, q("2000-06")),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn four_knot_fixture_matches_dense_oracle() {
        let knots = [
            (q("2001-03"), 1.0),
            (q("2001-06"), 3.5),
            (q("2001-09"), -0.5),
            (q("2001-12"), 2.0),
        ];
        let s = spline_interpolate_quarterly(&knots, q("2002-01")).unwrap();
        let xs: Vec<f64> = knots.iter().map(|k| k.0.index() as f64).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        for (i, v) in s.values.iter().enumerate() {
            let x = (q("2001-03") + i as i32).index() as f64;
            let oracle = dense_oracle(&xs, &ys, x);
            assert!((v.unwrap() - oracle).abs() < 1e-10, "month {i}: {v:?} vs {oracle}");
        }
    }

    #[test]
    fn smooth_and_interpolating_at_knots() {
        let xs = [0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0];
        let ys = [0.3, -1.2, 2.2, 0.9, 1.1, -0.4, 0.0];
        let sp = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert!((sp.eval(*x) - y).abs() < 1e-12);
        }
        let eps = 1e-7;
        for &x in &xs[1..xs.len() - 1] {
            assert!((sp.eval(x - eps) - sp.eval(x + eps)).abs() < 1e-6);
            assert!((sp.derivative(x - eps) - sp.derivative(x + eps)).abs() < 1e-5);
            assert!((sp.second_derivative(x - eps) - sp.second_derivative(x + eps)).abs() < 1e-5);
        }
        assert_eq!(sp.second_derivative(0.0), 0.0);
        assert!(sp.second_derivative(18.0).abs() < 1e-12);
    }
}

use alloc::vec::Vec;


use crate::{Error, Result};

/// Natural cubic interpolating spline (zero second derivative at both ends).
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivative at each knot.
    curvature: Vec<f64>,
}

impl CubicSpline {
    /// Fits the natural interpolant through `points`, which need at least three
    /// entries with strictly increasing times.
    pub fn fit(points: &[(f64, f64)]) -> Result<Self> {
        let (knots, values): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        Self::from_columns(knots, values)
    }

    pub fn from_columns(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::InvalidData(alloc::format!(
                "spline needs at least 3 points with matching columns, got {n}"
            )));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("spline points must be finite".into()));
        }
        if let Some(i) = knots.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidData(alloc::format!(
                "spline knots must be strictly increasing (knot {} -> {})",
                i,
                i + 1
            )));
        }

        // Thomas algorithm on the interior second derivatives.
        let m = n - 2;
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut diag = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        for i in 1..n - 1 {
            diag.push(2.0 * (h[i - 1] + h[i]));
            rhs.push(
                6.0 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]),
            );
        }
        for i in 1..m {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut interior = alloc::vec![0.0; m];
        for i in (0..m).rev() {
            let upper = if i + 1 < m { h[i + 1] * interior[i + 1] } else { 0.0 };
            interior[i] = (rhs[i] - upper) / diag[i];
        }
        let mut curvature = Vec::with_capacity(n);
        curvature.push(0.0);
        curvature.extend_from_slice(&interior);
        curvature.push(0.0);

        Ok(Self {
            knots,
            values,
            curvature,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn locate(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        let slack = 1e-12 * (hi - lo).max(1.0);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::Extrapolation { t, lo, hi });
        }
        let idx = self.knots.partition_point(|&k| k <= t);
        Ok(idx.clamp(1, self.knots.len() - 1) - 1)
    }

    /// Spline value at `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = self.locate(t)?;
        Ok(self.eval_on(i, t, 0))
    }

    /// First or second derivative at `t`.
    pub fn derivative(&self, t: f64, order: u8) -> Result<f64> {
        if !(order == 1 || order == 2) {
            return Err(Error::invalid("order", order as f64, "must be 1 or 2"));
        }
        let i = self.locate(t)?;
        Ok(self.eval_on(i, t, order))
    }

    fn eval_on(&self, i: usize, t: f64, order: u8) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        match order {
            0 => a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            1 => (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1,
            _ => a * m0 + b * m1,
        }
    }

    /// Location of the maximum of the first derivative, found by a dense scan
    /// with spacing `step` and refined by a parabola through the three best
    /// grid values. The flag tells whether the maximum is interior to the knot
    /// range (a genuine inflection) rather than at an end.
    pub fn argmax_slope(&self, step: f64) -> Result<(f64, bool)> {
        if !(step > 0.0) {
            return Err(Error::invalid("step", step, "must be positive"));
        }
        let (lo, hi) = self.range();
        let n = ((hi - lo) / step).ceil() as usize;
        let h = (hi - lo) / n as f64;
        let slopes: Vec<f64> = (0..=n)
            .map(|j| {
                let t = if j == n { hi } else { lo + h * j as f64 };
                self.eval_on(self.locate(t).unwrap_or(0), t, 1)
            })
            .collect();
        let (best, _) = slopes
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let interior = best > 0 && best < n;
        Ok((super::parabolic_peak(lo, h, &slopes, best), interior))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_has_no_curvature() {
        let pts: Vec<(f64, f64)> = (0..7).map(|i| (i as f64 * 0.7, 3.0 - 2.0 * i as f64 * 0.7)).collect();
        let s = CubicSpline::fit(&pts).unwrap();
        for j in 0..40 {
            let t = j as f64 * 0.1;
            assert!((s.derivative(t, 1).unwrap() + 2.0).abs() < 1e-12);
            assert!(s.derivative(t, 2).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn interpolates_knots_and_is_natural() {
        let pts: Vec<(f64, f64)> = (0..12).map(|i| {
            let t = i as f64 * 0.37 + 0.01 * (i * i) as f64;
            (t, (1.3 * t).sin() + 0.2 * t)
        }).collect();
        let s = CubicSpline::fit(&pts).unwrap();
        for &(t, v) in &pts {
            assert_eq!(s.eval(t).unwrap(), v);
        }
        let (lo, hi) = s.range();
        assert!(s.derivative(lo, 2).unwrap().abs() < 1e-12);
        assert!(s.derivative(hi, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn second_derivative_is_continuous_at_knots() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| (i as f64, (i as f64).sqrt())).collect();
        let s = CubicSpline::fit(&pts).unwrap();
        for i in 1..8 {
            let t = i as f64;
            let left = s.eval_on(i - 1, t, 2);
            let right = s.eval_on(i, t, 2);
            assert!((left - right).abs() < 1e-12);
            let left1 = s.eval_on(i - 1, t, 1);
            let right1 = s.eval_on(i, t, 1);
            assert!((left1 - right1).abs() < 1e-12);
        }
    }

    #[test]
    fn refit_on_refined_knots_recovers_the_spline() {
        // A natural spline is itself a natural cubic with zero end curvature;
        // resampling it on a refinement of its knots must reproduce it.
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, [1.0, 2.5, 2.0, 4.0, 3.5, 5.0][i])).collect();
        let s = CubicSpline::fit(&pts).unwrap();
        let fine: Vec<(f64, f64)> = (0..=20).map(|j| {
            let t = j as f64 * 0.25;
            (t, s.eval(t).unwrap())
        }).collect();
        let r = CubicSpline::fit(&fine).unwrap();
        for j in 0..=100 {
            let t = j as f64 * 0.05;
            assert!((r.eval(t).unwrap() - s.eval(t).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CubicSpline::fit(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(CubicSpline::fit(&[(0.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(CubicSpline::fit(&[(0.0, 1.0), (2.0, 2.0), (1.0, 3.0)]).is_err());
        let s = CubicSpline::fit(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap();
        assert!(matches!(s.eval(2.5), Err(Error::Extrapolation { .. })));
        assert!(s.derivative(-0.1, 1).is_err());
    }
}

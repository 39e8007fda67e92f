//! Numerical kernels shared by the model modules.

mod monotone;
mod normal;
mod quadrature;
mod rng;
mod root;
mod spline;

pub use monotone::MonotoneCubic;
pub use normal::{inverse_normal_cdf, normal_cdf, normal_pdf};
pub use quadrature::{integrate, integrate_with_budget, QuadratureEstimate};
pub use rng::{rng_stream, RngStream};
pub use root::{find_root, find_root_with, RootOptions};
pub use spline::CubicSpline;

/// Trapezoid rule on a tabulated function.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Parabolic refinement of a discrete extremum at index `i` of an evenly
/// spaced grid starting at `x0` with step `h`.
pub(crate) fn parabolic_peak(x0: f64, h: f64, values: &[f64], i: usize) -> f64 {
    let xi = x0 + h * i as f64;
    if i == 0 || i + 1 >= values.len() {
        return xi;
    }
    let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom == 0.0 || !denom.is_finite() {
        return xi;
    }
    let offset = 0.5 * (a - c) / denom;
    xi + offset.clamp(-0.5, 0.5) * h
}

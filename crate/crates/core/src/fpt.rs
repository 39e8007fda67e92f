//! First-passage time of the lognormal diffusion through a constant level.
//!
//! Two estimators share one output type. [`fpt_monte_carlo`] samples exact
//! transitions on a fixed step and smooths the crossing times with a Gaussian
//! kernel. [`fpt_integral_equation`] works in the driftless coordinate
//! `Z(t) = ln X(t) − H̃(t0, t)`, where the level becomes the moving boundary
//! `b(t) = ln S − H̃(t0, t)` for a Brownian motion with variance `σ²`, and
//! solves the second-kind Volterra equation
//!
//! ```text
//! g(t) = −2 ψ(b(t), t | z0, t0) + 2 ∫_{t0}^t g(τ) ψ(b(t), t | b(τ), τ) dτ,
//! ψ(b(t), t | y, τ) = ½ f(b(t), t | y, τ) [b'(t) − (b(t) − y)/(t − τ)]
//! ```
//!
//! by the trapezoid rule. The kernel vanishes on the diagonal, so the scheme
//! is explicit.

use alloc::vec::Vec;

use crate::diffusion::{log_drift, DiffusionParams, InitialLaw};
use crate::error::{Error, Result};
use crate::growth::perturbation_value;
use crate::numerics::{find_root, rng_stream, trapezoid};
use crate::par::map_indices;

/// Number of points on which Monte-Carlo densities are tabulated.
const KDE_POINTS: usize = 2048;
/// Standardized distance that marks the edges of the solver window.
const WINDOW_SIGMAS: f64 = 9.0;
/// Resolution of the coarse scan that brackets the solver window.
const WINDOW_SCAN: usize = 4000;
/// Largest allowed sup-norm change (relative to the peak) between a solve on
/// `n` nodes and one on `2n − 1` nodes.
const REFINEMENT_TOL: f64 = 1e-3;

/// A tabulated first-passage density.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FptDensity {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Probability of crossing before the horizon. For Monte Carlo this is
    /// the fraction of paths that crossed; for the solver it is the integral
    /// of the density.
    pub mass_captured: f64,
}

impl FptDensity {
    /// Trapezoid integral of the tabulated density.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Linear interpolation, zero outside the grid.
    pub fn eval(&self, t: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || t < g[0] || t > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|&x| x <= t);
        if i == 0 {
            return self.density[0];
        }
        if i >= g.len() {
            return self.density[g.len() - 1];
        }
        let w = (t - g[i - 1]) / (g[i] - g[i - 1]);
        self.density[i - 1] + w * (self.density[i] - self.density[i - 1])
    }

    /// Largest density value.
    pub fn peak(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }

    /// Sup-norm distance to `other`, checked on the union of both grids.
    pub fn sup_distance(&self, other: &FptDensity) -> f64 {
        self.grid
            .iter()
            .chain(&other.grid)
            .map(|&t| (self.eval(t) - other.eval(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// Location, spread and deciles of a first-passage density.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FptSummary {
    pub mean: f64,
    pub mode: f64,
    pub std_dev: f64,
    /// First, fifth and ninth deciles.
    pub deciles: [f64; 3],
    pub mass_captured: f64,
}

/// Monte-Carlo estimate of the first-passage density through `boundary`.
///
/// Paths are simulated exactly on the `dt` grid from `t0` up to `horizon`.
/// The crossing time is located by linear interpolation of the log path
/// inside the step where it first reaches `ln boundary`. Path `i` draws
/// from stream `i` of `seed`.
pub fn fpt_monte_carlo(
    params: &DiffusionParams,
    init: &InitialLaw,
    boundary: f64,
    horizon: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<FptDensity> {
    let t0 = params.richards().t0();
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", dt, "must be positive"));
    }
    if !(horizon > t0) {
        return Err(Error::invalid("horizon", horizon, "must exceed t0"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", n_paths as f64, "need at least two paths"));
    }
    if !(boundary > init_location(init)) {
        return Err(Error::invalid("boundary", boundary, "must exceed the initial value"));
    }
    let level = boundary.ln();
    let n_steps = ((horizon - t0) / dt).ceil() as usize;
    let mut knots = Vec::with_capacity(n_steps + 1);
    knots.extend((0..n_steps).map(|j| t0 + j as f64 * dt));
    knots.push(horizon);
    let mut drift = Vec::with_capacity(n_steps);
    for w in knots.windows(2) {
        drift.push(log_drift(params, w[0], w[1])?);
    }
    let sigma = params.sigma();
    let scale: Vec<f64> = knots.windows(2).map(|w| sigma * (w[1] - w[0]).sqrt()).collect();
    let (mu0, var0) = init.log_params();
    let sd0 = var0.sqrt();

    let crossings = map_indices(n_paths, |i| {
        let mut rng = rng_stream(seed, i as u64);
        let mut y = mu0;
        if sd0 > 0.0 {
            y += sd0 * rng.normal();
        }
        if y >= level {
            return Some(t0);
        }
        for (j, (h, s)) in drift.iter().zip(&scale).enumerate() {
            let next = y + h + s * rng.normal();
            if next >= level {
                let w = (level - y) / (next - y);
                return Some(knots[j] + w * (knots[j + 1] - knots[j]));
            }
            y = next;
        }
        None
    });
    let times: Vec<f64> = crossings.into_iter().flatten().collect();
    let mass = times.len() as f64 / n_paths as f64;
    if mass < 0.5 {
        return Err(Error::BoundaryRarelyReached { mass });
    }
    Ok(kernel_density(times, n_paths, t0, horizon, mass))
}

fn init_location(init: &InitialLaw) -> f64 {
    init.log_params().0.exp()
}

// Linear binning onto a uniform grid followed by a discrete Gaussian
// convolution. The bandwidth is Silverman's rule of thumb.
fn kernel_density(mut times: Vec<f64>, n_paths: usize, t0: f64, horizon: f64, mass: f64) -> FptDensity {
    times.sort_by(f64::total_cmp);
    let m = times.len();
    let mean = times.iter().sum::<f64>() / m as f64;
    let sd = (times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (m - 1).max(1) as f64).sqrt();
    let iqr = quantile_sorted(&times, 0.75) - quantile_sorted(&times, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if !(spread > 0.0) {
        spread = sd.max(f64::MIN_POSITIVE);
    }
    let h = 0.9 * spread * (m as f64).powf(-0.2);
    let lo = (times[0] - 5.0 * h).max(t0);
    let hi = (times[m - 1] + 5.0 * h).min(horizon);
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_POINTS).map(|i| lo + i as f64 * step).collect();
    if !(step > 0.0) {
        // Every crossing at one instant: report a single spike of the right mass.
        return FptDensity {
            grid: alloc::vec![lo],
            density: alloc::vec![0.0],
            mass_captured: mass,
        };
    }

    let mut weights = alloc::vec![0.0; KDE_POINTS];
    for &t in &times {
        let x = ((t - lo) / step).clamp(0.0, (KDE_POINTS - 1) as f64);
        let i = (x.floor() as usize).min(KDE_POINTS - 2);
        let frac = x - i as f64;
        weights[i] += 1.0 - frac;
        weights[i + 1] += frac;
    }
    let reach = ((5.0 * h / step).ceil() as usize).min(KDE_POINTS - 1);
    let norm = 1.0 / ((2.0 * core::f64::consts::PI).sqrt() * h * n_paths as f64);
    let kernel: Vec<f64> = (0..=reach)
        .map(|d| {
            let u = d as f64 * step / h;
            norm * (-0.5 * u * u).exp()
        })
        .collect();
    let mut density = alloc::vec![0.0; KDE_POINTS];
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let a = i.saturating_sub(reach);
        let b = (i + reach).min(KDE_POINTS - 1);
        for (j, d) in density[a..=b].iter_mut().enumerate() {
            *d += w * kernel[(a + j).abs_diff(i)];
        }
    }
    FptDensity {
        grid,
        density,
        mass_captured: mass,
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let x = p * (sorted.len() - 1) as f64;
    let i = x.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (x - i as f64) * (sorted[j] - sorted[i])
}

/// Volterra-equation solution for a path started at `x0` at `t0`.
///
/// The equation is solved on the window where the boundary lies between
/// `−9` and `+9` standard deviations of the free log path (clipped to
/// `[t0, horizon]`); outside it the density is below double precision. The
/// solve is repeated on `2·n_nodes − 1` nodes and the result is rejected if
/// the linear interpolant of the coarse table differs from the fine solution
/// by more than `1e-3` of the peak.
pub fn fpt_integral_equation(
    params: &DiffusionParams,
    x0: f64,
    boundary: f64,
    horizon: f64,
    n_nodes: usize,
) -> Result<FptDensity> {
    let t0 = params.richards().t0();
    if !(x0 > 0.0) {
        return Err(Error::invalid("x0", x0, "must be positive"));
    }
    if !(boundary > x0) {
        return Err(Error::invalid("boundary", boundary, "must exceed x0"));
    }
    if !(horizon > t0) {
        return Err(Error::invalid("horizon", horizon, "must exceed t0"));
    }
    if n_nodes < 8 {
        return Err(Error::invalid("n_nodes", n_nodes as f64, "need at least 8 nodes"));
    }
    let gap0 = boundary.ln() - x0.ln();
    let sigma = params.sigma();
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", sigma, "must be positive"));
    }
    let (lo, hi) = solver_window(params, gap0, horizon)?;
    let coarse = volterra(params, gap0, lo, hi, n_nodes)?;
    let fine = volterra(params, gap0, lo, hi, 2 * n_nodes - 1)?;
    let peak = fine.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::BoundaryRarelyReached { mass: 0.0 });
    }
    // Compare the coarse table, read as a piecewise-linear function, with the
    // fine solution at every fine node.
    let change = fine
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let interp = if i % 2 == 0 {
                coarse[i / 2]
            } else {
                0.5 * (coarse[i / 2] + coarse[i / 2 + 1])
            };
            (g - interp).abs()
        })
        .fold(0.0, f64::max)
        / peak;
    if !(change <= REFINEMENT_TOL) {
        return Err(Error::NonConvergent { change });
    }
    let step = (hi - lo) / (n_nodes - 1) as f64;
    let grid: Vec<f64> = (0..n_nodes).map(|i| lo + i as f64 * step).collect();
    let mass = trapezoid(&grid, &coarse);
    Ok(FptDensity {
        grid,
        density: coarse,
        mass_captured: mass.min(1.0),
    })
}

// Standardized distance between the level and the free log path.
fn standardized_gap(params: &DiffusionParams, gap0: f64, t: f64) -> Result<f64> {
    let t0 = params.richards().t0();
    let spread = params.sigma() * (t - t0).sqrt();
    Ok((gap0 - log_drift(params, t0, t)?) / spread)
}

fn solver_window(params: &DiffusionParams, gap0: f64, horizon: f64) -> Result<(f64, f64)> {
    let t0 = params.richards().t0();
    let step = (horizon - t0) / WINDOW_SCAN as f64;
    let mut scan = Vec::with_capacity(WINDOW_SCAN);
    for i in 1..=WINDOW_SCAN {
        let t = t0 + i as f64 * step;
        scan.push((t, standardized_gap(params, gap0, t)?));
    }
    let first_near = scan.iter().position(|&(_, z)| z < WINDOW_SIGMAS);
    let Some(first_near) = first_near else {
        return Err(Error::BoundaryRarelyReached { mass: 0.0 });
    };
    let lo = if first_near == 0 {
        t0
    } else {
        let (a, b) = (scan[first_near - 1].0, scan[first_near].0);
        find_root(|t| standardized_gap(params, gap0, t).unwrap_or(f64::NAN) - WINDOW_SIGMAS, a, b, 1e-14)?
    };
    let hi = match scan[first_near..].iter().position(|&(_, z)| z < -WINDOW_SIGMAS) {
        None => horizon,
        Some(off) => {
            let k = first_near + off;
            let (a, b) = (scan[k - 1].0, scan[k].0);
            find_root(|t| standardized_gap(params, gap0, t).unwrap_or(f64::NAN) + WINDOW_SIGMAS, a, b, 1e-14)?
        }
    };
    Ok((lo, hi))
}

// Trapezoid solve of the Volterra equation on `n` uniform nodes of
// `[lo, hi]`, assuming no mass crosses before `lo`.
fn volterra(params: &DiffusionParams, gap0: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    let r = params.richards();
    let c = params.perturbation();
    let t0 = r.t0();
    let sigma2 = params.sigma() * params.sigma();
    let step = (hi - lo) / (n - 1) as f64;
    let times: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();

    // Drift accumulated from `lo`, so boundary differences keep full precision.
    let base = log_drift(params, t0, lo)?;
    let mut rel = alloc::vec![0.0; n];
    for i in 1..n {
        rel[i] = rel[i - 1] + log_drift(params, times[i - 1], times[i])?;
    }
    // Boundary minus the start point, and the boundary slope.
    let height: Vec<f64> = rel.iter().map(|d| gap0 - base - d).collect();
    let slope: Vec<f64> = times
        .iter()
        .map(|&t| -((r.q() + perturbation_value(c, r, t)) * r.kernel(t) - 0.5 * sigma2))
        .collect();

    let gauss = |dy: f64, dt: f64| (-dy * dy / (2.0 * sigma2 * dt)).exp() / (2.0 * core::f64::consts::PI * sigma2 * dt).sqrt();
    let mut g = alloc::vec![0.0; n];
    for i in 0..n {
        let dt0 = times[i] - t0;
        if dt0 <= 0.0 {
            continue;
        }
        let free = gauss(height[i], dt0) * (height[i] / dt0 - slope[i]);
        let mut acc = 0.0;
        for j in 0..i {
            let dt = times[i] - times[j];
            let dy = rel[j] - rel[i];
            let w = if j == 0 { 0.5 } else { 1.0 };
            acc += w * g[j] * gauss(dy, dt) * (slope[i] - dy / dt);
        }
        g[i] = (free + step * acc).max(0.0);
    }
    Ok(g)
}

/// Moments, mode and deciles of a density after renormalizing it to unit
/// mass. The mode is the grid argmax refined by a three-point parabola.
pub fn fpt_summary(density: &FptDensity) -> Result<FptSummary> {
    let (t, g) = (&density.grid, &density.density);
    if t.len() < 2 || t.len() != g.len() {
        return Err(Error::InvalidData("density needs at least two grid points".into()));
    }
    let mass = trapezoid(t, g);
    if !(mass > 0.0) {
        return Err(Error::InvalidData("density has no mass".into()));
    }
    let tg: Vec<f64> = t.iter().zip(g).map(|(a, b)| a * b).collect();
    let mean = trapezoid(t, &tg) / mass;
    let dev: Vec<f64> = t.iter().zip(g).map(|(a, b)| (a - mean) * (a - mean) * b).collect();
    let std_dev = (trapezoid(t, &dev) / mass).max(0.0).sqrt();

    let mut cdf = Vec::with_capacity(t.len());
    cdf.push(0.0);
    for i in 1..t.len() {
        cdf.push(cdf[i - 1] + 0.5 * (t[i] - t[i - 1]) * (g[i] + g[i - 1]) / mass);
    }
    let quantile = |p: f64| {
        let i = cdf.partition_point(|&c| c < p).clamp(1, t.len() - 1);
        let span = cdf[i] - cdf[i - 1];
        if span > 0.0 {
            t[i - 1] + (p - cdf[i - 1]) / span * (t[i] - t[i - 1])
        } else {
            t[i]
        }
    };
    let deciles = [quantile(0.1), quantile(0.5), quantile(0.9)];

    let imax = g
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mode = parabola_vertex(t, g, imax);
    Ok(FptSummary {
        mean,
        mode,
        std_dev,
        deciles,
        mass_captured: density.mass_captured.clamp(f64::MIN_POSITIVE, 1.0),
    })
}

fn parabola_vertex(t: &[f64], g: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= t.len() {
        return t[i];
    }
    let (x0, x1, x2) = (t[i - 1], t[i], t[i + 1]);
    let (y0, y1, y2) = (g[i - 1], g[i], g[i + 1]);
    let num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 || !den.is_finite() {
        return x1;
    }
    (x1 - 0.5 * num / den).clamp(x0, x2)
}

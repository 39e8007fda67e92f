//! Lognormal diffusions whose means are the classical and perturbed curves.
//!
//! `dX = h̃(t) X dt + σ X dW`. The log of the process has Gaussian increments,
//! `ln X(t) − ln X(s) ~ N(H̃(s, t), σ²(t − s))` with
//! `H̃(s, t) = q ln((k^s + η)/(k^t + η)) − σ²(t − s)/2 + ∫_s^t C κ`,
//! so transitions, moments and path samples are all exact.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::growth::{perturbation_integral, Perturbation, RichardsParams};
use crate::numerics::{normal_cdf, rng_stream};
use crate::par::map_indices;

/// Parameters `ξ = (q, k, η, σ)` plus the curve anchor and perturbation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawDiffusion"))]
pub struct DiffusionParams {
    richards: RichardsParams,
    sigma: f64,
    perturbation: Perturbation,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawDiffusion {
    richards: RichardsParams,
    sigma: f64,
    perturbation: Perturbation,
}

#[cfg(feature = "serde")]
impl TryFrom<RawDiffusion> for DiffusionParams {
    type Error = Error;
    fn try_from(r: RawDiffusion) -> Result<Self> {
        Self::new(r.richards, r.sigma, r.perturbation)
    }
}

impl DiffusionParams {
    pub fn new(richards: RichardsParams, sigma: f64, perturbation: Perturbation) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", sigma, "must be positive and finite"));
        }
        Ok(Self {
            richards,
            sigma,
            perturbation,
        })
    }

    /// Classical process (no perturbation).
    pub fn classical(richards: RichardsParams, sigma: f64) -> Result<Self> {
        Self::new(richards, sigma, Perturbation::none())
    }

    pub fn richards(&self) -> &RichardsParams {
        &self.richards
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    /// Same process with a different perturbation.
    pub fn with_perturbation(&self, perturbation: Perturbation) -> Self {
        Self {
            perturbation,
            ..self.clone()
        }
    }
}

/// Law of `X(t0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum InitialLaw {
    Degenerate { x0: f64 },
    Lognormal { mu0: f64, sigma0_sq: f64 },
}

impl InitialLaw {
    pub fn degenerate(x0: f64) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::invalid("x0", x0, "must be positive and finite"));
        }
        Ok(InitialLaw::Degenerate { x0 })
    }

    pub fn lognormal(mu0: f64, sigma0_sq: f64) -> Result<Self> {
        if !mu0.is_finite() {
            return Err(Error::invalid("mu0", mu0, "must be finite"));
        }
        if !(sigma0_sq >= 0.0 && sigma0_sq.is_finite()) {
            return Err(Error::invalid("sigma0_sq", sigma0_sq, "must be nonnegative"));
        }
        Ok(InitialLaw::Lognormal { mu0, sigma0_sq })
    }

    /// `(μ0, σ0²)` of `ln X(t0)`; a degenerate start has `σ0² = 0`.
    pub fn log_params(&self) -> (f64, f64) {
        match *self {
            InitialLaw::Degenerate { x0 } => (x0.ln(), 0.0),
            InitialLaw::Lognormal { mu0, sigma0_sq } => (mu0, sigma0_sq),
        }
    }

    /// `E[X(t0)]`.
    pub fn mean(&self) -> f64 {
        let (m, v) = self.log_params();
        (m + 0.5 * v).exp()
    }
}

/// Lognormal law: `ln X ~ N(location, scale_sq)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lognormal {
    pub location: f64,
    pub scale_sq: f64,
}

impl Lognormal {
    pub fn mean(&self) -> f64 {
        (self.location + 0.5 * self.scale_sq).exp()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        m * m * libm::expm1(self.scale_sq)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) || self.scale_sq == 0.0 {
            return 0.0;
        }
        let z = x.ln() - self.location;
        (-0.5 * z * z / self.scale_sq).exp()
            / (x * (2.0 * core::f64::consts::PI * self.scale_sq).sqrt())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let z = x.ln() - self.location;
        if self.scale_sq == 0.0 {
            return if z >= 0.0 { 1.0 } else { 0.0 };
        }
        normal_cdf(z / self.scale_sq.sqrt())
    }
}

/// Discretely observed trajectories.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplePaths {
    times: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

impl SamplePaths {
    /// Validates: at least one path, matching lengths, strictly increasing
    /// finite times, positive finite values and a shared first time.
    pub fn new(times: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidData(alloc::format!(
                "need at least one path and matching time/value columns ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        for (i, (ts, xs)) in times.iter().zip(&values).enumerate() {
            if ts.is_empty() || ts.len() != xs.len() {
                return Err(Error::InvalidData(alloc::format!(
                    "path {i}: {} times but {} values",
                    ts.len(),
                    xs.len()
                )));
            }
            if let Some(j) = ts.iter().position(|t| !t.is_finite()) {
                return Err(Error::InvalidData(alloc::format!("path {i}: time {j} is not finite")));
            }
            if let Some(j) = ts.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidData(alloc::format!(
                    "path {i}: times not strictly increasing at index {}",
                    j + 1
                )));
            }
            if let Some(j) = xs.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidData(alloc::format!(
                    "path {i}: value {} at index {j} is not positive",
                    xs[j]
                )));
            }
            if ts[0] != times[0][0] {
                return Err(Error::InvalidData(alloc::format!(
                    "path {i} starts at {} but path 0 starts at {}",
                    ts[0],
                    times[0][0]
                )));
            }
        }
        Ok(Self { times, values })
    }

    /// All paths on one shared grid.
    pub fn on_grid(grid: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let times = alloc::vec![grid; values.len()];
        Self::new(times, values)
    }

    pub fn n_paths(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[Vec<f64>] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn path(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.times[i], &self.values[i])
    }

    /// First observation time, shared by all paths.
    pub fn start_time(&self) -> f64 {
        self.times[0][0]
    }

    /// The common time grid, if every path is observed on the same times.
    pub fn common_grid(&self) -> Option<&[f64]> {
        let first = &self.times[0];
        self.times.iter().all(|t| t == first).then_some(first.as_slice())
    }

    /// Cross-path arithmetic mean at each time of the common grid.
    pub fn sample_mean(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = self
            .common_grid()
            .ok_or_else(|| Error::InvalidData("sample mean needs a common time grid".into()))?;
        let d = self.n_paths() as f64;
        let mean = (0..grid.len())
            .map(|j| self.values.iter().map(|v| v[j]).sum::<f64>() / d)
            .collect();
        Ok((grid.to_vec(), mean))
    }

    /// Observations with `t <= t_max`.
    pub fn restrict(&self, t_max: f64) -> Result<Self> {
        let mut times = Vec::with_capacity(self.n_paths());
        let mut values = Vec::with_capacity(self.n_paths());
        for (ts, xs) in self.times.iter().zip(&self.values) {
            let n = ts.partition_point(|&t| t <= t_max);
            times.push(ts[..n].to_vec());
            values.push(xs[..n].to_vec());
        }
        Self::new(times, values)
    }

    /// Every `step`-th observation of each path, starting with the first.
    pub fn subsample(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::invalid("step", 0.0, "must be at least 1"));
        }
        let pick = |v: &Vec<f64>| v.iter().copied().step_by(step).collect::<Vec<_>>();
        Self::new(self.times.iter().map(pick).collect(), self.values.iter().map(pick).collect())
    }
}

/// `H̃(s, t)`: mean log increment from `s` to `t`.
pub fn log_drift(params: &DiffusionParams, s: f64, t: f64) -> Result<f64> {
    if !(t >= s) {
        return Err(Error::Domain(alloc::format!("log drift needs s <= t, got [{s}, {t}]")));
    }
    let r = &params.richards;
    Ok(r.log_growth(s, t) - 0.5 * params.sigma * params.sigma * (t - s)
        + perturbation_integral(&params.perturbation, r, s, t)?)
}

/// Law of `X(t)` given `X(s) = x`.
pub fn transition_law(params: &DiffusionParams, x: f64, s: f64, t: f64) -> Result<Lognormal> {
    if !(x > 0.0) {
        return Err(Error::invalid("x", x, "must be positive"));
    }
    Ok(Lognormal {
        location: x.ln() + log_drift(params, s, t)?,
        scale_sq: params.sigma * params.sigma * (t - s),
    })
}

/// Which quantity of the marginal or transition law to evaluate.
///
/// Every quantity has the form
/// `exp((y + H̃(τ, t)) λ1 + λ2 (λ3 σ0² + σ² (t − τ))^λ4)`, where `y` is the log of
/// the conditioning value (or `μ0` unconditionally) and `τ` its time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSpec {
    lambda: [f64; 4],
    conditional: bool,
}

impl MomentSpec {
    /// `n`-th moment.
    pub fn moment(n: f64, conditional: bool) -> Self {
        Self {
            lambda: [n, 0.5 * n * n, Self::c(conditional), 1.0],
            conditional,
        }
    }

    pub fn mode(conditional: bool) -> Self {
        Self {
            lambda: [1.0, -1.0, Self::c(conditional), 1.0],
            conditional,
        }
    }

    /// Quantile at the standard-normal point `z` (the `α`-percentile uses
    /// `z = Φ⁻¹(α)`).
    pub fn percentile(z: f64, conditional: bool) -> Self {
        Self {
            lambda: [1.0, z, Self::c(conditional), 0.5],
            conditional,
        }
    }

    /// Validates an explicit λ-vector against the admissible families.
    pub fn from_lambda(lambda: [f64; 4], conditional: bool) -> Result<Self> {
        let [l1, l2, l3, l4] = lambda;
        let admissible = l3 == Self::c(conditional)
            && ((l4 == 1.0 && l2 == 0.5 * l1 * l1 && l1 > 0.0)
                || (l4 == 1.0 && l1 == 1.0 && l2 == -1.0)
                || (l4 == 0.5 && l1 == 1.0 && l2.is_finite()));
        if admissible {
            Ok(Self { lambda, conditional })
        } else {
            Err(Error::Domain(alloc::format!(
                "λ = {lambda:?} is not a moment, mode or percentile vector"
            )))
        }
    }

    fn c(conditional: bool) -> f64 {
        if conditional {
            0.0
        } else {
            1.0
        }
    }

    pub fn lambda(&self) -> [f64; 4] {
        self.lambda
    }

    pub fn is_conditional(&self) -> bool {
        self.conditional
    }
}

/// Evaluates the quantity selected by `spec` at time `t`. Conditional specs
/// take `given = Some((value, time))`; unconditional ones start from `init`
/// at the curve anchor `t0`.
pub fn moment(
    params: &DiffusionParams,
    init: &InitialLaw,
    spec: &MomentSpec,
    t: f64,
    given: Option<(f64, f64)>,
) -> Result<f64> {
    let (y, tau, sigma0_sq) = match (spec.conditional, given) {
        (true, Some((value, s))) => {
            if !(value > 0.0) {
                return Err(Error::invalid("value", value, "must be positive"));
            }
            (value.ln(), s, 0.0)
        }
        (false, None) => {
            let (mu0, s0) = init.log_params();
            (mu0, params.richards.t0(), s0)
        }
        (true, None) => return Err(Error::Domain("conditional quantity needs a conditioning point".into())),
        (false, Some(_)) => {
            return Err(Error::Domain("unconditional quantity takes no conditioning point".into()))
        }
    };
    let [l1, l2, l3, l4] = spec.lambda;
    let spread = l3 * sigma0_sq + params.sigma * params.sigma * (t - tau);
    Ok(((y + log_drift(params, tau, t)?) * l1 + l2 * spread.powf(l4)).exp())
}

/// Ratios of the perturbed to the classical mean and variance at `t`.
pub fn mean_variance_ratio(params_mod: &DiffusionParams, t: f64) -> Result<(f64, f64)> {
    let c = &params_mod.perturbation;
    if c.is_none() {
        return Err(Error::Domain("mean/variance ratio needs a perturbed process".into()));
    }
    let ratio = perturbation_integral(c, &params_mod.richards, c.t_star().min(t), t)?.exp();
    Ok((ratio, ratio * ratio))
}

/// Covariance matrix of `(ln X(t_1), …, ln X(t_n))`.
pub fn fdd_log_covariance(params: &DiffusionParams, init: &InitialLaw, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let t0 = params.richards.t0();
    if times.iter().any(|&t| !(t >= t0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidData("times must increase strictly from t0".into()));
    }
    let s0 = init.log_params().1;
    let s2 = params.sigma * params.sigma;
    Ok(times
        .iter()
        .map(|&ti| times.iter().map(|&tj| s0 + s2 * (ti.min(tj) - t0)).collect())
        .collect())
}

/// Exact discrete sampling on `grid` (which must not start before `t0`).
/// Path `i` uses stream `i` of `seed`; the start is drawn from `init` at `t0`.
pub fn simulate_paths(
    params: &DiffusionParams,
    init: &InitialLaw,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<SamplePaths> {
    let t0 = params.richards.t0();
    if grid.is_empty() || !(grid[0] >= t0) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidData("simulation grid must increase strictly from t0".into()));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", 0.0, "must be at least 1"));
    }
    let mut knots = alloc::vec![t0];
    knots.extend(grid.iter().copied().filter(|&t| t > t0));
    let mut drift = Vec::with_capacity(knots.len() - 1);
    let mut scale = Vec::with_capacity(knots.len() - 1);
    for w in knots.windows(2) {
        drift.push(log_drift(params, w[0], w[1])?);
        scale.push(params.sigma * (w[1] - w[0]).sqrt());
    }
    let skip = usize::from(grid[0] > t0);
    let (mu0, s0) = init.log_params();
    let s0 = s0.sqrt();
    let values = map_indices(n_paths, |i| {
        let mut rng = rng_stream(seed, i as u64);
        let mut log_x = mu0;
        if s0 > 0.0 {
            log_x += s0 * rng.normal();
        }
        let mut path = Vec::with_capacity(grid.len());
        if skip == 0 {
            path.push(log_x.exp());
        }
        for (h, sd) in drift.iter().zip(&scale) {
            log_x += h + sd * rng.normal();
            path.push(log_x.exp());
        }
        path
    });
    SamplePaths::on_grid(grid.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_paths_validation() {
        assert!(SamplePaths::on_grid(alloc::vec![0.0, 1.0], alloc::vec![alloc::vec![1.0, 0.0]]).is_err());
        assert!(SamplePaths::on_grid(alloc::vec![0.0, 0.0], alloc::vec![alloc::vec![1.0, 1.0]]).is_err());
        assert!(SamplePaths::new(
            alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![0.5, 1.0]],
            alloc::vec![alloc::vec![1.0, 1.0], alloc::vec![1.0, 1.0]]
        )
        .is_err());
        let p = SamplePaths::on_grid(
            alloc::vec![0.0, 1.0, 2.0, 3.0],
            alloc::vec![alloc::vec![1.0, 2.0, 3.0, 4.0], alloc::vec![3.0, 4.0, 5.0, 6.0]],
        )
        .unwrap();
        assert_eq!(p.sample_mean().unwrap().1, alloc::vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(p.restrict(1.5).unwrap().path(1).1, &[3.0, 4.0]);
        assert_eq!(p.subsample(2).unwrap().path(0).0, &[0.0, 2.0]);
    }

    #[test]
    fn moment_spec_rows() {
        assert!(MomentSpec::from_lambda([2.0, 2.0, 0.0, 1.0], true).is_ok());
        assert!(MomentSpec::from_lambda([1.0, -1.0, 1.0, 1.0], false).is_ok());
        assert!(MomentSpec::from_lambda([1.0, 1.64, 1.0, 0.5], false).is_ok());
        assert!(MomentSpec::from_lambda([1.0, 1.64, 0.0, 0.5], false).is_err());
        assert!(MomentSpec::from_lambda([2.0, 1.0, 0.0, 1.0], true).is_err());
    }
}

//! Maximum-likelihood fitting of the perturbed diffusion from sampled paths.
//!
//! The pipeline has three steps:
//!
//! 1. Bound the parameter space from the sample-mean spline
//!    ([`bound_parameters`]), then maximize the log-likelihood on the data
//!    before the switch with simulated annealing or the ant lion optimizer,
//!    averaging replicate argmaxes ([`fit_mle`]).
//! 2. Estimate the switching time, either in closed form at the estimates
//!    or as the mean first-passage time of the fitted process
//!    ([`estimate_tstar`]).
//! 3. Recover `C(t)` from the log-ratio of the sample mean to the fitted
//!    classical mean ([`estimate_c`]).
//!
//! [`run_procedure1`] chains the steps and optionally sweeps the threshold
//! fraction `p` over candidates.

use alloc::string::String;
use alloc::vec::Vec;

use crate::diffusion::{log_drift, DiffusionParams, InitialLaw, SamplePaths};
use crate::error::{Error, Result};
use crate::fpt::{fpt_monte_carlo, fpt_summary, FptSummary};
use crate::growth::{perturbation_integral, Perturbation, RichardsParams};
use crate::numerics::{find_root, CubicSpline};
use crate::optimize::{replicate_average, Method, OptBudget, SearchBox};

/// Smallest number of distinct observation intervals accepted by
/// [`fit_mle`]. Many paths over two time points still cannot identify the
/// curve, so the guard counts intervals rather than raw increments.
const MIN_INTERVALS: usize = 10;
/// Smallest number of observation times after `t̂*` needed by [`estimate_c`].
const MIN_POST_SWITCH: usize = 4;
/// Root bracket for the shape equation `S(t_j) = K* (q/(1+q))^q`.
const Q_BRACKET: (f64, f64) = (1e-6, 50.0);
/// Noise interval. The lower end keeps the likelihood finite.
const SIGMA_INTERVAL: (f64, f64) = (1e-6, 0.1);
/// Scan resolution for the observed inflection of the mean spline.
const INFLECTION_SCAN: f64 = 1e-3;

/// Scaled log-increments of sampled paths.
///
/// `v1[r] = ln(X_{i,j+1}/X_{ij}) / sqrt(Δ)` for the `r`-th increment in
/// path-major order, observed over `[starts[r], starts[r] + deltas[r]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VTransform {
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
    pub deltas: Vec<f64>,
    pub starts: Vec<f64>,
    /// Observation count of each path.
    pub lengths: Vec<usize>,
    pub first_times: Vec<f64>,
    groups: Vec<IntervalGroup>,
}

/// Increments sharing one observation interval. Paths observed on a common
/// grid collapse to one group per grid step, so a likelihood evaluation
/// costs one drift computation per step.
#[derive(Debug, Clone, PartialEq)]
struct IntervalGroup {
    start: f64,
    end: f64,
    count: f64,
    sum_v: f64,
}

impl VTransform {
    /// Number of increments `n = Σ (n_i − 1)`.
    pub fn n(&self) -> usize {
        self.v1.len()
    }

    pub fn d(&self) -> usize {
        self.v0.len()
    }

    /// Inverts the transform back to the observed paths.
    pub fn reconstruct(&self) -> Result<SamplePaths> {
        let mut times = Vec::with_capacity(self.d());
        let mut values = Vec::with_capacity(self.d());
        let mut r = 0;
        for (i, &len) in self.lengths.iter().enumerate() {
            let mut ts = alloc::vec![self.first_times[i]];
            let mut xs = alloc::vec![self.v0[i]];
            let mut x = self.v0[i];
            for _ in 1..len {
                x *= (self.v1[r] * self.deltas[r].sqrt()).exp();
                xs.push(x);
                ts.push(self.starts[r] + self.deltas[r]);
                r += 1;
            }
            times.push(ts);
            values.push(xs);
        }
        SamplePaths::new(times, values)
    }
}

/// Applies the change of variables to `data`.
pub fn v_transform(data: &SamplePaths) -> Result<VTransform> {
    let mut v0 = Vec::with_capacity(data.n_paths());
    let mut v1 = Vec::new();
    let mut deltas = Vec::new();
    let mut starts = Vec::new();
    let mut lengths = Vec::with_capacity(data.n_paths());
    let mut first_times = Vec::with_capacity(data.n_paths());
    let mut groups: Vec<IntervalGroup> = Vec::new();
    for i in 0..data.n_paths() {
        let (ts, xs) = data.path(i);
        v0.push(xs[0]);
        lengths.push(ts.len());
        first_times.push(ts[0]);
        for j in 0..ts.len() - 1 {
            let delta = ts[j + 1] - ts[j];
            let v = (xs[j + 1] / xs[j]).ln() / delta.sqrt();
            v1.push(v);
            deltas.push(delta);
            starts.push(ts[j]);
            match groups.iter_mut().find(|g| g.start == ts[j] && g.end == ts[j + 1]) {
                Some(g) => {
                    g.count += 1.0;
                    g.sum_v += v;
                }
                None => groups.push(IntervalGroup {
                    start: ts[j],
                    end: ts[j + 1],
                    count: 1.0,
                    sum_v: v,
                }),
            }
        }
    }
    Ok(VTransform {
        v0,
        v1,
        deltas,
        starts,
        lengths,
        first_times,
        groups,
    })
}

/// Closed-form estimates `(μ̂1, σ̂1²)` of the lognormal initial law: the mean
/// and the biased variance of `ln v0`.
pub fn initial_mles(v0: &[f64]) -> Result<(f64, f64)> {
    if v0.is_empty() {
        return Err(Error::InvalidData("no initial observations".into()));
    }
    if let Some(v) = v0.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::invalid("v0", *v, "initial observations must be positive"));
    }
    // Shifted by the first log value, so identical starts give exactly
    // `(ln v0, 0)`.
    let d = v0.len() as f64;
    let shift = v0[0].ln();
    let (s1, s2) = v0.iter().fold((0.0, 0.0), |(a, b), v| {
        let y = v.ln() - shift;
        (a + y, b + y * y)
    });
    let mu = shift + s1 / d;
    let var = (s2 / d - (s1 / d) * (s1 / d)).max(0.0);
    Ok((mu, var))
}

/// The three data-dependent sums of the log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LikelihoodTerms {
    /// `Σ v_ij²`.
    pub z1: f64,
    /// `Σ m_ij² / Δ_ij`.
    pub phi_term: f64,
    /// `Σ v_ij m_ij / sqrt(Δ_ij)`.
    pub gamma_term: f64,
}

/// `Z1`, `Φ` and `Γ` for parameters `xi`, where `m_ij = H̃(t_ij, t_i,j+1)`
/// includes the perturbation carried by `xi`.
pub fn likelihood_terms(vt: &VTransform, xi: &DiffusionParams) -> Result<LikelihoodTerms> {
    let z1 = vt.v1.iter().map(|v| v * v).sum();
    let mut phi_term = 0.0;
    let mut gamma_term = 0.0;
    for g in &vt.groups {
        let m = log_drift(xi, g.start, g.end)?;
        let delta = g.end - g.start;
        phi_term += g.count * m * m / delta;
        gamma_term += g.sum_v * m / delta.sqrt();
    }
    Ok(LikelihoodTerms {
        z1,
        phi_term,
        gamma_term,
    })
}

/// `L̃(ξ) = −(n/2) ln σ² − (Z1 + Φ − 2Γ)/(2σ²)`.
///
/// Returns `−∞` when the value is not finite or the drift cannot be
/// evaluated, which is what the optimizers expect.
pub fn log_likelihood_core(vt: &VTransform, xi: &DiffusionParams) -> f64 {
    if vt.n() == 0 {
        return 0.0;
    }
    let Ok(terms) = likelihood_terms(vt, xi) else {
        return f64::NEG_INFINITY;
    };
    let s2 = xi.sigma() * xi.sigma();
    let value = -0.5 * vt.n() as f64 * s2.ln() - (terms.z1 + terms.phi_term - 2.0 * terms.gamma_term) / (2.0 * s2);
    if value.is_finite() {
        value
    } else {
        f64::NEG_INFINITY
    }
}

/// Where the bounding intervals came from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundsProvenance {
    pub t1: f64,
    pub t2: f64,
    /// `K* = (1 + p) S(t_I*)`.
    pub k_star: f64,
    /// Observed inflection time `t_I*` of the mean spline.
    pub t_inflection: f64,
    /// `S(t_I*)`.
    pub x_inflection: f64,
    /// `S(t0)`, the initial level used in the `k` bound.
    pub x_start: f64,
}

/// Closed search intervals for `(q, k, η, σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundsBox {
    pub q: (f64, f64),
    pub k: (f64, f64),
    pub eta: (f64, f64),
    pub sigma: (f64, f64),
    pub provenance: BoundsProvenance,
}

impl BoundsBox {
    pub fn search_box(&self) -> Result<SearchBox> {
        SearchBox::from_intervals(&[self.q, self.k, self.eta, self.sigma])
    }

    /// Whether `(q, k, η, σ)` lies in the box.
    pub fn contains(&self, q: f64, k: f64, eta: f64, sigma: f64) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
        inside(q, self.q) && inside(k, self.k) && inside(eta, self.eta) && inside(sigma, self.sigma)
    }
}

/// Natural cubic spline of the cross-path sample mean and its observed
/// inflection (the interior maximum of `S'`).
#[derive(Debug, Clone)]
pub struct MeanSpline {
    pub spline: CubicSpline,
    pub t_inflection: f64,
    pub x_inflection: f64,
}

pub fn mean_spline(data: &SamplePaths) -> Result<MeanSpline> {
    let (grid, mean) = data.sample_mean()?;
    if grid.len() < 4 {
        return Err(Error::InvalidData("need at least 4 observation times for the mean spline".into()));
    }
    let spline = CubicSpline::from_columns(grid, mean)?;
    let (t_inflection, interior) = spline.argmax_slope(INFLECTION_SCAN)?;
    if !interior {
        return Err(Error::InvalidData(
            "the sample mean has no interior inflection; the data must cover it".into(),
        ));
    }
    let x_inflection = spline.eval(t_inflection)?;
    Ok(MeanSpline {
        spline,
        t_inflection,
        x_inflection,
    })
}

/// Data-driven box for the optimizer.
///
/// `t1` is the first observation time with `S(t)/K* > e^{-1}` at which the
/// `q` equation has a root below 50 (a ratio barely above `1/e` pushes the
/// root towards infinity, so such observations are skipped), and `t2` is the
/// first observation time after `t_I*`. `q1`, `q2` solve
/// `S(t_j) = K* (q/(1+q))^q`. The `k` and `η` intervals are the hulls of
/// `g(t, q) = (q ((K*/x0)^{1/q} − 1))^{1/(t0 − t)}` and `h = q k^t` over the
/// corners of `[t1, t2] × I_q (× I_k)`; both functions are monotone in each
/// argument, so corners suffice.
pub fn bound_parameters(data: &SamplePaths, p_guess: f64) -> Result<BoundsBox> {
    if !(p_guess > 0.0 && p_guess.is_finite()) {
        return Err(Error::invalid("p", p_guess, "must be positive"));
    }
    let ms = mean_spline(data)?;
    let (grid, mean) = data.sample_mean()?;
    let t0 = grid[0];
    let x_start = mean[0];
    let k_star = (1.0 + p_guess) * ms.x_inflection;
    let threshold = (-1.0f64).exp();
    let t2 = grid
        .iter()
        .copied()
        .find(|&t| t > ms.t_inflection)
        .ok_or_else(|| Error::InvalidData("no observation after the observed inflection".into()))?;
    let solve_q = |t: f64| -> Result<f64> {
        let ratio = ms.spline.eval(t)? / k_star;
        let shape = |q: f64| q * (q / (1.0 + q)).ln() - ratio.ln();
        find_root(shape, Q_BRACKET.0, Q_BRACKET.1, 1e-12)
    };
    // The shape equation only has a root in the bracket once the ratio is
    // clearly above 1/e. When the first qualifying observation sits right at
    // the threshold, move on to the next one before t2.
    let mut first = None;
    let mut last_err = None;
    for (&t, &x) in grid.iter().zip(&mean) {
        if t >= t2 {
            break;
        }
        if x / k_star <= threshold {
            continue;
        }
        if !(t > t0) {
            return Err(Error::InvalidData("the sample mean exceeds K*/e at the first observation".into()));
        }
        match solve_q(t) {
            Ok(q) => {
                first = Some((t, q));
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (t1, qa) = match (first, last_err) {
        (Some(found), _) => found,
        (None, Some(e)) => return Err(e),
        (None, None) => return Err(Error::InvalidData("the sample mean never exceeds K*/e before t2".into())),
    };
    let qb = solve_q(t2)?;
    let q = (qa.min(qb), qa.max(qb));

    let scale = (k_star / x_start).ln();
    let g = |t: f64, q: f64| ((q * ((scale / q).exp_m1())).ln() / (t0 - t)).exp();
    let ks = [g(t1, q.0), g(t1, q.1), g(t2, q.0), g(t2, q.1)];
    let k_lo = ks.iter().copied().fold(f64::INFINITY, f64::min).max(f64::MIN_POSITIVE);
    let k_hi = ks.iter().copied().fold(0.0, f64::max).min(1.0 - 1e-12);
    if !(k_lo < k_hi) {
        return Err(Error::Domain(alloc::format!("empty k interval [{k_lo}, {k_hi}]")));
    }
    let h = |q: f64, k: f64, t: f64| q * (t * k.ln()).exp();
    let mut etas = Vec::with_capacity(8);
    for qv in [q.0, q.1] {
        for kv in [k_lo, k_hi] {
            for tv in [t1, t2] {
                etas.push(h(qv, kv, tv));
            }
        }
    }
    let eta = (
        etas.iter().copied().fold(f64::INFINITY, f64::min).max(f64::MIN_POSITIVE),
        etas.iter().copied().fold(0.0, f64::max),
    );
    if !(q.0 < q.1 && eta.0 < eta.1) {
        return Err(Error::Domain("degenerate bounding intervals".into()));
    }
    Ok(BoundsBox {
        q,
        k: (k_lo, k_hi),
        eta,
        sigma: SIGMA_INTERVAL,
        provenance: BoundsProvenance {
            t1,
            t2,
            k_star,
            t_inflection: ms.t_inflection,
            x_inflection: ms.x_inflection,
            x_start,
        },
    })
}

/// Replicate-averaged maximum-likelihood estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    /// Classical-model estimate anchored at `(t0, exp(μ̂1 + σ̂1²/2))`.
    pub params: DiffusionParams,
    pub init_mle: (f64, f64),
    /// `(q, k, η, σ)` argmax of each replicate.
    pub replicates: Vec<[f64; 4]>,
    /// Observations used (the window `t <= window_end`).
    pub increments: usize,
}

/// Maximizes the classical-model likelihood on the observations with
/// `t <= window_end` over `bounds`, averaging `n_replications` independent
/// optimizer runs.
pub fn fit_mle(
    data: &SamplePaths,
    window_end: f64,
    bounds: &BoundsBox,
    method: Method,
    budget: &OptBudget,
    n_replications: usize,
) -> Result<MleFit> {
    let window = data.restrict(window_end)?;
    let vt = v_transform(&window)?;
    if vt.groups.len() < MIN_INTERVALS {
        return Err(Error::InvalidData(alloc::format!(
            "only {} distinct observation intervals (increments) before t = {window_end}; need at least {MIN_INTERVALS}",
            vt.groups.len()
        )));
    }
    let init_mle = initial_mles(&vt.v0)?;
    let t0 = data.start_time();
    let x0 = (init_mle.0 + 0.5 * init_mle.1).exp();
    let objective = |x: &[f64]| match classical(x, t0, x0) {
        Ok(xi) => log_likelihood_core(&vt, &xi),
        Err(_) => f64::NEG_INFINITY,
    };
    let rep = replicate_average(method, objective, &bounds.search_box()?, budget, n_replications)?;
    let params = classical(&rep.mean, t0, x0)?;
    Ok(MleFit {
        params,
        init_mle,
        replicates: rep.runs.iter().map(|r| [r.argmax[0], r.argmax[1], r.argmax[2], r.argmax[3]]).collect(),
        increments: vt.n(),
    })
}

fn classical(x: &[f64], t0: f64, x0: f64) -> Result<DiffusionParams> {
    DiffusionParams::classical(RichardsParams::new(x[0], x[1], x[2], t0, x0)?, x[3])
}

/// How the switching time is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TStarMode {
    /// Closed-form crossing of `(1 + p) x(t_I)` by the fitted curve.
    Deterministic,
    /// Mean first-passage time of the fitted classical diffusion.
    Fpt,
}

/// Level used for the first-passage estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum FptBoundary {
    /// `(1 + p) x̂(t̂_I)` on the fitted curve.
    EstimatedCurve,
    /// `(1 + p)` times the given observed inflection value.
    Observed { x_inflection: f64 },
    /// `(1 + p)` times the observed inflection of the fitted dataset. Only
    /// [`run_procedure1`] can resolve it; it supplies the value found while
    /// bounding the parameters.
    ObservedData,
}

/// Monte-Carlo settings for the first-passage estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FptConfig {
    pub n_paths: usize,
    pub dt: f64,
    /// Length of the simulated interval after `t0`.
    pub horizon: f64,
    pub seed: u64,
    pub boundary: FptBoundary,
}

impl Default for FptConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 0.005,
            horizon: 20.0,
            seed: 0,
            boundary: FptBoundary::EstimatedCurve,
        }
    }
}

/// Switching-time estimate. In `Fpt` mode the returned time is the mean of
/// the first-passage law, which is also returned.
pub fn estimate_tstar(
    mle: &DiffusionParams,
    p: f64,
    mode: TStarMode,
    fpt_cfg: Option<&FptConfig>,
) -> Result<(f64, Option<FptSummary>)> {
    let r = mle.richards();
    match mode {
        TStarMode::Deterministic => Ok((r.switch_time(p)?, None)),
        TStarMode::Fpt => {
            let cfg = fpt_cfg.copied().unwrap_or_default();
            let x_inflection = match cfg.boundary {
                FptBoundary::EstimatedCurve => r.tangent_summary().x_at_inflection,
                FptBoundary::Observed { x_inflection } => x_inflection,
                FptBoundary::ObservedData => {
                    return Err(Error::Domain(
                        "the observed-data boundary needs a dataset; pass Observed { x_inflection } instead".into(),
                    ))
                }
            };
            let boundary = (1.0 + p) * x_inflection;
            let classical = mle.with_perturbation(Perturbation::none());
            let init = InitialLaw::degenerate(r.x0())?;
            let density = fpt_monte_carlo(&classical, &init, boundary, r.t0() + cfg.horizon, cfg.n_paths, cfg.dt, cfg.seed)?;
            let summary = fpt_summary(&density)?;
            Ok((summary.mean, Some(summary)))
        }
    }
}

/// Sample mean divided by the fitted classical mean, on the common grid.
fn log_mean_ratio(data: &SamplePaths, mle: &DiffusionParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let (grid, mean) = data.sample_mean()?;
    let r = mle.richards();
    let scaled = r.with_anchor(grid[0], mean[0])?;
    let m = grid
        .iter()
        .zip(&mean)
        .map(|(&t, &x)| Ok((x / scaled.evaluate(t)?).ln()))
        .collect::<Result<Vec<f64>>>()?;
    Ok((grid, m))
}

/// Nonparametric `Ĉ(t)` from `m(t) = ln(sample mean / Ê[X(t)])`.
///
/// `m` is interpolated by a natural cubic spline through `(t̂*, 0)` and the
/// observations after `t̂*`; `Ĉ = (η̂ + k̂^t)/(k̂^t |ln k̂|) m'(t)`, clamped at
/// zero and tabulated at those observation times.
pub fn estimate_c(data_full: &SamplePaths, mle: &DiffusionParams, t_star_hat: f64) -> Result<Perturbation> {
    let (grid, m) = log_mean_ratio(data_full, mle)?;
    let after: Vec<usize> = (0..grid.len()).filter(|&j| grid[j] > t_star_hat).collect();
    if after.len() < MIN_POST_SWITCH {
        return Err(Error::InvalidData(alloc::format!(
            "cannot estimate C: {} observation times after t* = {t_star_hat}, need {MIN_POST_SWITCH}",
            after.len()
        )));
    }
    let mut points = Vec::with_capacity(after.len() + 1);
    points.push((t_star_hat, 0.0));
    points.extend(after.iter().map(|&j| (grid[j], m[j])));
    let spline = CubicSpline::fit(&points)?;
    let r = mle.richards();
    let mut table = Vec::with_capacity(points.len());
    table.push((t_star_hat, 0.0));
    for &(t, _) in &points[1..] {
        let c = spline.derivative(t, 1)? / r.kernel(t);
        table.push((t, c.max(0.0)));
    }
    Perturbation::tabulated(&table)
}

/// Mean absolute relative error `(1/N) Σ |ref − est| / |ref|`.
pub fn rae(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() || reference.is_empty() {
        return Err(Error::InvalidData(alloc::format!(
            "rae needs equal nonempty series ({} vs {})",
            reference.len(),
            estimate.len()
        )));
    }
    if let Some(r) = reference.iter().find(|r| **r == 0.0 || !r.is_finite()) {
        return Err(Error::invalid("reference", *r, "entries must be finite and nonzero"));
    }
    Ok(reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| ((r - e) / r).abs())
        .sum::<f64>()
        / reference.len() as f64)
}

/// Threshold fraction: known, or chosen from candidates by the smallest
/// reconstruction error.
#[derive(Debug, Clone, PartialEq)]
pub enum PChoice {
    Known(f64),
    Candidates(Vec<f64>),
}

/// Settings for [`run_procedure1`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureConfig {
    pub method: Method,
    pub budget: OptBudget,
    pub n_replications: usize,
    /// First-passage settings; `None` skips the first-passage estimate.
    pub fpt: Option<FptConfig>,
    /// Overrides the Step-1 window end.
    pub window_end: Option<f64>,
}

impl Default for ProcedureConfig {
    fn default() -> Self {
        Self {
            method: Method::Sa,
            budget: OptBudget::default(),
            n_replications: 30,
            fpt: Some(FptConfig::default()),
            window_end: None,
        }
    }
}

/// Everything estimated for one value of `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub p: f64,
    /// Classical-model estimate from Step 1.
    pub mle: DiffusionParams,
    pub init_mle: (f64, f64),
    pub bounds: BoundsBox,
    pub window_end: f64,
    pub t_star_det: f64,
    pub t_star_fpt: Option<FptSummary>,
    pub c_hat: Perturbation,
    /// RAE between the sample mean and the reconstructed perturbed mean.
    pub rae_mean: f64,
    /// Reconstructed perturbed mean on the observation grid.
    pub fitted_mean: Vec<(f64, f64)>,
    pub replication_trace: Vec<[f64; 4]>,
    pub warnings: Vec<String>,
}

impl FitReport {
    /// The fitted model including `Ĉ`.
    pub fn modified_params(&self) -> DiffusionParams {
        self.mle.with_perturbation(self.c_hat.clone())
    }
}

/// Result of [`run_procedure1`]: the selected fit and the RAE of every
/// candidate `p` that ran.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureOutcome {
    pub selected: FitReport,
    pub candidates: Vec<(f64, f64)>,
}

/// Runs the three estimation steps for a known `p` or for each candidate.
pub fn run_procedure1(data: &SamplePaths, p: &PChoice, cfg: &ProcedureConfig) -> Result<ProcedureOutcome> {
    let ps = match p {
        PChoice::Known(p) => alloc::vec![*p],
        PChoice::Candidates(c) if c.is_empty() => {
            return Err(Error::InvalidData("empty candidate set for p".into()));
        }
        PChoice::Candidates(c) => c.clone(),
    };
    let mut best: Option<FitReport> = None;
    let mut candidates = Vec::with_capacity(ps.len());
    for p in ps {
        let report = procedure_for(data, p, cfg)?;
        candidates.push((p, report.rae_mean));
        if best.as_ref().is_none_or(|b| report.rae_mean < b.rae_mean) {
            best = Some(report);
        }
    }
    Ok(ProcedureOutcome {
        selected: best.expect("at least one candidate ran"),
        candidates,
    })
}

fn procedure_for(data: &SamplePaths, p: f64, cfg: &ProcedureConfig) -> Result<FitReport> {
    let mut warnings = Vec::new();
    let bounds = bound_parameters(data, p)?;
    let (grid, mean) = data.sample_mean()?;
    let window_end = match cfg.window_end {
        Some(t) => t,
        None => match grid.iter().zip(&mean).find(|(_, x)| **x >= bounds.provenance.k_star) {
            Some((t, _)) => *t,
            None => {
                warnings.push(String::from(
                    "the sample mean never reaches (1 + p) S(t_I*); Step 1 used every observation",
                ));
                grid[grid.len() - 1]
            }
        },
    };
    let fit = fit_mle(data, window_end, &bounds, cfg.method, &cfg.budget, cfg.n_replications)?;
    let (t_star_det, _) = estimate_tstar(&fit.params, p, TStarMode::Deterministic, None)?;
    let t_star_fpt = match &cfg.fpt {
        Some(f) => {
            let mut f = *f;
            if f.boundary == FptBoundary::ObservedData {
                f.boundary = FptBoundary::Observed {
                    x_inflection: bounds.provenance.x_inflection,
                };
            }
            estimate_tstar(&fit.params, p, TStarMode::Fpt, Some(&f))?.1
        }
        None => None,
    };
    let c_hat = estimate_c(data, &fit.params, t_star_det)?;
    let fitted_mean = reconstructed_mean(&grid, mean[0], &fit.params, &c_hat)?;
    let estimate: Vec<f64> = fitted_mean.iter().map(|p| p.1).collect();
    let rae_mean = rae(&mean, &estimate)?;
    Ok(FitReport {
        p,
        mle: fit.params,
        init_mle: fit.init_mle,
        bounds,
        window_end,
        t_star_det,
        t_star_fpt,
        c_hat,
        rae_mean,
        fitted_mean,
        replication_trace: fit.replicates,
        warnings,
    })
}

/// `Ê[X̃(t)] = Ê[X(t)] exp(∫_{t̂*}^t Ĉ κ̂)` on `grid`, anchored at the sample
/// mean at the first time.
pub fn reconstructed_mean(grid: &[f64], start: f64, mle: &DiffusionParams, c_hat: &Perturbation) -> Result<Vec<(f64, f64)>> {
    let r = mle.richards().with_anchor(grid[0], start)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = grid[0];
    for &t in grid {
        acc += perturbation_integral(c_hat, &r, prev, t)?;
        prev = t;
        out.push((t, r.evaluate(t)? * acc.exp()));
    }
    Ok(out)
}

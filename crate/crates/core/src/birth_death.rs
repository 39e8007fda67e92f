//! Time-inhomogeneous linear birth-death process whose mean is the perturbed
//! Richards curve, and its pure-birth special case.
//!
//! Individuals give birth at rate `λ(1 − ρ(t))` and die at rate `μ`, with
//! `ρ(t) = 1 − (μ + h̃(t))/λ` and `h̃(t) = (q + C(t)) κ(t)`. Requiring
//! `λ − μ = q |ln k|` keeps `ρ` in `[0, 1]` whenever `C(t) k^t <= q η`. Time
//! starts at 0 in this module; shift callers' clocks before entry.
//!
//! All transition quantities are driven by two functions of time:
//! `ψ(t) = exp(−∫_0^t h̃)` and `φ(t) = 1 − ψ(t) + μ ∫_0^t ψ`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::growth::{perturbation_value, tail_cutoff, Perturbation, PerturbationIntegrator, RichardsParams};
use crate::numerics::{find_root, integrate_with_budget, rng_stream};
use crate::par::map_indices;

const RHO_GRID: usize = 1000;
const POPULATION_LIMIT: u64 = 1_000_000_000;

/// Rates and initial state of the process.
#[derive(Debug, Clone)]
pub struct BdConfig {
    params: RichardsParams,
    perturbation: Perturbation,
    lambda: f64,
    mu: f64,
    y0: u64,
    integrator: PerturbationIntegrator,
}

/// The pair `(ψ(t), φ(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiPhi {
    pub psi: f64,
    pub phi: f64,
}

impl BdConfig {
    /// Validates `λ − μ = q |ln k|` and `ρ(t) ∈ [0, 1]` on a dense grid.
    pub fn new(
        params: RichardsParams,
        perturbation: Perturbation,
        lambda: f64,
        mu: f64,
        y0: u64,
    ) -> Result<Self> {
        if params.t0() != 0.0 {
            return Err(Error::invalid("t0", params.t0(), "the process starts at time 0"));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", mu, "must be nonnegative and finite"));
        }
        let drift = -params.q() * params.k().ln();
        if !(lambda > 0.0) || (lambda - mu - drift).abs() > 1e-9 * lambda {
            return Err(Error::invalid("lambda", lambda, "must equal mu - q ln k"));
        }
        if y0 == 0 {
            return Err(Error::invalid("y0", 0.0, "initial population must be positive"));
        }
        let horizon = tail_cutoff(&params, &perturbation).max(1.0);
        let integrator = PerturbationIntegrator::new(params, perturbation.clone(), horizon, 0.25)?;
        let cfg = Self {
            params,
            perturbation,
            lambda,
            mu,
            y0,
            integrator,
        };
        for j in 0..RHO_GRID {
            let t = horizon * j as f64 / (RHO_GRID - 1) as f64;
            let rho = cfg.rho(t);
            if !(-1e-12..=1.0 + 1e-12).contains(&rho) {
                return Err(Error::Domain(alloc::format!(
                    "rho(t) = {rho} leaves [0, 1] at t = {t}; the perturbation is too large for these rates"
                )));
            }
        }
        Ok(cfg)
    }

    /// Birth-death variant with death rate `mu`.
    pub fn birth_death(params: RichardsParams, perturbation: Perturbation, mu: f64, y0: u64) -> Result<Self> {
        let lambda = mu - params.q() * params.k().ln();
        Self::new(params, perturbation, lambda, mu, y0)
    }

    /// Pure-birth variant (`μ = 0`).
    pub fn pure_birth(params: RichardsParams, perturbation: Perturbation, y0: u64) -> Result<Self> {
        Self::birth_death(params, perturbation, 0.0, y0)
    }

    pub fn params(&self) -> &RichardsParams {
        &self.params
    }
    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn y0(&self) -> u64 {
        self.y0
    }
    pub fn is_pure_birth(&self) -> bool {
        self.mu == 0.0
    }

    /// Perturbed relative growth rate `h̃(t)`.
    pub fn modified_rate(&self, t: f64) -> f64 {
        (self.params.q() + perturbation_value(&self.perturbation, &self.params, t)) * self.params.kernel(t)
    }

    /// `ρ(t) = 1 − (μ + h̃(t))/λ`.
    pub fn rho(&self, t: f64) -> f64 {
        1.0 - (self.mu + self.modified_rate(t)) / self.lambda
    }

    /// `∫_0^t h̃`.
    fn cumulative_rate(&self, t: f64) -> Result<f64> {
        Ok(self.params.log_growth(0.0, t) + self.integrator.cumulative(t)?)
    }

    fn psi(&self, t: f64) -> Result<f64> {
        Ok((-self.cumulative_rate(t)?).exp())
    }

    fn require_pure_birth(&self) -> Result<()> {
        if self.is_pure_birth() {
            Ok(())
        } else {
            Err(Error::invalid("mu", self.mu, "operation needs the pure-birth variant"))
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("t", t, "must be finite and nonnegative"))
    }
}

pub fn psi_phi(cfg: &BdConfig, t: f64) -> Result<PsiPhi> {
    check_time(t)?;
    let psi = cfg.psi(t)?;
    let mut phi = 1.0 - psi;
    if cfg.mu > 0.0 && t > 0.0 {
        let f = |s: f64| cfg.psi(s).unwrap_or(f64::NAN);
        // ψ is only once differentiable at t*, so integrate the two sides apart.
        let ts = cfg.perturbation.t_star();
        let mut area = 0.0;
        let mut left = 0.0;
        if !cfg.perturbation.is_none() && ts > 0.0 && ts < t {
            area += integrate_with_budget(f, 0.0, ts, 1e-13, 60)?.value;
            left = ts;
        }
        area += integrate_with_budget(f, left, t, 1e-13, 60)?.value;
        phi += cfg.mu * area;
    }
    Ok(PsiPhi { psi, phi })
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let (n, k) = (n as f64, k as f64);
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// `P(X(t) = x | X(0) = y)` from `(ψ, φ)`.
///
/// Each initial individual leaves a zero-modified geometric number of
/// descendants: none with probability `a = 1 − 1/(ψ+φ)`, otherwise a geometric
/// count with ratio `β = φ/(ψ+φ)`. Summing over the number `j` of surviving
/// lineages gives only positive terms, which are accumulated in log space.
/// Expanding the same generating function in powers of `z` yields the classical
/// alternating binomial sum, which loses digits once `φ > 1`.
fn transition_from(pp: PsiPhi, y: u64, x: u64) -> Result<f64> {
    let total = pp.psi + pp.phi;
    if !(total >= 1.0 - 1e-12) {
        return Err(Error::Domain(alloc::format!(
            "psi + phi = {total} < 1: inconsistent configuration"
        )));
    }
    let ln_survive = -total.ln();
    let ln_extinct = if total <= 1.0 { f64::NEG_INFINITY } else { libm::log1p(-1.0 / total) };
    if x == 0 {
        return Ok((y as f64 * ln_extinct).exp());
    }
    let ln_stop = pp.psi.ln() - total.ln();
    let ln_beta = if pp.phi > 0.0 { pp.phi.ln() - total.ln() } else { f64::NEG_INFINITY };
    let mut logs = Vec::with_capacity(x.min(y) as usize);
    for j in 1..=x.min(y) {
        let extinct = if y == j { 0.0 } else { (y - j) as f64 * ln_extinct };
        let growth = if x == j { 0.0 } else { (x - j) as f64 * ln_beta };
        let term = ln_choose(y, j) + j as f64 * (ln_survive + ln_stop) + extinct
            + ln_choose(x - 1, j - 1)
            + growth;
        if term > f64::NEG_INFINITY {
            logs.push(term);
        }
    }
    let Some(top) = logs.iter().copied().reduce(f64::max) else {
        return Ok(0.0);
    };
    let scaled: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    Ok((pairwise_sum(&scaled) * top.exp()).min(1.0))
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// `P(X(t) = x | X(0) = y0)`.
pub fn bd_transition_prob(cfg: &BdConfig, x: u64, t: f64) -> Result<f64> {
    transition_from(psi_phi(cfg, t)?, cfg.y0, x)
}

/// The probabilities `P(X(t) = x)` for `x = 0..=x_max`, sharing one `(ψ, φ)`
/// evaluation.
pub fn bd_pmf(cfg: &BdConfig, t: f64, x_max: u64) -> Result<Vec<f64>> {
    let pp = psi_phi(cfg, t)?;
    (0..=x_max).map(|x| transition_from(pp, cfg.y0, x)).collect()
}

/// Conditional mean `y/ψ` and variance `y(ψ + 2φ − 1)/ψ²`.
pub fn bd_mean_variance(cfg: &BdConfig, t: f64) -> Result<(f64, f64)> {
    let PsiPhi { psi, phi } = psi_phi(cfg, t)?;
    let y = cfg.y0 as f64;
    Ok((y / psi, (y * (psi + 2.0 * phi - 1.0) / (psi * psi)).max(0.0)))
}

/// Probability of ultimate extinction: certain when deaths occur, impossible
/// otherwise.
pub fn extinction_probability(cfg: &BdConfig) -> f64 {
    if cfg.mu > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Probability generating function `E[z^{X(t)}]` for `0 < z < 1`.
pub fn bd_pgf(cfg: &BdConfig, z: f64, t: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::invalid("z", z, "must lie in (0, 1)"));
    }
    let PsiPhi { psi, phi } = psi_phi(cfg, t)?;
    let single = 1.0 - (z - 1.0) / ((z - 1.0) * phi - psi);
    Ok(single.powf(cfg.y0 as f64))
}

/// Cumulative birth intensity `Λ(t) = ∫_0^t λ(1 − ρ)` of the pure-birth process.
pub fn birth_intensity(cfg: &BdConfig, t: f64) -> Result<f64> {
    cfg.require_pure_birth()?;
    check_time(t)?;
    cfg.cumulative_rate(t)
}

/// Negative-binomial law of the pure-birth process.
pub fn birth_transition_prob(cfg: &BdConfig, x: u64, t: f64) -> Result<f64> {
    let big_lambda = birth_intensity(cfg, t)?;
    let y = cfg.y0;
    if x < y {
        return Ok(0.0);
    }
    if big_lambda == 0.0 {
        return Ok(if x == y { 1.0 } else { 0.0 });
    }
    // ln(1 − e^{−Λ}) without cancellation for small Λ.
    let ln_growth = (-libm::expm1(-big_lambda)).ln();
    let ln_p = ln_choose(x - 1, y - 1) - y as f64 * big_lambda + (x - y) as f64 * ln_growth;
    Ok(ln_p.exp())
}

/// Fano factor `D = 1/ψ − 1` and coefficient of variation `sqrt((1 − ψ)/y)`
/// of the pure-birth process.
pub fn dispersion_indices(cfg: &BdConfig, t: f64) -> Result<(f64, f64)> {
    let psi = (-birth_intensity(cfg, t)?).exp();
    Ok((1.0 / psi - 1.0, ((1.0 - psi) / cfg.y0 as f64).max(0.0).sqrt()))
}

/// Time at which the pure-birth process turns from underdispersed to
/// overdispersed (`D = 1`, i.e. `ψ = 1/2`). `None` when `K̃ <= 2y`, in which
/// case the process stays underdispersed.
pub fn underdispersion_time(cfg: &BdConfig) -> Result<Option<f64>> {
    cfg.require_pure_birth()?;
    let end = tail_cutoff(&cfg.params, &cfg.perturbation).max(-40.0 / cfg.params.k().ln());
    let g = |t: f64| cfg.psi(t).unwrap_or(f64::NAN) - 0.5;
    if g(end) >= 0.0 {
        return Ok(None);
    }
    find_root(g, 0.0, end, 1e-14).map(Some)
}

/// One simulated trajectory: the state is `states[j]` on
/// `[jump_times[j], jump_times[j + 1])`. The first jump time is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPath {
    pub jump_times: Vec<f64>,
    pub states: Vec<u64>,
}

impl CountPath {
    pub fn state_at(&self, t: f64) -> u64 {
        let j = self.jump_times.partition_point(|&s| s <= t);
        self.states[j.saturating_sub(1)]
    }
}

/// Exact event simulation on `[0, horizon]` by thinning: candidate events
/// arrive at rate `n(λ + μ)`, births are kept with probability `1 − ρ(t)`.
/// Path `i` draws from stream `i` of `seed`.
pub fn simulate_bd_paths(cfg: &BdConfig, horizon: f64, n_paths: usize, seed: u64) -> Result<Vec<CountPath>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon", horizon, "must be positive and finite"));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", 0.0, "must be at least 1"));
    }
    let birth_share = cfg.lambda / (cfg.lambda + cfg.mu);
    map_indices(n_paths, |i| {
        let mut rng = rng_stream(seed, i as u64);
        let mut t = 0.0;
        let mut n = cfg.y0;
        let mut path = CountPath {
            jump_times: alloc::vec![0.0],
            states: alloc::vec![n],
        };
        while n > 0 {
            t += rng.exponential() / (n as f64 * (cfg.lambda + cfg.mu));
            if t > horizon {
                break;
            }
            if rng.uniform() < birth_share {
                if rng.uniform() * cfg.lambda < cfg.mu + cfg.modified_rate(t) {
                    n += 1;
                } else {
                    continue;
                }
            } else {
                n -= 1;
            }
            if n > POPULATION_LIMIT {
                return Err(Error::PathExplosion {
                    limit: POPULATION_LIMIT,
                    time: t,
                });
            }
            path.jump_times.push(t);
            path.states.push(n);
        }
        Ok(path)
    })
    .into_iter()
    .collect()
}

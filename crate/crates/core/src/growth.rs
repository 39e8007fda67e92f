//! Classical and perturbed Richards curves.
//!
//! The classical curve is
//! `x(t) = x0 * ((eta + k^t0) / (eta + k^t))^q` with `0 < k < 1`. The perturbed
//! curve replaces `q` by `q + C(t)` from the switching time `t*` onward, which
//! multiplies the classical curve by `exp(∫_{t*}^t C(u) κ(u) du)` where
//! `κ(u) = k^u |ln k| / (eta + k^u)` is the perturbation kernel.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{integrate_with_budget, MonotoneCubic};

const QUAD_TOL: f64 = 1e-12;
const QUAD_BUDGET: usize = 60;

/// Deterministic parameters `(q, k, eta)` with the anchor `(t0, x0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawRichards"))]
pub struct RichardsParams {
    q: f64,
    k: f64,
    eta: f64,
    t0: f64,
    x0: f64,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawRichards {
    q: f64,
    k: f64,
    eta: f64,
    t0: f64,
    x0: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<RawRichards> for RichardsParams {
    type Error = Error;
    fn try_from(r: RawRichards) -> Result<Self> {
        Self::new(r.q, r.k, r.eta, r.t0, r.x0)
    }
}

/// Inflection point and tangent-line summary of a classical curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TangentSummary {
    pub t_inflection: f64,
    pub x_at_inflection: f64,
    /// Maximum specific growth rate: slope of the curve at the inflection.
    pub mu: f64,
    /// Lag time: where the inflection tangent meets the time axis.
    pub lambda_lag: f64,
    /// False when the inflection lies at or before `t0`, so the observed
    /// curve is concave from the start.
    pub inflection_after_start: bool,
}

impl RichardsParams {
    pub fn new(q: f64, k: f64, eta: f64, t0: f64, x0: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::invalid("q", q, "must be positive and finite"));
        }
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::invalid("k", k, "must lie in (0, 1)"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", eta, "must be positive and finite"));
        }
        if !t0.is_finite() {
            return Err(Error::invalid("t0", t0, "must be finite"));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::invalid("x0", x0, "must be positive and finite"));
        }
        Ok(Self { q, k, eta, t0, x0 })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Same `(q, k, eta)` with a different anchor.
    pub fn with_anchor(&self, t0: f64, x0: f64) -> Result<Self> {
        Self::new(self.q, self.k, self.eta, t0, x0)
    }

    /// `k^t`, computed as `exp(t ln k)`.
    #[inline]
    pub fn k_pow(&self, t: f64) -> f64 {
        (t * self.k.ln()).exp()
    }

    /// Perturbation kernel `k^t |ln k| / (eta + k^t)`.
    #[inline]
    pub fn kernel(&self, t: f64) -> f64 {
        let kt = self.k_pow(t);
        kt * -self.k.ln() / (self.eta + kt)
    }

    /// `q ln((eta + k^s) / (eta + k^t))`, the log growth of the classical
    /// curve from `s` to `t`.
    #[inline]
    pub fn log_growth(&self, s: f64, t: f64) -> f64 {
        self.q * ((self.eta + self.k_pow(s)) / (self.eta + self.k_pow(t))).ln()
    }

    /// The classical curve at `t >= t0`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t >= self.t0) {
            return Err(Error::invalid("t", t, "must not precede t0"));
        }
        Ok(self.value_at(t))
    }

    /// The curve formula without the `t >= t0` check.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        self.x0 * self.log_growth(self.t0, t).exp()
    }

    /// Limit of the curve as `t -> ∞`.
    pub fn carrying_capacity(&self) -> f64 {
        self.x0 * (1.0 + self.k_pow(self.t0) / self.eta).powf(self.q)
    }

    /// Relative growth rate `h(t) = q k^t |ln k| / (eta + k^t)`.
    pub fn growth_rate(&self, t: f64) -> f64 {
        self.q * self.kernel(t)
    }

    pub fn tangent_summary(&self) -> TangentSummary {
        let abs_ln_k = -self.k.ln();
        let t_inflection = (self.eta / self.q).ln() / self.k.ln();
        let ratio = self.q / (1.0 + self.q);
        let big_k = self.carrying_capacity();
        TangentSummary {
            t_inflection,
            x_at_inflection: big_k * ratio.powf(self.q),
            mu: big_k * abs_ln_k * ratio.powf(self.q + 1.0),
            lambda_lag: t_inflection - (1.0 + 1.0 / self.q) / abs_ln_k,
            inflection_after_start: t_inflection > self.t0,
        }
    }

    /// First time the curve reaches `(1 + p) x(t)`, or `+∞` when that level is
    /// at or above the carrying capacity.
    pub fn first_crossing_time(&self, p: f64, t: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::invalid("p", p, "must be positive"));
        }
        let arg = (self.eta + self.k_pow(t)) / (1.0 + p).powf(1.0 / self.q) - self.eta;
        Ok(if arg > 0.0 {
            arg.ln() / self.k.ln()
        } else {
            f64::INFINITY
        })
    }

    /// Switching time: first crossing of `(1 + p) x(t_I)`.
    pub fn switch_time(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::invalid("p", p, "must be positive"));
        }
        let arg = (1.0 + self.q) / (1.0 + p).powf(1.0 / self.q) - self.q;
        if !(arg > 0.0) {
            return Err(Error::Domain(alloc::format!(
                "boundary unreachable: (1+p) x(t_I) exceeds the carrying capacity for p = {p}"
            )));
        }
        Ok(self.tangent_summary().t_inflection + arg.ln() / self.k.ln())
    }
}

/// Shape of the perturbation function `C(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationKind {
    None,
    /// `(eta + k^t)^{-m} - (eta + k^{t*})^{-m}`: concave, zero at `t*`.
    PowerForm { m: f64 },
    /// `y exp((alpha/beta)(1 - (t - t*)^{-beta}))`: sigmoidal, tends to
    /// `y e^{alpha/beta}`.
    SigmoidForm { y: f64, alpha: f64, beta: f64 },
    /// Monotone cubic through `(time, value)` knots, constant past the last.
    Tabulated(MonotoneCubic),
}

/// A perturbation function together with its switching time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(try_from = "PerturbationSpec", into = "PerturbationSpec")
)]
pub struct Perturbation {
    kind: PerturbationKind,
    t_star: f64,
}

/// Plain description of a [`Perturbation`], suitable for configuration files.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum PerturbationSpec {
    None,
    PowerForm { m: f64, t_star: f64 },
    SigmoidForm { y: f64, alpha: f64, beta: f64, t_star: f64 },
    Tabulated { knots: Vec<(f64, f64)> },
}

impl TryFrom<PerturbationSpec> for Perturbation {
    type Error = Error;
    fn try_from(spec: PerturbationSpec) -> Result<Self> {
        match spec {
            PerturbationSpec::None => Ok(Perturbation::none()),
            PerturbationSpec::PowerForm { m, t_star } => Perturbation::power_form(m, t_star),
            PerturbationSpec::SigmoidForm {
                y,
                alpha,
                beta,
                t_star,
            } => Perturbation::sigmoid_form(y, alpha, beta, t_star),
            PerturbationSpec::Tabulated { knots } => Perturbation::tabulated(&knots),
        }
    }
}

impl From<Perturbation> for PerturbationSpec {
    fn from(c: Perturbation) -> Self {
        match c.kind {
            PerturbationKind::None => PerturbationSpec::None,
            PerturbationKind::PowerForm { m } => PerturbationSpec::PowerForm { m, t_star: c.t_star },
            PerturbationKind::SigmoidForm { y, alpha, beta } => PerturbationSpec::SigmoidForm {
                y,
                alpha,
                beta,
                t_star: c.t_star,
            },
            PerturbationKind::Tabulated(table) => PerturbationSpec::Tabulated {
                knots: table
                    .knots()
                    .iter()
                    .copied()
                    .zip(table.values().iter().copied())
                    .collect(),
            },
        }
    }
}

impl Perturbation {
    /// The null perturbation: the classical model.
    pub fn none() -> Self {
        Self {
            kind: PerturbationKind::None,
            t_star: 0.0,
        }
    }

    pub fn power_form(m: f64, t_star: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("m", m, "must be positive and finite"));
        }
        check_time(t_star)?;
        Ok(Self {
            kind: PerturbationKind::PowerForm { m },
            t_star,
        })
    }

    pub fn sigmoid_form(y: f64, alpha: f64, beta: f64, t_star: f64) -> Result<Self> {
        for (name, v) in [("y", y), ("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, v, "must be positive and finite"));
            }
        }
        check_time(t_star)?;
        Ok(Self {
            kind: PerturbationKind::SigmoidForm { y, alpha, beta },
            t_star,
        })
    }

    /// Tabulated perturbation. The first knot is the switching time and must
    /// carry the value 0; all values must be nonnegative.
    pub fn tabulated(knots: &[(f64, f64)]) -> Result<Self> {
        let Some(&(t_star, c0)) = knots.first() else {
            return Err(Error::InvalidData("tabulated perturbation needs knots".into()));
        };
        if c0 != 0.0 {
            return Err(Error::InvalidData(alloc::format!(
                "first knot must have value 0, found {c0}"
            )));
        }
        if let Some(&(t, v)) = knots.iter().find(|(_, v)| !(*v >= 0.0)) {
            return Err(Error::InvalidData(alloc::format!(
                "perturbation value {v} at t = {t} is negative"
            )));
        }
        let table = MonotoneCubic::new(
            knots.iter().map(|p| p.0).collect(),
            knots.iter().map(|p| p.1).collect(),
        )?;
        Ok(Self {
            kind: PerturbationKind::Tabulated(table),
            t_star,
        })
    }

    pub fn kind(&self) -> &PerturbationKind {
        &self.kind
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, PerturbationKind::None)
    }

    /// The same perturbation moved to a new switching time. Tabulated knots
    /// are translated in time.
    pub fn with_t_star(&self, t_star: f64) -> Result<Self> {
        check_time(t_star)?;
        let kind = match &self.kind {
            PerturbationKind::Tabulated(table) => {
                let shift = t_star - self.t_star;
                PerturbationKind::Tabulated(MonotoneCubic::new(
                    table.knots().iter().map(|t| t + shift).collect(),
                    table.values().to_vec(),
                )?)
            }
            other => other.clone(),
        };
        Ok(Self { kind, t_star })
    }

    /// Upper bound of `C` over `t >= t*`.
    pub fn sup(&self, params: &RichardsParams) -> f64 {
        match &self.kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::PowerForm { m } => {
                params.eta.powf(-m) - (params.eta + params.k_pow(self.t_star)).powf(-m)
            }
            PerturbationKind::SigmoidForm { y, alpha, beta } => y * (alpha / beta).exp(),
            PerturbationKind::Tabulated(table) => table.max_value(),
        }
    }

    /// Points where the integrand is only piecewise smooth.
    fn breakpoints(&self) -> &[f64] {
        match &self.kind {
            PerturbationKind::Tabulated(table) => table.knots(),
            _ => &[],
        }
    }
}

fn check_time(t_star: f64) -> Result<()> {
    if t_star.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("t_star", t_star, "must be finite"))
    }
}

/// `C(t)`; zero on `t <= t*`.
pub fn perturbation_value(c: &Perturbation, params: &RichardsParams, t: f64) -> f64 {
    if c.is_none() || t <= c.t_star {
        return 0.0;
    }
    match &c.kind {
        PerturbationKind::None => 0.0,
        PerturbationKind::PowerForm { m } => {
            (params.eta + params.k_pow(t)).powf(-m) - (params.eta + params.k_pow(c.t_star)).powf(-m)
        }
        PerturbationKind::SigmoidForm { y, alpha, beta } => {
            y * ((alpha / beta) * (1.0 - (t - c.t_star).powf(-beta))).exp()
        }
        PerturbationKind::Tabulated(table) => table.eval(t),
    }
}

/// `∫ C(u) κ(u) du` over `[max(a, t*), max(b, t*)]`.
pub fn perturbation_integral(c: &Perturbation, params: &RichardsParams, a: f64, b: f64) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::Domain(alloc::format!(
            "integration bounds out of order: [{a}, {b}]"
        )));
    }
    if c.is_none() || b <= c.t_star {
        return Ok(0.0);
    }
    let lo = a.max(c.t_star);
    integrate_pieces(
        |u| perturbation_value(c, params, u) * params.kernel(u),
        lo,
        b,
        c.breakpoints(),
    )
}

// Adaptive quadrature split at interior breakpoints. Each piece gets the full
// tolerance and budget; tolerances are absolute, so the sum stays accurate
// for the handful of pieces that occur in practice.
fn integrate_pieces<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    let mut left = a;
    for &t in breaks.iter().filter(|&&t| t > a && t < b) {
        total += integrate_checked(&f, left, t)?;
        left = t;
    }
    Ok(total + integrate_checked(&f, left, b)?)
}

fn integrate_checked<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64> {
    integrate_with_budget(f, a, b, QUAD_TOL, QUAD_BUDGET).map(|e| e.value)
}

/// The perturbed curve `x(t) exp(∫_{t*}^t C κ)`.
pub fn evaluate_modified(params: &RichardsParams, c: &Perturbation, t: f64) -> Result<f64> {
    let x = params.evaluate(t)?;
    Ok(x * perturbation_integral(c, params, c.t_star.min(t), t)?.exp())
}

/// Time beyond which the kernel times `sup C` is below `1e-12`.
pub fn tail_cutoff(params: &RichardsParams, c: &Perturbation) -> f64 {
    let sup = c.sup(params);
    if !(sup > 0.0) {
        return c.t_star;
    }
    // κ(t) <= k^t |ln k| / eta, so this bound is conservative.
    let target = 1e-12 * params.eta / (-params.k.ln() * sup);
    (target.ln() / params.k.ln()).max(c.t_star)
}

/// Limit of the perturbed curve as `t -> ∞`.
pub fn modified_carrying_capacity(params: &RichardsParams, c: &Perturbation) -> Result<f64> {
    let big_k = params.carrying_capacity();
    if c.is_none() {
        return Ok(big_k);
    }
    let end = tail_cutoff(params, c);
    Ok(big_k * perturbation_integral(c, params, c.t_star, end)?.exp())
}

/// Sign of a real quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(v: f64) -> Self {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }
}

/// Direction in which the perturbed curve at `t` moves when the switching time
/// is delayed: the sign of `∫_{t*}^t (∂C/∂t*) κ`.
///
/// `eps` is the finite-difference step used for tabulated perturbations.
pub fn sensitivity_sign(params: &RichardsParams, c: &Perturbation, t: f64, eps: f64) -> Result<Sign> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::invalid("eps", eps, "must lie in (0, 0.5]"));
    }
    if c.is_none() || t <= c.t_star {
        return Ok(Sign::Zero);
    }
    let ts = c.t_star;
    let derivative = |u: f64| -> f64 {
        match &c.kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::PowerForm { m } => {
                let kts = params.k_pow(ts);
                -m * (params.eta + kts).powf(-m - 1.0) * kts * -params.k.ln()
            }
            PerturbationKind::SigmoidForm { alpha, beta, .. } => {
                -alpha * perturbation_value(c, params, u) * (u - ts).powf(-beta - 1.0)
            }
            PerturbationKind::Tabulated(table) => (table.eval(u - eps) - table.eval(u)) / eps,
        }
    };
    let mut breaks: Vec<f64> = c.breakpoints().to_vec();
    breaks.extend(c.breakpoints().iter().map(|k| k + eps));
    breaks.sort_by(f64::total_cmp);
    let value = integrate_pieces(|u| derivative(u) * params.kernel(u), ts, t, &breaks)?;
    Ok(Sign::of(value))
}

/// Cumulative perturbation integral `I(t) = ∫_{t*}^t C κ`, tabulated at
/// regular nodes so that repeated evaluations cost one short quadrature.
#[derive(Debug, Clone)]
pub struct PerturbationIntegrator {
    params: RichardsParams,
    perturbation: Perturbation,
    nodes_start: f64,
    step: f64,
    cumulative: Vec<f64>,
}

impl PerturbationIntegrator {
    /// Tabulates `I` on `[t*, max(horizon, t*)]` with node spacing `step`.
    pub fn new(params: RichardsParams, perturbation: Perturbation, horizon: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::invalid("step", step, "must be positive"));
        }
        let start = perturbation.t_star;
        let mut cumulative = alloc::vec![0.0];
        if !perturbation.is_none() {
            let end = horizon.min(tail_cutoff(&params, &perturbation));
            let mut t = start;
            while t < end {
                let next = t + step;
                let piece = perturbation_integral(&perturbation, &params, t, next)?;
                cumulative.push(cumulative.last().copied().unwrap_or(0.0) + piece);
                t = next;
            }
        }
        Ok(Self {
            params,
            perturbation,
            nodes_start: start,
            step,
            cumulative,
        })
    }

    pub fn params(&self) -> &RichardsParams {
        &self.params
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    /// `I(t)`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        if self.perturbation.is_none() || t <= self.nodes_start {
            return Ok(0.0);
        }
        let j = (((t - self.nodes_start) / self.step) as usize).min(self.cumulative.len() - 1);
        let node = self.nodes_start + j as f64 * self.step;
        Ok(self.cumulative[j]
            + perturbation_integral(&self.perturbation, &self.params, node.min(t), t)?)
    }

    /// `∫_s^t C κ` for `s <= t`.
    pub fn between(&self, s: f64, t: f64) -> Result<f64> {
        if t - s < self.step {
            return perturbation_integral(&self.perturbation, &self.params, s, t);
        }
        Ok(self.cumulative(t)? - self.cumulative(s)?)
    }
}

//! Box-constrained, derivative-free maximizers: simulated annealing (SA) and
//! the ant lion optimizer (ALO), plus replication averaging.
//!
//! Both run on a fixed evaluation budget and return the best point they
//! evaluated. Non-finite objective values count as `-∞`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{rng_stream, RngStream};
use crate::par::map_indices;

/// Closed search interval per dimension.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidData("search box needs matching, nonempty bounds".into()));
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::invalid("bound", l, "each interval needs finite lo < hi"));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self> {
        Self::new(intervals.iter().map(|i| i.0).collect(), intervals.iter().map(|i| i.1).collect())
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims() && x.iter().zip(&self.lo).zip(&self.hi).all(|((v, l), h)| *l <= *v && *v <= *h)
    }

    fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    /// Folds `v` back into `[lo_i, hi_i]` by mirror reflection.
    fn reflect(&self, i: usize, v: f64) -> f64 {
        let (lo, w) = (self.lo[i], self.width(i));
        if !v.is_finite() {
            return lo + 0.5 * w;
        }
        let mut y = (v - lo).rem_euclid(2.0 * w);
        if y > w {
            y = 2.0 * w - y;
        }
        (lo + y).clamp(lo, self.hi[i])
    }

    fn uniform_point(&self, rng: &mut RngStream) -> Vec<f64> {
        (0..self.dims()).map(|i| rng.uniform_in(self.lo[i], self.hi[i])).collect()
    }
}

/// Evaluation budget and tuning constants.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptBudget {
    pub max_evaluations: usize,
    /// Ant/antlion population (ALO only).
    pub population: usize,
    /// Starting temperature on the probe-scaled objective (SA only).
    pub initial_temperature: f64,
    /// Geometric cooling factor applied after every proposal (SA only).
    pub cooling_rate: f64,
    pub seed: u64,
}

impl Default for OptBudget {
    fn default() -> Self {
        Self {
            max_evaluations: 20_000,
            population: 30,
            initial_temperature: 1.0,
            cooling_rate: 0.995,
            seed: 0,
        }
    }
}

impl OptBudget {
    fn validate(&self, method: Method) -> Result<()> {
        match method {
            Method::Sa => {
                if self.max_evaluations < 2 {
                    return Err(Error::invalid("max_evaluations", self.max_evaluations as f64, "must be at least 2"));
                }
                if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
                    return Err(Error::invalid("initial_temperature", self.initial_temperature, "must be positive"));
                }
                if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
                    return Err(Error::invalid("cooling_rate", self.cooling_rate, "must lie in (0, 1)"));
                }
            }
            Method::Alo => {
                if self.population < 2 {
                    return Err(Error::invalid("population", self.population as f64, "must be at least 2"));
                }
                if self.max_evaluations < self.population {
                    return Err(Error::invalid(
                        "max_evaluations",
                        self.max_evaluations as f64,
                        "must be at least the population",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Optimizer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Sa,
    Alo,
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value seen at the end of each iteration (SA: each temperature
    /// stage; ALO: each generation).
    pub best_trace: Vec<f64>,
}

/// Counts evaluations and remembers the best point.
struct Tracker<'a, F> {
    f: &'a F,
    used: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl<'a, F: Fn(&[f64]) -> f64> Tracker<'a, F> {
    fn new(f: &'a F) -> Self {
        Self { f, used: 0, best: None }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.used += 1;
        let v = (self.f)(x);
        let v = if v.is_finite() { v } else { f64::NEG_INFINITY };
        if v > f64::NEG_INFINITY && self.best.as_ref().is_none_or(|(_, b)| v > *b) {
            self.best = Some((x.to_vec(), v));
        }
        v
    }

    fn best_value(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1)
    }

    fn finish(self, best_trace: Vec<f64>) -> Result<OptResult> {
        let (argmax, value) = self.best.ok_or(Error::NoFiniteObjective)?;
        Ok(OptResult {
            argmax,
            value,
            evaluations: self.used,
            best_trace,
        })
    }
}

const SA_PROBES: usize = 50;
/// Sweeps over all coordinates between step-size adjustments.
const SA_ADJUST_CYCLES: usize = 20;
/// Share of the budget reserved for the Nelder–Mead polish.
const SA_POLISH_SHARE: f64 = 0.3;

/// Simulated annealing from a uniform random start, finished by a simplex
/// polish.
///
/// The objective is divided by the standard deviation of its values at 50
/// uniform probe points, so temperatures are on a scale-free footing. Moves
/// change one coordinate at a time by a uniform step in `±v_i`, reflected
/// into the box, and are accepted by the Metropolis rule; the temperature
/// falls geometrically after every proposal. Every 20 sweeps each `v_i` is
/// rescaled towards a 40-60% acceptance rate. The last 30% of the budget
/// runs Nelder–Mead from the best point seen, with the final step sizes as
/// the initial simplex.
pub fn sa_maximize<F: Fn(&[f64]) -> f64>(objective: F, search: &SearchBox, budget: &OptBudget) -> Result<OptResult> {
    sa_run(&objective, search, budget, budget.seed, 0)
}

fn sa_run<F: Fn(&[f64]) -> f64>(
    objective: &F,
    search: &SearchBox,
    budget: &OptBudget,
    seed: u64,
    stream: u64,
) -> Result<OptResult> {
    budget.validate(Method::Sa)?;
    let mut rng = rng_stream(seed, stream);
    let mut track = Tracker::new(objective);
    let dims = search.dims();

    let mut current = search.uniform_point(&mut rng);
    let mut f_current = track.eval(&current);

    let probes = SA_PROBES.min(budget.max_evaluations / 2);
    let finite: Vec<f64> = (0..probes)
        .map(|_| {
            let x = search.uniform_point(&mut rng);
            track.eval(&x)
        })
        .filter(|v| v.is_finite())
        .collect();
    let scale = spread(&finite).map_or(1.0, |s| 1.0 / s);

    let mut temperature = budget.initial_temperature;
    let mut trace = Vec::new();
    let mut steps: Vec<f64> = (0..dims).map(|i| 0.5 * search.width(i)).collect();
    let mut accepted = alloc::vec![0usize; dims];
    let mut cycles = 0usize;
    let mut proposal = current.clone();
    let anneal_budget = budget.max_evaluations - (budget.max_evaluations as f64 * SA_POLISH_SHARE) as usize;
    'outer: loop {
        for i in 0..dims {
            if track.used >= anneal_budget {
                break 'outer;
            }
            proposal.copy_from_slice(&current);
            proposal[i] = search.reflect(i, current[i] + steps[i] * (2.0 * rng.uniform() - 1.0));
            let f_new = track.eval(&proposal);
            let accept = f_new >= f_current
                || (f_new.is_finite() && rng.uniform() < ((f_new - f_current) * scale / temperature).exp());
            if accept {
                current.copy_from_slice(&proposal);
                f_current = f_new;
                accepted[i] += 1;
            }
            temperature *= budget.cooling_rate;
            trace.push(track.best_value());
        }
        cycles += 1;
        if cycles == SA_ADJUST_CYCLES {
            for i in 0..dims {
                let ratio = accepted[i] as f64 / cycles as f64;
                let factor = if ratio > 0.6 {
                    1.0 + 2.0 * (ratio - 0.6) / 0.4
                } else if ratio < 0.4 {
                    1.0 / (1.0 + 2.0 * (0.4 - ratio) / 0.4)
                } else {
                    1.0
                };
                steps[i] = (steps[i] * factor).min(search.width(i));
                accepted[i] = 0;
            }
            cycles = 0;
        }
    }
    if let Some((best, _)) = track.best.clone() {
        let scales: Vec<f64> = (0..dims).map(|i| steps[i].max(1e-3 * search.width(i))).collect();
        nelder_mead(&mut track, search, best, scales, budget.max_evaluations, &mut trace);
    }
    track.finish(trace)
}

/// Nelder–Mead polishing from `start` until the evaluation budget is spent.
/// Vertices are reflected into the box. When the simplex collapses it is
/// rebuilt around the best point with a tenth of the previous scale.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    track: &mut Tracker<'_, F>,
    search: &SearchBox,
    start: Vec<f64>,
    mut scales: Vec<f64>,
    max_evaluations: usize,
    trace: &mut Vec<f64>,
) {
    let dims = search.dims();
    let clip = |x: &mut [f64]| {
        for (i, v) in x.iter_mut().enumerate() {
            *v = search.reflect(i, *v);
        }
    };
    let mut centre = start;
    while track.used + dims + 1 <= max_evaluations {
        // Simplex of (point, value), sorted best first.
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dims + 1);
        let f_centre = track.eval(&centre);
        simplex.push((centre.clone(), f_centre));
        for i in 0..dims {
            let mut x = centre.clone();
            x[i] += if x[i] + scales[i] <= search.hi[i] { scales[i] } else { -scales[i] };
            clip(&mut x);
            let f = track.eval(&x);
            simplex.push((x, f));
        }
        loop {
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            trace.push(track.best_value());
            let size = (1..=dims)
                .map(|j| {
                    (0..dims)
                        .map(|i| ((simplex[j].0[i] - simplex[0].0[i]) / search.width(i)).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if size < 1e-12 || track.used + 2 > max_evaluations {
                break;
            }
            let mut mid = alloc::vec![0.0; dims];
            for (x, _) in &simplex[..dims] {
                for i in 0..dims {
                    mid[i] += x[i] / dims as f64;
                }
            }
            let worst = simplex[dims].clone();
            let along = |t: f64| {
                let mut x: Vec<f64> = (0..dims).map(|i| mid[i] + t * (worst.0[i] - mid[i])).collect();
                clip(&mut x);
                x
            };
            let xr = along(-1.0);
            let fr = track.eval(&xr);
            if fr > simplex[0].1 {
                let xe = along(-2.0);
                let fe = track.eval(&xe);
                simplex[dims] = if fe > fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr > simplex[dims - 1].1 {
                simplex[dims] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr > worst.1 {
                let x = along(-0.5);
                let f = track.eval(&x);
                (x, f)
            } else {
                let x = along(0.5);
                let f = track.eval(&x);
                (x, f)
            };
            if fc > worst.1.max(fr) {
                simplex[dims] = (xc, fc);
                continue;
            }
            if track.used + dims > max_evaluations {
                break;
            }
            let best = simplex[0].0.clone();
            for (x, f) in simplex.iter_mut().skip(1) {
                for i in 0..dims {
                    x[i] = best[i] + 0.5 * (x[i] - best[i]);
                }
                *f = track.eval(x);
            }
        }
        centre = track.best.as_ref().map(|b| b.0.clone()).unwrap_or(centre);
        scales.iter_mut().for_each(|s| *s *= 0.1);
        if scales.iter().enumerate().all(|(i, s)| *s < 1e-14 * search.width(i)) {
            scales = (0..dims).map(|i| 1e-3 * search.width(i)).collect();
        }
    }
    trace.push(track.best_value());
}

fn spread(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    (sd > 0.0 && sd.is_finite()).then_some(sd)
}

/// Summary of one `±1` random walk: prefix sums of each byte of random bits.
#[derive(Clone, Copy)]
struct ByteWalk {
    net: i8,
    min: i8,
    max: i8,
}

fn byte_walks() -> [ByteWalk; 256] {
    let mut table = [ByteWalk { net: 0, min: 0, max: 0 }; 256];
    for (b, entry) in table.iter_mut().enumerate() {
        let (mut s, mut lo, mut hi) = (0i8, i8::MAX, i8::MIN);
        for bit in 0..8 {
            s += if (b >> bit) & 1 == 1 { 1 } else { -1 };
            lo = lo.min(s);
            hi = hi.max(s);
        }
        *entry = ByteWalk { net: s, min: lo, max: hi };
    }
    table
}

/// Position at step `at` (1-based) of a fresh `±1` cumulative-sum walk of
/// `len` steps, min-max normalized onto `[c, d]`.
fn normalized_walk(rng: &mut RngStream, table: &[ByteWalk; 256], len: usize, at: usize, c: f64, d: f64) -> f64 {
    let (mut s, mut lo, mut hi) = (0i64, i64::MAX, i64::MIN);
    let mut at_value = 0i64;
    let mut done = 0usize;
    while done < len {
        let word = rng.bits64();
        let mut bytes = word.to_le_bytes().into_iter();
        while done < len {
            let Some(byte) = bytes.next() else { break };
            let take = (len - done).min(8);
            if take == 8 && !(done < at && at <= done + 8) {
                let w = table[byte as usize];
                lo = lo.min(s + w.min as i64);
                hi = hi.max(s + w.max as i64);
                s += w.net as i64;
            } else {
                for bit in 0..take {
                    s += if (byte >> bit) & 1 == 1 { 1 } else { -1 };
                    lo = lo.min(s);
                    hi = hi.max(s);
                    if done + bit + 1 == at {
                        at_value = s;
                    }
                }
            }
            done += take;
        }
    }
    if hi == lo {
        return 0.5 * (c + d);
    }
    c + (at_value - lo) as f64 * (d - c) / (hi - lo) as f64
}

/// Shrink ratio `I` for iteration `it` of `total`.
fn shrink_ratio(it: usize, total: usize) -> f64 {
    let frac = it as f64 / total as f64;
    let w = if frac > 0.95 {
        6.0
    } else if frac > 0.9 {
        5.0
    } else if frac > 0.75 {
        4.0
    } else if frac > 0.5 {
        3.0
    } else if frac > 0.1 {
        2.0
    } else {
        return 1.0;
    };
    (10f64.powf(w) * frac).max(1.0)
}

/// Ant lion optimizer.
///
/// Antlions are initialized uniformly. Each generation, every ant performs
/// two random walks (around a rank-roulette-selected antlion and around the
/// elite) whose range shrinks with the iteration count, and takes their
/// average. Ants that beat antlions replace them; the best antlion is the
/// elite. Evaluations: `population` initially plus `population` per
/// generation.
pub fn alo_maximize<F: Fn(&[f64]) -> f64>(objective: F, search: &SearchBox, budget: &OptBudget) -> Result<OptResult> {
    alo_run(&objective, search, budget, budget.seed, 0)
}

fn alo_run<F: Fn(&[f64]) -> f64>(
    objective: &F,
    search: &SearchBox,
    budget: &OptBudget,
    seed: u64,
    stream: u64,
) -> Result<OptResult> {
    budget.validate(Method::Alo)?;
    let mut rng = rng_stream(seed, stream);
    let mut track = Tracker::new(objective);
    let n = budget.population;
    let dims = search.dims();
    let generations = budget.max_evaluations / n - 1;
    let table = byte_walks();

    let mut antlions: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| {
            let x = search.uniform_point(&mut rng);
            let v = track.eval(&x);
            (x, v)
        })
        .collect();
    sort_desc(&mut antlions);
    let mut elite = antlions[0].clone();
    let mut trace = alloc::vec![elite.1];

    // Rank roulette: weight n for the best antlion down to 1 for the worst.
    let total_weight = (n * (n + 1) / 2) as f64;
    for it in 1..=generations {
        let ratio = shrink_ratio(it, generations);
        let mut ants = Vec::with_capacity(n);
        for _ in 0..n {
            let pick = {
                let mut u = rng.uniform() * total_weight;
                let mut j = 0;
                while j + 1 < n && u >= (n - j) as f64 {
                    u -= (n - j) as f64;
                    j += 1;
                }
                j
            };
            let ant: Vec<f64> = (0..dims)
                .map(|i| {
                    let half = 0.5 * search.width(i) / ratio;
                    let around = |rng: &mut RngStream, centre: f64| {
                        normalized_walk(rng, &table, generations, it, centre - half, centre + half)
                    };
                    let ra = around(&mut rng, antlions[pick].0[i]);
                    let re = around(&mut rng, elite.0[i]);
                    search.reflect(i, 0.5 * (ra + re))
                })
                .collect();
            let v = track.eval(&ant);
            ants.push((ant, v));
        }
        antlions.extend(ants);
        sort_desc(&mut antlions);
        antlions.truncate(n);
        if antlions[0].1 > elite.1 {
            elite = antlions[0].clone();
        }
        trace.push(elite.1);
    }
    track.finish(trace)
}

fn sort_desc(pop: &mut [(Vec<f64>, f64)]) {
    pop.sort_by(|a, b| b.1.total_cmp(&a.1));
}

/// Result of [`replicate_average`].
#[derive(Debug, Clone, PartialEq)]
pub struct Replicated {
    /// Per-dimension mean of the replicate argmaxes.
    pub mean: Vec<f64>,
    pub runs: Vec<OptResult>,
}

/// Runs `n_replications` independent optimizations (replication `r` draws
/// from stream `r` of `budget.seed`) and averages their argmaxes.
pub fn replicate_average<F: Fn(&[f64]) -> f64 + Sync>(
    method: Method,
    objective: F,
    search: &SearchBox,
    budget: &OptBudget,
    n_replications: usize,
) -> Result<Replicated> {
    if n_replications == 0 {
        return Err(Error::invalid("n_replications", 0.0, "must be at least 1"));
    }
    budget.validate(method)?;
    let runs: Vec<OptResult> = map_indices(n_replications, |r| match method {
        Method::Sa => sa_run(&objective, search, budget, budget.seed, r as u64),
        Method::Alo => alo_run(&objective, search, budget, budget.seed, r as u64),
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut mean = alloc::vec![0.0; search.dims()];
    for run in &runs {
        for (m, x) in mean.iter_mut().zip(&run.argmax) {
            *m += x;
        }
    }
    let count = runs.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    Ok(Replicated { mean, runs })
}

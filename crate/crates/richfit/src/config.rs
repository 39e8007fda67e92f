//! Run configuration: a TOML file with dotted keys, overlaid by CLI flags.
//!
//! Every section has defaults that reproduce the reference simulation study
//! (q = 2, k = 0.5, η = 0.2, x0 = 2, σ = 0.01, power-form perturbation with
//! m = 1 switching at p = 0.5, 25 paths on 0, 0.1, …, 10). A file only needs
//! the keys it changes:
//!
//! ```toml
//! model.sigma = 0.02
//! simulate.seed = 7
//! fit.p = [0.3, 0.5, 0.7]
//! ```

use std::path::{Path, PathBuf};

use richfit_core::diffusion::{DiffusionParams, InitialLaw};
use richfit_core::growth::{Perturbation, RichardsParams};
use richfit_core::inference::{FptBoundary, FptConfig, PChoice, ProcedureConfig};
use richfit_core::optimize::{Method, OptBudget};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::Layout;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub perturbation: PerturbationSection,
    pub grid: GridSection,
    pub simulate: SimulateSection,
    pub fit: FitSection,
    pub fpt: FptSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub q: f64,
    pub k: f64,
    pub eta: f64,
    pub t0: f64,
    pub x0: f64,
    pub sigma: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            q: 2.0,
            k: 0.5,
            eta: 0.2,
            t0: 0.0,
            x0: 2.0,
            sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKindName {
    None,
    PowerForm,
    SigmoidForm,
}

/// The switching time is `t_star` when given, otherwise the first crossing
/// of `(1 + p) x(t_I)` by the classical curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSection {
    pub kind: PerturbationKindName,
    pub m: f64,
    pub y: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub t_star: Option<f64>,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            kind: PerturbationKindName::PowerForm,
            m: 1.0,
            y: 1.0,
            alpha: 1.0,
            beta: 1.0,
            p: 0.5,
            t_star: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            start: 0.0,
            end: 10.0,
            step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub paths: usize,
    pub seed: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { paths: 25, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub input: Option<PathBuf>,
    pub layout: Layout,
    /// Keep every `subsample`-th observation before fitting.
    pub subsample: usize,
    /// One value fixes `p`; several are swept as candidates.
    pub p: Vec<f64>,
    pub method: Method,
    pub replications: usize,
    pub budget: usize,
    pub population: usize,
    pub seed: u64,
    pub window_end: Option<f64>,
    /// Also estimate the switching time as a mean first-passage time.
    pub fpt: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            input: None,
            layout: Layout::Wide,
            subsample: 1,
            p: vec![0.5],
            method: Method::Sa,
            replications: 30,
            budget: 20_000,
            population: 30,
            seed: 0,
            window_end: None,
            fpt: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    EstimatedCurve,
    Observed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FptSection {
    /// Fit report whose estimates replace the model section.
    pub report: Option<PathBuf>,
    pub p: f64,
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub nodes: usize,
    pub boundary: BoundaryMode,
    /// Observed inflection value for the `observed` boundary. Taken from the
    /// report when absent.
    pub x_inflection: Option<f64>,
    /// Print the closed-form switching time and skip the distribution.
    pub deterministic: bool,
}

impl Default for FptSection {
    fn default() -> Self {
        Self {
            report: None,
            p: 0.5,
            paths: 100_000,
            dt: 0.005,
            horizon: 20.0,
            seed: 0,
            nodes: 800,
            boundary: BoundaryMode::EstimatedCurve,
            x_inflection: None,
            deterministic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Layout of emitted path files.
    pub layout: Layout,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            layout: Layout::Wide,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replications: Option<usize>,
    pub method: Option<Method>,
    pub p: Option<Vec<f64>>,
    pub window_end: Option<f64>,
    pub layout: Option<Layout>,
    pub input: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub deterministic: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies command-line overrides. `--seed` sets every seed, `--p` sets
    /// the fit candidates and the first-passage fraction, and `--layout`
    /// applies to both reading and writing paths.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.simulate.seed = seed;
            self.fit.seed = seed;
            self.fpt.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(n) = o.replications {
            self.fit.replications = n;
        }
        if let Some(m) = o.method {
            self.fit.method = m;
        }
        if let Some(p) = &o.p {
            self.fit.p = p.clone();
            if let Some(&first) = p.first() {
                self.fpt.p = first;
                self.perturbation.p = first;
            }
        }
        if let Some(t) = o.window_end {
            self.fit.window_end = Some(t);
        }
        if let Some(layout) = o.layout {
            self.fit.layout = layout;
            self.output.layout = layout;
        }
        if let Some(input) = &o.input {
            self.fit.input = Some(input.clone());
        }
        if let Some(report) = &o.report {
            self.fpt.report = Some(report.clone());
        }
        if o.deterministic {
            self.fpt.deterministic = true;
        }
    }

    pub fn richards(&self) -> Result<RichardsParams, CliError> {
        let m = &self.model;
        Ok(RichardsParams::new(m.q, m.k, m.eta, m.t0, m.x0)?)
    }

    pub fn perturbation(&self) -> Result<Perturbation, CliError> {
        let s = &self.perturbation;
        let t_star = || -> Result<f64, CliError> {
            match s.t_star {
                Some(t) => Ok(t),
                None => Ok(self.richards()?.switch_time(s.p)?),
            }
        };
        Ok(match s.kind {
            PerturbationKindName::None => Perturbation::none(),
            PerturbationKindName::PowerForm => Perturbation::power_form(s.m, t_star()?)?,
            PerturbationKindName::SigmoidForm => Perturbation::sigmoid_form(s.y, s.alpha, s.beta, t_star()?)?,
        })
    }

    pub fn diffusion(&self) -> Result<DiffusionParams, CliError> {
        Ok(DiffusionParams::new(self.richards()?, self.model.sigma, self.perturbation()?)?)
    }

    pub fn initial_law(&self) -> Result<InitialLaw, CliError> {
        Ok(InitialLaw::degenerate(self.model.x0)?)
    }

    /// `start + j·step` for `j = 0, …, round((end − start)/step)`.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.grid;
        if !(g.step > 0.0 && g.step.is_finite() && g.start.is_finite() && g.end > g.start) {
            return Err(CliError::Validation(format!(
                "grid needs start < end and a positive step (got start {}, end {}, step {})",
                g.start, g.end, g.step
            )));
        }
        if g.start < self.model.t0 {
            return Err(CliError::Validation(format!(
                "grid.start = {} precedes model.t0 = {}",
                g.start, self.model.t0
            )));
        }
        let n = ((g.end - g.start) / g.step).round() as usize;
        Ok((0..=n).map(|j| g.start + j as f64 * g.step).collect())
    }

    pub fn p_choice(&self) -> Result<PChoice, CliError> {
        let p = &self.fit.p;
        if let Some(bad) = p.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(CliError::Validation(format!("fit.p entries must be positive (got {bad})")));
        }
        match p.as_slice() {
            [] => Err(CliError::Validation("fit.p is empty".into())),
            [one] => Ok(PChoice::Known(*one)),
            many => Ok(PChoice::Candidates(many.to_vec())),
        }
    }

    pub fn fpt_config(&self) -> Result<FptConfig, CliError> {
        let f = &self.fpt;
        if f.paths < 2 || !(f.dt > 0.0) || !(f.horizon > 0.0) {
            return Err(CliError::Validation(format!(
                "fpt needs paths >= 2, dt > 0 and horizon > 0 (got {}, {}, {})",
                f.paths, f.dt, f.horizon
            )));
        }
        let boundary = match (f.boundary, f.x_inflection) {
            (BoundaryMode::EstimatedCurve, _) => FptBoundary::EstimatedCurve,
            (BoundaryMode::Observed, Some(x)) => FptBoundary::Observed { x_inflection: x },
            (BoundaryMode::Observed, None) => FptBoundary::ObservedData,
        };
        Ok(FptConfig {
            n_paths: f.paths,
            dt: f.dt,
            horizon: f.horizon,
            seed: f.seed,
            boundary,
        })
    }

    pub fn procedure(&self) -> Result<ProcedureConfig, CliError> {
        let f = &self.fit;
        if f.replications == 0 {
            return Err(CliError::Validation("fit.replications must be at least 1".into()));
        }
        if f.subsample == 0 {
            return Err(CliError::Validation("fit.subsample must be at least 1".into()));
        }
        if f.budget < 2 || (f.method == Method::Alo && (f.population < 2 || f.budget < f.population)) {
            return Err(CliError::Validation(format!(
                "fit.budget = {} and fit.population = {} do not form a valid optimizer budget",
                f.budget, f.population
            )));
        }
        let budget = OptBudget {
            max_evaluations: f.budget,
            population: f.population,
            seed: f.seed,
            ..OptBudget::default()
        };
        Ok(ProcedureConfig {
            method: f.method,
            budget,
            n_replications: f.replications,
            fpt: if f.fpt { Some(self.fpt_config()?) } else { None },
            window_end: f.window_end,
        })
    }
}

//! JSON documents written by the commands.

use richfit_core::diffusion::{DiffusionParams, InitialLaw};
use richfit_core::fpt::FptSummary;
use richfit_core::growth::Perturbation;
use richfit_core::inference::{BoundsBox, FitReport, ProcedureOutcome};
use richfit_core::optimize::Method;
use serde::{Deserialize, Serialize};

use crate::io::{Layout, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub schema_version: u32,
    pub params: DiffusionParams,
    pub initial: InitialLaw,
    pub seed: u64,
    pub n_paths: usize,
    pub grid: GridSpec,
    pub layout: Layout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialEstimates {
    pub mu: f64,
    pub sigma_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub p: f64,
    pub rae_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub input: String,
    pub subsample: usize,
    pub method: Method,
    pub replications: usize,
    pub budget: usize,
    pub seed: u64,
}

/// The fit report. `mle` is the classical-model estimate; `c_hat` the
/// tabulated perturbation estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReportFile {
    pub schema_version: u32,
    pub settings: FitSettings,
    pub p: f64,
    pub mle: DiffusionParams,
    pub init_mle: InitialEstimates,
    pub bounds: BoundsBox,
    pub window_end: f64,
    pub t_star_deterministic: f64,
    pub t_star_fpt: Option<FptSummary>,
    pub rae_mean: f64,
    pub c_hat: Perturbation,
    pub candidates: Vec<CandidateScore>,
    pub replication_trace: Vec<[f64; 4]>,
    pub warnings: Vec<String>,
}

impl FitReportFile {
    pub fn new(settings: FitSettings, outcome: &ProcedureOutcome) -> Self {
        let r: &FitReport = &outcome.selected;
        Self {
            schema_version: SCHEMA_VERSION,
            settings,
            p: r.p,
            mle: r.mle.clone(),
            init_mle: InitialEstimates {
                mu: r.init_mle.0,
                sigma_sq: r.init_mle.1,
            },
            bounds: r.bounds,
            window_end: r.window_end,
            t_star_deterministic: r.t_star_det,
            t_star_fpt: r.t_star_fpt,
            rae_mean: r.rae_mean,
            c_hat: r.c_hat.clone(),
            candidates: outcome
                .candidates
                .iter()
                .map(|&(p, rae_mean)| CandidateScore { p, rae_mean })
                .collect(),
            replication_trace: r.replication_trace.clone(),
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Largest gap between the two densities.
    pub sup_distance: f64,
    /// `sup_distance` over the Monte-Carlo peak.
    pub relative_to_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptReportFile {
    pub schema_version: u32,
    pub params: DiffusionParams,
    pub p: f64,
    pub boundary: f64,
    pub t_star_deterministic: f64,
    pub monte_carlo: FptSummary,
    pub integral_equation: FptSummary,
    pub agreement: Agreement,
    pub n_paths: usize,
    pub dt: f64,
    pub nodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDiagnostics {
    pub schema_version: u32,
    pub params: DiffusionParams,
    pub t_inflection: f64,
    pub x_at_inflection: f64,
    pub mu: f64,
    pub lambda: f64,
    pub carrying_capacity: f64,
    pub modified_carrying_capacity: f64,
    /// Switching time of the configured perturbation, or of `p` when there
    /// is none.
    pub t_star: f64,
}

//! The four subcommands. Each validates the whole configuration before it
//! computes anything and returns the files it wrote.

use std::fmt::Write as _;
use std::path::PathBuf;

use richfit_core::diffusion::{simulate_paths, DiffusionParams, InitialLaw};
use richfit_core::fpt::{fpt_integral_equation, fpt_monte_carlo, fpt_summary};
use richfit_core::growth::{evaluate_modified, modified_carrying_capacity, perturbation_value};
use richfit_core::inference::run_procedure1;

use crate::config::{BoundaryMode, RunConfig};
use crate::error::CliError;
use crate::io::{fmt_f64, ingest_csv, read_json, write_json, write_paths_csv, write_table, write_text, SCHEMA_VERSION};
use crate::report::{Agreement, CurveDiagnostics, FitReportFile, FitSettings, FptReportFile, GridSpec, SimulationMeta};

/// What a command produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Text for standard output.
    pub message: String,
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.dir.join(name)
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.diffusion()?;
    let init = cfg.initial_law()?;
    let grid = cfg.grid()?;
    if cfg.simulate.paths == 0 {
        return Err(CliError::Validation("simulate.paths must be at least 1".into()));
    }
    let data = simulate_paths(&params, &init, &grid, cfg.simulate.paths, cfg.simulate.seed)?;

    let paths_file = out_path(cfg, "paths.csv");
    let meta_file = out_path(cfg, "simulation.json");
    write_paths_csv(&paths_file, &data, cfg.output.layout)?;
    let meta = SimulationMeta {
        schema_version: SCHEMA_VERSION,
        params,
        initial: init,
        seed: cfg.simulate.seed,
        n_paths: cfg.simulate.paths,
        grid: GridSpec {
            start: cfg.grid.start,
            end: cfg.grid.end,
            step: cfg.grid.step,
            points: grid.len(),
        },
        layout: cfg.output.layout,
    };
    write_json(&meta_file, &meta)?;
    Ok(Outcome {
        message: format!(
            "simulated {} paths on {} times (seed {})\n",
            cfg.simulate.paths,
            grid.len(),
            cfg.simulate.seed
        ),
        files: vec![paths_file, meta_file],
    })
}

pub fn fit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let input = cfg
        .fit
        .input
        .clone()
        .ok_or_else(|| CliError::Validation("fit needs an input file (--input or fit.input)".into()))?;
    let procedure = cfg.procedure()?;
    let p = cfg.p_choice()?;
    let mut data = ingest_csv(&input, cfg.fit.layout)?;
    if cfg.fit.subsample > 1 {
        data = data.subsample(cfg.fit.subsample)?;
    }
    let outcome = run_procedure1(&data, &p, &procedure)?;
    let rep = &outcome.selected;

    let settings = FitSettings {
        input: input.display().to_string(),
        subsample: cfg.fit.subsample,
        method: cfg.fit.method,
        replications: cfg.fit.replications,
        budget: cfg.fit.budget,
        seed: cfg.fit.seed,
    };
    let report = FitReportFile::new(settings, &outcome);
    let report_file = out_path(cfg, "fit_report.json");
    write_json(&report_file, &report)?;

    let c_file = out_path(cfg, "c_hat.csv");
    let r = rep.mle.richards();
    let (grid, mean) = data.sample_mean()?;
    let c_rows = grid
        .iter()
        .filter(|&&t| t >= rep.t_star_det)
        .map(|&t| vec![t, perturbation_value(&rep.c_hat, r, t)]);
    write_table(&c_file, &["time", "c_hat"], c_rows)?;

    let mean_file = out_path(cfg, "mean_fit.csv");
    let mean_rows = rep.fitted_mean.iter().zip(&mean).map(|(&(t, fitted), &m)| vec![t, m, fitted]);
    write_table(&mean_file, &["time", "sample_mean", "fitted_mean"], mean_rows)?;

    let summary = fit_summary(&report);
    let summary_file = out_path(cfg, "fit_summary.txt");
    write_text(&summary_file, &summary)?;
    Ok(Outcome {
        files: vec![report_file, c_file, mean_file, summary_file],
        message: summary,
    })
}

fn fit_summary(rep: &FitReportFile) -> String {
    let r = rep.mle.richards();
    let mut s = String::new();
    let _ = writeln!(s, "p                 {}", rep.p);
    let _ = writeln!(s, "q                 {:.6}", r.q());
    let _ = writeln!(s, "k                 {:.6}", r.k());
    let _ = writeln!(s, "eta               {:.6}", r.eta());
    let _ = writeln!(s, "sigma             {:.6}", rep.mle.sigma());
    let _ = writeln!(s, "initial (mu, s2)  ({:.6}, {:.3e})", rep.init_mle.mu, rep.init_mle.sigma_sq);
    let _ = writeln!(s, "window end        {}", rep.window_end);
    let _ = writeln!(s, "t* (closed form)  {:.5}", rep.t_star_deterministic);
    if let Some(f) = &rep.t_star_fpt {
        let _ = writeln!(s, "t* (FPT mean)     {:.5} (sd {:.5}, mode {:.5})", f.mean, f.std_dev, f.mode);
    }
    let _ = writeln!(s, "mean RAE          {:.6}", rep.rae_mean);
    if rep.candidates.len() > 1 {
        let _ = writeln!(s, "candidates:");
        for c in &rep.candidates {
            let _ = writeln!(s, "  p = {:<6} RAE = {:.6}", c.p, c.rae_mean);
        }
    }
    for w in &rep.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Parameters and observed inflection for the first-passage command.
fn fpt_inputs(cfg: &RunConfig) -> Result<(DiffusionParams, Option<f64>), CliError> {
    match &cfg.fpt.report {
        Some(path) => {
            let report: FitReportFile = read_json(path)?;
            if report.schema_version != SCHEMA_VERSION {
                return Err(CliError::Validation(format!(
                    "{}: schema version {} is not supported (expected {SCHEMA_VERSION})",
                    path.display(),
                    report.schema_version
                )));
            }
            Ok((report.mle, Some(report.bounds.provenance.x_inflection)))
        }
        None => Ok((cfg.diffusion()?, None)),
    }
}

pub fn fpt(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (params, observed) = fpt_inputs(cfg)?;
    let f = &cfg.fpt;
    let r = *params.richards();
    let t_star = r.switch_time(f.p)?;
    if f.deterministic {
        return Ok(Outcome {
            files: Vec::new(),
            message: format!("{}\n", fmt_f64(t_star)),
        });
    }
    let x_inflection = match f.boundary {
        BoundaryMode::EstimatedCurve => r.tangent_summary().x_at_inflection,
        BoundaryMode::Observed => f.x_inflection.or(observed).ok_or_else(|| {
            CliError::Validation("the observed boundary needs fpt.x_inflection or a fit report".into())
        })?,
    };
    let boundary = (1.0 + f.p) * x_inflection;
    let fc = cfg.fpt_config()?;
    if f.nodes < 8 {
        return Err(CliError::Validation(format!("fpt.nodes = {} is below 8", f.nodes)));
    }
    let horizon = r.t0() + f.horizon;
    let init = InitialLaw::degenerate(r.x0())?;
    let mc = fpt_monte_carlo(&params, &init, boundary, horizon, fc.n_paths, fc.dt, fc.seed)?;
    let ie = fpt_integral_equation(&params, r.x0(), boundary, horizon, f.nodes)?;
    let sup = mc.sup_distance(&ie);
    let report = FptReportFile {
        schema_version: SCHEMA_VERSION,
        params,
        p: f.p,
        boundary,
        t_star_deterministic: t_star,
        monte_carlo: fpt_summary(&mc)?,
        integral_equation: fpt_summary(&ie)?,
        agreement: Agreement {
            sup_distance: sup,
            relative_to_peak: sup / mc.peak(),
        },
        n_paths: fc.n_paths,
        dt: fc.dt,
        nodes: f.nodes,
        seed: fc.seed,
    };
    let mc_file = out_path(cfg, "fpt_monte_carlo.csv");
    let ie_file = out_path(cfg, "fpt_integral_equation.csv");
    let json_file = out_path(cfg, "fpt_summary.json");
    let rows = |d: &richfit_core::fpt::FptDensity| d.grid.iter().zip(&d.density).map(|(&t, &g)| vec![t, g]).collect::<Vec<_>>();
    write_table(&mc_file, &["time", "density"], rows(&mc))?;
    write_table(&ie_file, &["time", "density"], rows(&ie))?;
    write_json(&json_file, &report)?;
    let (m, s) = (&report.monte_carlo, &report.integral_equation);
    let message = format!(
        "boundary {boundary:.6}\n\
         Monte Carlo        mean {:.5}  sd {:.5}  mode {:.5}\n\
         integral equation  mean {:.5}  sd {:.5}  mode {:.5}\n\
         sup distance / peak {:.4}\n",
        m.mean, m.std_dev, m.mode, s.mean, s.std_dev, s.mode, report.agreement.relative_to_peak
    );
    Ok(Outcome {
        files: vec![mc_file, ie_file, json_file],
        message,
    })
}

pub fn curve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.diffusion()?;
    let grid = cfg.grid()?;
    let r = *params.richards();
    let c = params.perturbation().clone();
    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        let h = r.growth_rate(t);
        let h_mod = (r.q() + perturbation_value(&c, &r, t)) * r.kernel(t);
        rows.push(vec![t, r.evaluate(t)?, evaluate_modified(&r, &c, t)?, h, h_mod]);
    }
    let s = r.tangent_summary();
    let t_star = if c.is_none() {
        r.switch_time(cfg.perturbation.p)?
    } else {
        c.t_star()
    };
    let diag = CurveDiagnostics {
        schema_version: SCHEMA_VERSION,
        t_inflection: s.t_inflection,
        x_at_inflection: s.x_at_inflection,
        mu: s.mu,
        lambda: s.lambda_lag,
        carrying_capacity: r.carrying_capacity(),
        modified_carrying_capacity: modified_carrying_capacity(&r, &c)?,
        t_star,
        params,
    };
    let csv_file = out_path(cfg, "curve.csv");
    let json_file = out_path(cfg, "curve.json");
    write_table(&csv_file, &["time", "x", "x_tilde", "h", "h_tilde"], rows)?;
    write_json(&json_file, &diag)?;
    Ok(Outcome {
        files: vec![csv_file, json_file],
        message: format!(
            "t_I = {:.5}  x(t_I) = {:.5}  mu = {:.4}  lambda = {:.4}  K = {:.4}  K~ = {:.4}  t* = {:.6}\n",
            diag.t_inflection,
            diag.x_at_inflection,
            diag.mu,
            diag.lambda,
            diag.carrying_capacity,
            diag.modified_carrying_capacity,
            diag.t_star
        ),
    })
}

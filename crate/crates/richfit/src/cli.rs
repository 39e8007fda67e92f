use std::path::PathBuf;

use clap::{Parser, Subcommand};
use richfit_core::optimize::Method;

use crate::commands::{self, Outcome};
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;
use crate::io::Layout;

#[derive(Debug, Parser)]
#[command(name = "richfit", version, about = "Simulate, fit and analyse perturbed Richards growth diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration file (dotted keys such as `model.q = 2`).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for simulation, optimizers and Monte Carlo.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Optimizer replications per fit.
    #[arg(long, global = true, value_name = "N")]
    pub replications: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// Threshold fraction, or a comma-separated candidate list.
    #[arg(long, global = true, value_name = "VALUE|LIST", value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// End of the Step-1 fitting window.
    #[arg(long, global = true, value_name = "TIME")]
    pub window_end: Option<f64>,
    /// Path table layout for reading and writing.
    #[arg(long, global = true, value_enum)]
    pub layout: Option<Layout>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Sa,
    Alo,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate sample paths of the perturbed diffusion.
    Simulate,
    /// Run the three-step estimation on a path table.
    Fit {
        /// Path table to fit.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// First-passage-time distribution through the switching boundary.
    Fpt {
        /// Fit report whose estimates are used instead of the model section.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        /// Print the closed-form switching time only.
        #[arg(long)]
        deterministic: bool,
    },
    /// Tabulate the classical and perturbed curves with diagnostics.
    Curve,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            replications: self.replications,
            method: self.method.map(|m| match m {
                MethodArg::Sa => Method::Sa,
                MethodArg::Alo => Method::Alo,
            }),
            p: self.p.clone(),
            window_end: self.window_end,
            layout: self.layout,
            ..Overrides::default()
        };
        match &self.command {
            Command::Fit { input } => o.input = input.clone(),
            Command::Fpt { report, deterministic } => {
                o.report = report.clone();
                o.deterministic = *deterministic;
            }
            Command::Simulate | Command::Curve => {}
        }
        o
    }

    /// The configuration after the file and flags are merged.
    pub fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

/// Runs the parsed command.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = cli.config()?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Fit { .. } => commands::fit(&cfg),
        Command::Fpt { .. } => commands::fpt(&cfg),
        Command::Curve => commands::curve(&cfg),
    }
}

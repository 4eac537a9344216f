use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::sampler::ProposalMode;

#[derive(Debug, Parser)]
#[command(name = "biathlon-bayes", version, about = "Bayesian analysis of biathlon shooting accuracy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a sessions CSV.
    Ingest(IngestArgs),
    /// Accuracy tables, favorite formats, stage deviations, correlations and clusters.
    Explore(ExploreArgs),
    /// Run the MCMC chains and write the draws file.
    Fit(FitArgs),
    /// Convergence diagnostics for a fit.
    Diagnose(DiagnoseArgs),
    /// Odds-ratio summaries and posterior predictive checks.
    Predict(PredictArgs),
    /// Correctness oracles.
    Validate {
        #[command(subcommand)]
        check: ValidateCommand,
    },
    /// Write a synthetic season and its generating parameters.
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand)]
pub enum ValidateCommand {
    /// Sampler against grid quadrature on the one-parameter model.
    Oracle(OracleArgs),
    /// Analytic gradient against central differences.
    Gradcheck(GradcheckArgs),
    /// Simulation-based calibration at reduced scale.
    Sbc(SbcArgs),
}

/// Flags shared by every subcommand. `--config` names a JSON file with the
/// same keys as the long flags (underscores for dashes); flags win. A
/// `manifest.json` from an earlier run is accepted too.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct Common {
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Sessions CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct ExploreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Published accuracy table; replaces the summary computed from `--data`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// `athlete,final_rank` file for the Spearman correlations.
    #[arg(long)]
    pub ranks: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Z-score features before clustering.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct SamplerArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Iterations per chain after burn-in (before thinning).
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Adaptation window; defaults to the burn-in length.
    #[arg(long)]
    pub adapt: Option<usize>,
    /// `random_walk` or `gradient_assisted`.
    #[arg(long)]
    pub proposal: Option<ProposalMode>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DrawsFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
    /// Scale of the half-normal prior on each standard deviation.
    #[arg(long)]
    pub sigma_scale: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<DrawsFormat>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Output directory of `fit`.
    #[arg(long)]
    pub fit: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Predictive replicates; defaults to every retained draw.
    #[arg(long)]
    pub n_rep: Option<usize>,
    /// Athletes for cumulative paths (repeatable); defaults to all.
    #[arg(long)]
    #[serde(default)]
    pub athlete: Vec<String>,
    /// Sessions CSV of races to forecast (hit column ignored).
    #[arg(long)]
    pub future_schedule: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub athletes: Option<usize>,
    #[arg(long)]
    pub stages: Option<usize>,
    /// Probability of starting each race.
    #[arg(long)]
    pub participation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct GradcheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Random points per shape.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct SbcArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub athletes: Option<usize>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
}

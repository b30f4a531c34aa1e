// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hmfg", version, about = "Linear-quadratic mean field games with common noise")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Model file; overrides the one named in the config.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Output directory; overrides the config and HMFG_OUTPUT_DIR.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Number of time steps; overrides grid.n_steps.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model file checks.
    #[command(subcommand)]
    Model(ModelCommand),

    /// Matrix Riccati solves.
    #[command(subcommand)]
    Riccati(RiccatiCommand),

    /// Consistency, residual and N-player experiments.
    #[command(subcommand)]
    Mfg(MfgCommand),

    /// Collate a run directory into summary.md.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    Validate,
}

#[derive(Debug, Subcommand)]
pub enum RiccatiCommand {
    Solve {
        #[arg(long, value_enum)]
        kind: RiccatiKindArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RiccatiKindArg {
    Pi,
    Eta,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Picard,
    Decoupled,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Picard => "picard",
            Method::Decoupled => "decoupled",
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Defaults to decoupled for det-diff models, Picard otherwise.
    #[arg(long, value_enum)]
    pub method: Option<Method>,

    /// Run Picard even when the contraction certificate fails.
    #[arg(long)]
    pub allow_uncertified: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub solve: SolveArgs,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub n_mc: Option<usize>,

    /// Comma-separated population sizes.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,

    /// equilibrium, zero or scaled:<factor>.
    #[arg(long)]
    pub deviation: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    AvgError,
    EpsNash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NashModeArg {
    LimitGap,
    Defect,
}

#[derive(Debug, Subcommand)]
pub enum MfgCommand {
    Certify,
    Solve(SolveArgs),
    Residual(SolveArgs),
    Simulate(SimulateArgs),
    Rates {
        #[arg(long, value_enum)]
        experiment: Experiment,

        /// Only for eps-nash.
        #[arg(long, value_enum, default_value = "limit-gap")]
        mode: NashModeArg,

        #[command(flatten)]
        sim: SimulateArgs,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory; defaults to the configured output directory.
    pub run_dir: Option<PathBuf>,

    /// Write SVG plots next to the summary.
    #[arg(long)]
    pub plots: bool,
}

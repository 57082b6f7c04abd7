//! `spec`: model validation, theory curves, outliers, thresholds, sampling,
//! empirical spectra and end-to-end figure reproduction.
//!
//! Exit codes: 0 success, 1 computational failure (or failed acceptance check
//! in `reproduce-figure`), 2 usage error or invalid model.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "spec", version, about = "Spectra of random graphs with communities and arbitrary degrees")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Random seed for sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 picks the default.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Format of tabular output. Reports are always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; stdout if omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect a model file.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Sample a graph from a model file.
    Sample {
        model: PathBuf,
        /// Override the vertex count of the model file.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Asymptotic spectrum of a model.
    #[command(subcommand)]
    Theory(TheoryCmd),
    /// Closed-form special cases.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Spectra of sampled graphs.
    #[command(subcommand)]
    Empirical(EmpiricalCmd),
    /// Sample, diagonalize and compare with the theory.
    Compare {
        #[command(flatten)]
        args: CompareArgs,
        /// Also write the histogram against the theory curve as CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Write every artifact of the figure and check it against the theory.
    ReproduceFigure {
        #[command(flatten)]
        args: CompareArgs,
        #[arg(long, default_value = "figure")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ModelCmd {
    /// Print n, q, c, 2m and the alphas.
    Describe { model: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum TheoryCmd {
    /// Spectral density on a grid (columns x,rho).
    Density {
        model: PathBuf,
        /// Defaults to the lower end of the band search window.
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        /// Defaults to the upper end of the band search window.
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        /// Broadening; defaults to 1e-4 times the grid width.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Band intervals.
    Band { model: PathBuf },
    /// g_max and the outlying eigenvalues.
    Outliers { model: PathBuf },
    /// Detectability threshold of a two-community model, or a theta sweep
    /// (columns theta,alpha2,visible).
    Threshold {
        model: PathBuf,
        /// `lo:hi:steps`.
        #[arg(long)]
        sweep: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Semicircle,
    TwoValue,
}

#[derive(Debug, Subcommand)]
pub enum OracleCmd {
    /// The constants x, y and the threshold coefficient.
    Constants,
    /// Closed-form density on a grid (columns x,rho).
    Density {
        #[arg(long, value_enum)]
        kind: OracleKind,
        /// Mean degree of the semicircle.
        #[arg(long, default_value_t = 100.0)]
        c: f64,
        /// Smaller degree of the two-value family; the other is twice this.
        #[arg(long, default_value_t = 60.0)]
        kappa: f64,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum EmpiricalCmd {
    /// Eigenvalues of a graph file (columns index,eigenvalue).
    Eig {
        graph: PathBuf,
        /// `full` or `topk:K`.
        #[arg(long, default_value = "full")]
        mode: String,
    },
    /// Spectral community recovery against the planted labels.
    Detect {
        graph: PathBuf,
        #[arg(long, default_value_t = 2)]
        q: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub model: PathBuf,
    /// Vertex count; defaults to the model file's.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    spectra_core::exec::init_thread_pool(cli.global.threads);
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

//! `widefe`: extract hierarchical features, recommend feature sets, run the
//! PCA baseline and compare runs.

mod artifacts;
mod commands;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use widefe_core::eval::Metric;
use widefe_core::recommend::RecommendConfig;

#[derive(Parser)]
#[command(name = "widefe", version, about = "Hierarchical feature extraction and recommendation for labeled signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Run configuration (JSON); flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; each run gets its own subdirectory.
    #[arg(long, env = "WIDEFE_OUT", default_value = "runs")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flag overrides applied on top of the config file.
#[derive(Args, Default)]
pub struct Overrides {
    /// Target for the chosen metric on every fold's eval rows.
    #[arg(long)]
    tau: Option<f64>,
    /// Number of folds p.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated k schedule, e.g. 5,10,15.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    metric: Option<Metric>,
    /// Highest feature level to build (0, 1 or 2).
    #[arg(long)]
    max_level: Option<u8>,
}

impl Overrides {
    fn apply(&self, config: &mut RecommendConfig) {
        if let Some(t) = self.tau {
            config.tau = t;
        }
        if let Some(p) = self.folds {
            config.p = p;
        }
        if let Some(s) = self.seed {
            config.seed = Some(s);
        }
        if let Some(k) = &self.k {
            config.k_schedule = k.clone();
        }
        if let Some(m) = self.metric {
            config.metric = m;
        }
        if let Some(l) = self.max_level {
            config.max_level_cap = l;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the feature matrix and descriptor sidecar.
    Extract(RunArgs),
    /// Run the full recommendation loop.
    Recommend(RunArgs),
    /// PCA+SVM baseline over the configured component grid.
    BaselinePca(RunArgs),
    /// Compare every run found in a directory.
    Report {
        dir: PathBuf,
    },
}

/// User-facing input problem detected by the CLI itself.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<widefe_core::Error>() {
        Some(e) if e.is_input_error() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Extract(a) => commands::extract(&a.manifest, a.config.as_deref(), &a.overrides, &a.out).map(|_| ()),
        Command::Recommend(a) => commands::recommend(&a.manifest, a.config.as_deref(), &a.overrides, &a.out).map(|_| ()),
        Command::BaselinePca(a) => {
            commands::baseline_pca(&a.manifest, a.config.as_deref(), &a.overrides, &a.out).map(|_| ())
        }
        Command::Report { dir } => commands::report(dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

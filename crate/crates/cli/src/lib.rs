//! The `pcx` command-line pipeline: synthetic data, attribution matrices,
//! prototype fitting, prediction validation, metric reports and OOD
//! benchmarks, all exchanged as files.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use commands::{attribute, eval, fit, ood, outliers, relmax, similarity, synth, validate, Context};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "pcx", version, about = "Prototypical concept-based explanations")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON object whose entries override flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Compute normalized concept vectors for a dataset.
    Attribute(attribute::AttributeArgs),
    /// Fit per-class prototype mixtures.
    Fit(fit::FitArgs),
    /// Check one prediction against its class prototypes.
    Validate(validate::ValidateArgs),
    /// Compute a metric report and print the table of a report directory.
    Eval(eval::EvalArgs),
    /// Score in- and out-of-distribution samples and report the AUC.
    Ood(ood::OodArgs),
    /// Cosine similarity between class prototypes, as CSV.
    Similarity(similarity::SimilarityArgs),
    /// Samples with the highest relevance for a concept.
    Relmax(relmax::RelmaxArgs),
    /// Flag low-likelihood samples of a class and group them.
    OutlierClusters(outliers::OutlierClustersArgs),
    /// Generate a synthetic dataset with a matching toy network.
    Synth(synth::SynthArgs),
}

pub const SUBCOMMANDS: [&str; 9] = [
    "attribute",
    "fit",
    "validate",
    "eval",
    "ood",
    "similarity",
    "relmax",
    "outlier-clusters",
    "synth",
];

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Attribute(_) => "attribute",
            Command::Fit(_) => "fit",
            Command::Validate(_) => "validate",
            Command::Eval(_) => "eval",
            Command::Ood(_) => "ood",
            Command::Similarity(_) => "similarity",
            Command::Relmax(_) => "relmax",
            Command::OutlierClusters(_) => "outlier-clusters",
            Command::Synth(_) => "synth",
        }
    }

    fn with_config(self, config: &Map<String, Value>) -> CliResult<Self> {
        fn merge<T: Serialize + DeserializeOwned>(a: &T, name: &str, c: &Map<String, Value>) -> CliResult<T> {
            config::apply(a, name, c, &SUBCOMMANDS)
        }
        let name = self.name();
        Ok(match self {
            Command::Attribute(a) => Command::Attribute(merge(&a, name, config)?),
            Command::Fit(a) => Command::Fit(merge(&a, name, config)?),
            Command::Validate(a) => Command::Validate(merge(&a, name, config)?),
            Command::Eval(a) => Command::Eval(merge(&a, name, config)?),
            Command::Ood(a) => Command::Ood(merge(&a, name, config)?),
            Command::Similarity(a) => Command::Similarity(merge(&a, name, config)?),
            Command::Relmax(a) => Command::Relmax(merge(&a, name, config)?),
            Command::OutlierClusters(a) => Command::OutlierClusters(merge(&a, name, config)?),
            Command::Synth(a) => Command::Synth(merge(&a, name, config)?),
        })
    }

    /// Runs the subcommand and returns its human-readable summary.
    pub fn execute(&self, ctx: &Context) -> CliResult<String> {
        match self {
            Command::Attribute(a) => attribute::run(a, ctx),
            Command::Fit(a) => fit::run(a, ctx),
            Command::Validate(a) => validate::run(a, ctx),
            Command::Eval(a) => eval::run(a, ctx),
            Command::Ood(a) => ood::run(a, ctx),
            Command::Similarity(a) => similarity::run(a, ctx),
            Command::Relmax(a) => relmax::run(a, ctx),
            Command::OutlierClusters(a) => outliers::run(a, ctx),
            Command::Synth(a) => synth::run(a, ctx),
        }
    }
}

fn config_value<T: DeserializeOwned>(config: &Map<String, Value>, key: &str) -> CliResult<Option<T>> {
    config
        .get(key)
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| CliError::input(format!("config key '{key}': {e}"))))
        .transpose()
}

/// Applies `--config`, sets up the thread pool and runs the subcommand.
pub fn run(cli: Cli) -> CliResult<String> {
    let (command, seed, threads) = match &cli.config {
        Some(path) => {
            let map = config::read_config(path)?;
            let seed = config_value(&map, "seed")?.unwrap_or(cli.seed);
            let threads = config_value::<Option<usize>>(&map, "threads")?.unwrap_or(cli.threads);
            (cli.command.with_config(&map)?, seed, threads)
        }
        None => (cli.command, cli.seed, cli.threads),
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::input("--threads must be >= 1"));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    command.execute(&Context { seed })
}

//! Synthetic dataset with a matching toy network and its ground truth.

use std::path::{Path, PathBuf};

use clap::Args;
use pcx_core::io::write_json;
use pcx_core::synth::{generate, GroundTruth, Split, SynthConfig};
use serde::{Deserialize, Serialize};

use super::Context;
use crate::error::CliResult;
use crate::manifest::{DatasetManifest, ManifestSample};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const NET_FILE: &str = "net.json";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub families: usize,
    #[arg(long, default_value_t = 2)]
    pub classes_per_family: usize,
    #[arg(long, default_value_t = 2)]
    pub strategies_per_class: usize,
    /// Concept dimension.
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    /// Distance between strategy means in units of the base deviation.
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub anisotropy: f64,
    #[arg(long, default_value_t = 50)]
    pub train: usize,
    #[arg(long, default_value_t = 50)]
    pub holdout: usize,
    #[arg(long, default_value_t = 20)]
    pub ood: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            families: self.families,
            classes_per_family: self.classes_per_family,
            strategies_per_class: self.strategies_per_class,
            dim: self.dim,
            separation: self.separation,
            anisotropy: self.anisotropy,
            train_per_strategy: self.train,
            holdout_per_strategy: self.holdout,
            ood_count: self.ood,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub config: SynthConfig,
    pub truth: GroundTruth,
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Holdout => "holdout",
        Split::Ood => "ood",
    }
}

/// Writes the dataset for `cfg` under `out` and returns its manifest.
pub fn write_dataset(cfg: &SynthConfig, out: &Path) -> CliResult<DatasetManifest> {
    let ds = generate(cfg)?;
    let mut samples = Vec::with_capacity(ds.samples.len());
    for (i, s) in ds.samples.iter().enumerate() {
        let id = format!("s{i:05}");
        let rel = format!("samples/{id}.pcxt");
        s.input.save(&out.join(&rel))?;
        samples.push(ManifestSample {
            id,
            path: rel,
            label: s.label,
            split: s.split,
            strategy: s.strategy,
        });
    }
    let manifest = DatasetManifest {
        class_count: cfg.class_count(),
        samples,
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    for split in [Split::Train, Split::Holdout, Split::Ood] {
        let part = DatasetManifest {
            class_count: manifest.class_count,
            samples: manifest.samples.iter().filter(|s| s.split == split).cloned().collect(),
        };
        part.save(&out.join(format!("{}.json", split_name(split))))?;
    }
    ds.net.save(&out.join(NET_FILE))?;
    write_json(
        &out.join(TRUTH_FILE),
        &TruthFile {
            config: cfg.clone(),
            truth: ds.truth,
        },
    )?;
    Ok(manifest)
}

pub fn run(args: &SynthArgs, ctx: &Context) -> CliResult<String> {
    let cfg = args.config(ctx.seed);
    let manifest = write_dataset(&cfg, &args.out)?;
    let count = |s: Split| manifest.samples.iter().filter(|x| x.split == s).count();
    Ok(format!(
        "{} classes, {} strategies, dim {}: {} train, {} holdout, {} ood samples in {}\n",
        cfg.class_count(),
        cfg.strategy_count(),
        cfg.dim,
        count(Split::Train),
        count(Split::Holdout),
        count(Split::Ood),
        args.out.display()
    ))
}

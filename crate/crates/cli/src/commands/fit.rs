use std::path::PathBuf;

use clap::Args;
use pcx_core::prototype::{fit_gmm, FitOptions, PrototypeModel, PrototypeStore, DEFAULT_PROTOTYPES, DEFAULT_REG};
use pcx_core::PcxError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Context, SplitFilter};
use crate::artifacts::{layers_in, AttributionSet};
use crate::error::{CliError, CliResult, FitFailure};
use crate::table;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Directory written by `attribute`.
    #[arg(long)]
    pub attributions: PathBuf,
    /// Layers to fit; defaults to every layer in the directory.
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Prototypes per class.
    #[arg(long, default_value_t = DEFAULT_PROTOTYPES)]
    pub k: usize,
    /// Covariance ridge, relative to the data scale.
    #[arg(long, default_value_t = DEFAULT_REG)]
    pub reg: f64,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitFilter,
    /// Also fit on samples whose prediction differs from the label.
    #[arg(long)]
    pub include_misclassified: bool,
    /// Output store directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn fit_class(set: &AttributionSet, rows: &[usize], class: usize, args: &FitArgs, seed: u64) -> Result<PrototypeModel, PcxError> {
    if rows.len() < args.k.max(1) {
        return Err(PcxError::InvalidArgument(format!(
            "{} usable samples, {} prototypes requested",
            rows.len(),
            args.k
        )));
    }
    let points: Vec<Vec<f64>> = rows.iter().map(|&i| set.row(i)).collect();
    let mut model = fit_gmm(&points, &FitOptions::new(args.k, seed).with_reg(args.reg))?;
    model.class_id = class;
    model.layer_index = set.meta.layer_index;
    model.method = set.meta.method.id().to_string();
    // refer to rows of the attribution matrix rather than the class subset
    model.closest_training_index = model
        .closest_training_index
        .iter()
        .map(|o| o.map(|j| rows[j]))
        .collect();
    Ok(model)
}

pub fn run(args: &FitArgs, ctx: &Context) -> CliResult<String> {
    if args.k == 0 {
        return Err(CliError::input("k must be >= 1"));
    }
    let layers = if args.layers.is_empty() {
        layers_in(&args.attributions)?
    } else {
        args.layers.clone()
    };
    let mut store = PrototypeStore::default();
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for layer in layers {
        let set = AttributionSet::load(&args.attributions, layer)?;
        let usable = set.usable_rows(args.split.split(), !args.include_misclassified);
        let by_class: Vec<Vec<usize>> = (0..set.meta.class_count)
            .map(|c| usable.iter().copied().filter(|&i| set.meta.labels[i] == c).collect())
            .collect();
        let fitted: Vec<_> = by_class
            .par_iter()
            .enumerate()
            .map(|(c, rows)| fit_class(&set, rows, c, args, ctx.seed))
            .collect();
        for (c, result) in fitted.into_iter().enumerate() {
            match result {
                Ok(model) => {
                    let fit = model.fit.as_ref();
                    summary.push(vec![
                        c.to_string(),
                        layer.to_string(),
                        model.components.len().to_string(),
                        by_class[c].len().to_string(),
                        fit.map_or(0, |f| f.iterations).to_string(),
                        fit.is_some_and(|f| f.converged).to_string(),
                    ]);
                    store.models.push(model);
                }
                Err(error) => failures.push(FitFailure {
                    layer_index: layer,
                    class_id: c,
                    error,
                }),
            }
        }
    }
    store.failures = failures
        .iter()
        .map(|f| (f.class_id, format!("layer {}: {}", f.layer_index, f.error)))
        .collect();
    store.save(&args.out)?;
    if !failures.is_empty() {
        return Err(CliError::PartialFit {
            store: args.out.display().to_string(),
            failures,
        });
    }
    let header = ["class", "layer", "prototypes", "samples", "iterations", "converged"].map(String::from);
    Ok(table::render(&header, &summary))
}

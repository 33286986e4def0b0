use std::path::PathBuf;

use clap::Args;
use pcx_core::io::write_json;
use pcx_core::prototype::{outlier_clusters, PrototypeStore};
use pcx_core::PcxError;
use serde::{Deserialize, Serialize};

use super::{check_percentile, select_models, Context, SplitFilter};
use crate::artifacts::AttributionSet;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutlierClustersArgs {
    #[arg(long)]
    pub attributions: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    /// Predicted class whose samples are screened.
    #[arg(long)]
    pub class: usize,
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    pub percentile: f64,
    /// Number of groups formed among the flagged samples.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitFilter,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierClustersReport {
    pub class_id: usize,
    pub layer_index: usize,
    pub threshold: f64,
    pub outliers: Vec<String>,
    pub clusters: Vec<Vec<String>>,
    pub ungrouped: bool,
}

pub fn run(args: &OutlierClustersArgs, ctx: &Context) -> CliResult<String> {
    check_percentile(args.percentile)?;
    let store = PrototypeStore::load(&args.store)?;
    let (layer, method, models) = select_models(&store, args.layer, None)?;
    let model = models
        .iter()
        .find(|m| m.class_id == args.class)
        .ok_or(PcxError::MissingClass(args.class))?;
    let set = AttributionSet::load(&args.attributions, layer)?;
    if set.meta.method.id() != method {
        return Err(CliError::input(format!(
            "attributions use {} but the store was fitted on {method}",
            set.meta.method
        )));
    }
    let rows: Vec<usize> = set
        .usable_rows(args.split.split(), false)
        .into_iter()
        .filter(|&i| set.meta.explained[i] == args.class)
        .collect();
    let points: Vec<Vec<f64>> = rows.iter().map(|&i| set.row(i)).collect();
    let found = outlier_clusters(&points, model, args.percentile, args.k, ctx.seed)?;
    let id = |pos: &usize| set.meta.ids[rows[*pos]].clone();
    let report = OutlierClustersReport {
        class_id: args.class,
        layer_index: layer,
        threshold: found.threshold,
        outliers: found.outliers.iter().map(id).collect(),
        clusters: found.clusters.iter().map(|c| c.iter().map(id).collect()).collect(),
        ungrouped: found.ungrouped,
    };
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    let mut text = format!(
        "class {} layer {}: {} of {} samples below log-likelihood {:.4}\n",
        report.class_id,
        layer,
        report.outliers.len(),
        points.len(),
        report.threshold
    );
    for (i, c) in report.clusters.iter().enumerate() {
        text.push_str(&format!("group {i}: {}\n", c.join(" ")));
    }
    Ok(text)
}

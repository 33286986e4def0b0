use std::path::PathBuf;

use clap::Args;
use pcx_core::attribution::relmax_select;
use pcx_core::io::write_json;
use serde::{Deserialize, Serialize};

use super::Context;
use crate::artifacts::AttributionSet;
use crate::error::CliResult;
use crate::table;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RelmaxArgs {
    #[arg(long)]
    pub attributions: PathBuf,
    #[arg(long)]
    pub layer: usize,
    #[arg(long)]
    pub concept: usize,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelmaxSample {
    pub row: usize,
    pub id: String,
    pub label: usize,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelmaxReport {
    pub layer_index: usize,
    pub concept: usize,
    pub method: String,
    pub samples: Vec<RelmaxSample>,
}

pub fn run(args: &RelmaxArgs, _ctx: &Context) -> CliResult<String> {
    let set = AttributionSet::load(&args.attributions, args.layer)?;
    let rows = relmax_select(&set.matrix, args.concept, args.k)?;
    let report = RelmaxReport {
        layer_index: args.layer,
        concept: args.concept,
        method: set.meta.method.id().to_string(),
        samples: rows
            .into_iter()
            .map(|i| RelmaxSample {
                row: i,
                id: set.meta.ids[i].clone(),
                label: set.meta.labels[i],
                relevance: set.matrix.row(i)[args.concept] as f64,
            })
            .collect(),
    };
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    let header = ["id", "label", "relevance"].map(String::from);
    let body: Vec<Vec<String>> = report
        .samples
        .iter()
        .map(|s| vec![s.id.clone(), s.label.to_string(), format!("{:.4}", s.relevance)])
        .collect();
    Ok(table::render(&header, &body))
}

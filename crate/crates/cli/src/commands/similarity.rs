use std::path::PathBuf;

use clap::Args;
use pcx_core::attribution::Method;
use pcx_core::prototype::{class_similarity_matrix, ClassVector, PrototypeStore};
use serde::{Deserialize, Serialize};

use super::{select_models, write_text, Context};
use crate::error::CliResult;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub method: Option<Method>,
    /// Compare this component of every class instead of the mixture means.
    #[arg(long)]
    pub component: Option<usize>,
    /// CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn to_csv(classes: &[usize], matrix: &[Vec<f64>]) -> String {
    let mut out = String::from("class");
    for c in classes {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    for (c, row) in classes.iter().zip(matrix) {
        out.push_str(&c.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn run(args: &SimilarityArgs, _ctx: &Context) -> CliResult<String> {
    let store = PrototypeStore::load(&args.store)?;
    let (_, _, models) = select_models(&store, args.layer, args.method)?;
    let which = args.component.map_or(ClassVector::MixtureMean, ClassVector::Component);
    let matrix = class_similarity_matrix(&models, which)?;
    let classes: Vec<usize> = models.iter().map(|m| m.class_id).collect();
    let csv = to_csv(&classes, &matrix);
    write_text(&args.out, &csv)?;
    Ok(csv)
}

use std::path::PathBuf;

use clap::Args;
use pcx_core::attribution::{attribute_batch, concept_count, normalize, Method, DEFAULT_EPSILON};
use pcx_core::{Network, PcxError, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Context, SplitFilter};
use crate::artifacts::{matrix_path, AttributionSet, AttributionSidecar, ClassConditioning};
use crate::error::{CliError, CliResult};
use crate::manifest::DatasetManifest;
use crate::table;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AttributeArgs {
    /// Network spec (JSON).
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "lrp-eps")]
    pub method: Method,
    /// Concept layers; defaults to the last conv layer (or last hidden
    /// layer of a dense net).
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    #[arg(long, value_enum, default_value = "predicted")]
    pub class_conditioning: ClassConditioning,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f32,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitFilter,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &AttributeArgs, _ctx: &Context) -> CliResult<String> {
    let net = Network::load(&args.net)?;
    let data = DatasetManifest::load(&args.manifest, args.split.split())?;
    data.require_nonempty("dataset")?;
    if data.class_count != net.class_count() {
        return Err(CliError::input(format!(
            "manifest has {} classes, network has {}",
            data.class_count,
            net.class_count()
        )));
    }
    let layers = if args.layers.is_empty() {
        vec![net
            .last_conv_layer()
            .ok_or_else(|| CliError::input("network has no hidden layer; pass --layers"))?]
    } else {
        args.layers.clone()
    };
    let predictions = data
        .inputs
        .par_iter()
        .map(|x| net.predict(x))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<usize> = data.samples.iter().map(|s| s.label).collect();
    let explained = match args.class_conditioning {
        ClassConditioning::Predicted => predictions.clone(),
        ClassConditioning::Label => labels.clone(),
    };

    let mut rows = Vec::new();
    for &layer in &layers {
        net.check_layer(layer)?;
        let raw = attribute_batch(&net, &data.inputs, &explained, args.method, layer, args.epsilon)?;
        let m = concept_count(&net, layer);
        let mut values = Vec::with_capacity(raw.len() * m);
        let mut degenerate = Vec::new();
        for (i, v) in raw.iter().enumerate() {
            match normalize(v) {
                Ok(nv) => values.extend_from_slice(&nv.values),
                Err(PcxError::Degenerate(_)) => {
                    degenerate.push(i);
                    values.extend(std::iter::repeat_n(0.0, m));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let set = AttributionSet {
            matrix: Tensor::new(vec![raw.len(), m], values)?,
            meta: AttributionSidecar {
                method: args.method,
                flavor: args.method.flavor(),
                layer_index: layer,
                epsilon: args.epsilon,
                normalized: true,
                class_conditioning: args.class_conditioning,
                class_count: net.class_count(),
                concepts: m,
                ids: data.samples.iter().map(|s| s.id.clone()).collect(),
                labels: labels.clone(),
                predictions: predictions.clone(),
                explained: explained.clone(),
                splits: data.samples.iter().map(|s| s.split).collect(),
                strategies: data.samples.iter().map(|s| s.strategy).collect(),
                degenerate,
            },
        };
        set.save(&args.out)?;
        rows.push(vec![
            layer.to_string(),
            set.len().to_string(),
            m.to_string(),
            set.meta.degenerate.len().to_string(),
            matrix_path(&args.out, layer).display().to_string(),
        ]);
    }
    let header = ["layer", "samples", "concepts", "degenerate", "file"].map(String::from);
    Ok(format!("method {}\n{}", args.method, table::render(&header, &rows)))
}

pub mod attribute;
pub mod eval;
pub mod fit;
pub mod ood;
pub mod outliers;
pub mod relmax;
pub mod similarity;
pub mod synth;
pub mod validate;

use std::path::Path;

use pcx_core::attribution::Method;
use pcx_core::prototype::{PrototypeModel, PrototypeStore};
use pcx_core::synth::Split;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Options shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Context {
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitFilter {
    Train,
    Holdout,
    Ood,
    All,
}

impl SplitFilter {
    pub fn split(self) -> Option<Split> {
        match self {
            SplitFilter::Train => Some(Split::Train),
            SplitFilter::Holdout => Some(Split::Holdout),
            SplitFilter::Ood => Some(Split::Ood),
            SplitFilter::All => None,
        }
    }
}

/// Class models of one (layer, method) pair in `store`. Either may be left
/// open when the store holds a single candidate.
pub fn select_models(
    store: &PrototypeStore,
    layer: Option<usize>,
    method: Option<Method>,
) -> CliResult<(usize, String, Vec<PrototypeModel>)> {
    let mut pairs: Vec<(usize, String)> = store
        .models
        .iter()
        .filter(|m| layer.is_none_or(|l| l == m.layer_index))
        .filter(|m| method.is_none_or(|x| x.id() == m.method))
        .map(|m| (m.layer_index, m.method.clone()))
        .collect();
    pairs.sort();
    pairs.dedup();
    match pairs.as_slice() {
        [] => Err(CliError::input(match (layer, method) {
            (Some(l), _) => format!("prototype store has no models for layer {l}"),
            (None, _) => "prototype store has no matching models".to_string(),
        })),
        [(l, m)] => {
            let models = store.select(*l, m).into_iter().cloned().collect();
            Ok((*l, m.clone(), models))
        }
        many => Err(CliError::input(format!(
            "prototype store holds several layer/method pairs {many:?}; pass --layer and --method"
        ))),
    }
}

pub fn method_of(models: &[PrototypeModel]) -> CliResult<Method> {
    let id = &models[0].method;
    id.parse().map_err(|_| CliError::input(format!("store method '{id}' is not an attribution method")))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(pcx_core::io::write_atomic(path, text.as_bytes())?)
}

pub fn check_percentile(p: f64) -> CliResult<()> {
    if !(0.0..=100.0).contains(&p) {
        return Err(CliError::input(format!("percentile {p} outside [0, 100]")));
    }
    Ok(())
}

//! Attribution matrices on disk: `layer{l}.pcxt` holds a samples x concepts
//! matrix and `layer{l}.json` describes its rows.

use std::path::{Path, PathBuf};

use pcx_core::attribution::{Flavor, Method};
use pcx_core::io::{read_json, write_json};
use pcx_core::synth::Split;
use pcx_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Which class each sample's relevance explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ClassConditioning {
    Predicted,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSidecar {
    pub method: Method,
    pub flavor: Flavor,
    pub layer_index: usize,
    pub epsilon: f32,
    pub normalized: bool,
    pub class_conditioning: ClassConditioning,
    pub class_count: usize,
    pub concepts: usize,
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub predictions: Vec<usize>,
    /// Class whose output was explained, per row.
    pub explained: Vec<usize>,
    pub splits: Vec<Split>,
    pub strategies: Vec<Option<usize>>,
    /// Rows whose raw vector had zero mass; they hold zeros.
    pub degenerate: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AttributionSet {
    pub meta: AttributionSidecar,
    pub matrix: Tensor,
}

pub fn matrix_path(dir: &Path, layer: usize) -> PathBuf {
    dir.join(format!("layer{layer}.pcxt"))
}

pub fn sidecar_path(dir: &Path, layer: usize) -> PathBuf {
    dir.join(format!("layer{layer}.json"))
}

/// Layers with a sidecar in `dir`, ascending.
pub fn layers_in(dir: &Path) -> CliResult<Vec<usize>> {
    let entries = std::fs::read_dir(dir).map_err(|e| pcx_core::PcxError::io_at(dir, e))?;
    let mut layers: Vec<usize> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("layer")?.strip_suffix(".json")?.parse().ok()
        })
        .collect();
    layers.sort_unstable();
    if layers.is_empty() {
        return Err(CliError::input(format!("no attribution layers found in {}", dir.display())));
    }
    Ok(layers)
}

impl AttributionSet {
    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let layer = self.meta.layer_index;
        self.matrix.save(&matrix_path(dir, layer))?;
        write_json(&sidecar_path(dir, layer), &self.meta)?;
        Ok(())
    }

    pub fn load(dir: &Path, layer: usize) -> CliResult<Self> {
        let meta: AttributionSidecar = read_json(&sidecar_path(dir, layer))?;
        let path = matrix_path(dir, layer);
        let matrix = Tensor::load(&path)?;
        let n = meta.ids.len();
        let consistent = matrix.shape() == [n, meta.concepts]
            && [meta.labels.len(), meta.predictions.len(), meta.explained.len(), meta.splits.len(), meta.strategies.len()]
                .iter()
                .all(|&l| l == n);
        if !consistent {
            return Err(CliError::input(format!(
                "{}: matrix {:?} does not match its sidecar ({n} rows, {} concepts)",
                path.display(),
                matrix.shape(),
                meta.concepts
            )));
        }
        Ok(Self { meta, matrix })
    }

    pub fn len(&self) -> usize {
        self.meta.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.meta.degenerate.binary_search(&i).is_ok()
    }

    /// Non-degenerate rows of `split` (all splits when `None`). With
    /// `correct_only`, rows whose prediction differs from the label are
    /// dropped as well.
    pub fn usable_rows(&self, split: Option<Split>, correct_only: bool) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| split.is_none_or(|s| self.meta.splits[i] == s))
            .filter(|&i| !correct_only || self.meta.predictions[i] == self.meta.labels[i])
            .filter(|&i| !self.is_degenerate(i))
            .collect()
    }

    /// Rows of `rows` grouped by strategy label, `count` groups.
    pub fn by_strategy(&self, rows: &[usize], count: usize) -> Vec<Vec<Vec<f64>>> {
        let mut out = vec![Vec::new(); count];
        for &i in rows {
            if let Some(s) = self.meta.strategies[i] {
                out[s].push(self.row(i));
            }
        }
        out
    }

    pub fn strategy_count(&self) -> usize {
        self.meta.strategies.iter().flatten().max().map_or(0, |s| s + 1)
    }
}

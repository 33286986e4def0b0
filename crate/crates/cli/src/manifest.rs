//! Dataset manifests: sample tensors with labels, split tags and optional
//! strategy labels. Sample paths are relative to the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use pcx_core::io::{read_json, write_json};
use pcx_core::synth::Split;
use pcx_core::{PcxError, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSample {
    pub id: String,
    pub path: String,
    pub label: usize,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub class_count: usize,
    pub samples: Vec<ManifestSample>,
}

/// A manifest whose tensors have been read and checked.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub class_count: usize,
    pub samples: Vec<ManifestSample>,
    pub inputs: Vec<Tensor>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> CliResult<()> {
        Ok(write_json(path, self)?)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let manifest: Self = read_json(path)?;
        manifest.check().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }

    fn check(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        for s in &self.samples {
            if s.label >= self.class_count {
                return Err(format!(
                    "sample '{}' has label {} but class_count is {}",
                    s.id, s.label, self.class_count
                ));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(format!("duplicate sample id '{}'", s.id));
            }
        }
        Ok(())
    }

    pub fn resolve(path: &Path, sample: &ManifestSample) -> PathBuf {
        path.parent().unwrap_or_else(|| Path::new(".")).join(&sample.path)
    }

    /// Reads the manifest and every sample tensor it references, keeping
    /// only samples in `split` when given.
    pub fn load(path: &Path, split: Option<Split>) -> CliResult<LoadedDataset> {
        let manifest = Self::read(path)?;
        let samples: Vec<ManifestSample> = manifest
            .samples
            .into_iter()
            .filter(|s| split.is_none_or(|sp| s.split == sp))
            .collect();
        let inputs = samples
            .par_iter()
            .map(|s| {
                let file = Self::resolve(path, s);
                Tensor::load(&file).map_err(|e| e.with_path(&file))
            })
            .collect::<Result<Vec<_>, PcxError>>()?;
        Ok(LoadedDataset {
            class_count: manifest.class_count,
            samples,
            inputs,
        })
    }
}

impl LoadedDataset {
    pub fn require_nonempty(&self, what: &str) -> CliResult<()> {
        if self.samples.is_empty() {
            return Err(CliError::input(format!("{what} manifest has no samples")));
        }
        Ok(())
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.samples.iter().position(|s| s.id == id)
    }
}

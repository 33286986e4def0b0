//! JSON prototype store: one document per (class, layer, method) plus an index.
//!
//! Floats are written in shortest round-trip form, so every `f64` (and hence
//! every `f32` that was widened to it) parses back bit-exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::gmm::{FitInfo, PrototypeComponent, PrototypeModel};
use crate::error::{PcxError, Result};
use crate::io::{read_json, write_json};

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ComponentDoc {
    weight: f64,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDoc {
    class_id: usize,
    layer_index: usize,
    method: String,
    components: Vec<ComponentDoc>,
    closest_training_index: Vec<Option<usize>>,
    training_log_likelihoods: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit: Option<FitInfo>,
}

impl From<&PrototypeModel> for ModelDoc {
    fn from(m: &PrototypeModel) -> Self {
        ModelDoc {
            class_id: m.class_id,
            layer_index: m.layer_index,
            method: m.method.clone(),
            components: m
                .components
                .iter()
                .map(|c| ComponentDoc {
                    weight: c.weight(),
                    mean: c.mean().to_vec(),
                    covariance: c.covariance().chunks(c.dim()).map(<[f64]>::to_vec).collect(),
                })
                .collect(),
            closest_training_index: m.closest_training_index.clone(),
            training_log_likelihoods: m.training_log_likelihoods.clone(),
            fit: m.fit.clone(),
        }
    }
}

impl TryFrom<ModelDoc> for PrototypeModel {
    type Error = PcxError;

    fn try_from(d: ModelDoc) -> Result<Self> {
        let components = d
            .components
            .into_iter()
            .map(|c| PrototypeComponent::new(c.weight, c.mean, c.covariance.concat()))
            .collect::<Result<Vec<_>>>()?;
        let mut model = PrototypeModel::from_components(d.class_id, components)?;
        if d.closest_training_index.len() != model.components.len() {
            return Err(PcxError::InvalidArgument(
                "closest_training_index must have one entry per component".into(),
            ));
        }
        model.layer_index = d.layer_index;
        model.method = d.method;
        model.closest_training_index = d.closest_training_index;
        model.training_log_likelihoods = d.training_log_likelihoods;
        model.fit = d.fit;
        Ok(model)
    }
}

pub fn save_model(path: &Path, model: &PrototypeModel) -> Result<()> {
    write_json(path, &ModelDoc::from(model))
}

pub fn load_model(path: &Path) -> Result<PrototypeModel> {
    let doc: ModelDoc = read_json(path)?;
    PrototypeModel::try_from(doc).map_err(|e| e.with_path(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub class_id: usize,
    pub layer_index: usize,
    pub method: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub entries: Vec<StoreEntry>,
    /// Classes that could not be fitted, with the reason.
    #[serde(default)]
    pub failures: Vec<(usize, String)>,
    #[serde(default)]
    pub partial: bool,
}

/// A set of class models, typically all classes for one layer and method.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrototypeStore {
    pub models: Vec<PrototypeModel>,
    pub failures: Vec<(usize, String)>,
}

impl PrototypeStore {
    pub fn new(models: Vec<PrototypeModel>) -> Self {
        Self {
            models,
            failures: Vec::new(),
        }
    }

    pub fn file_name(model: &PrototypeModel) -> String {
        format!("class{}_layer{}_{}.json", model.class_id, model.layer_index, model.method)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut entries = Vec::with_capacity(self.models.len());
        for m in &self.models {
            let file = Self::file_name(m);
            save_model(&dir.join(&file), m)?;
            entries.push(StoreEntry {
                class_id: m.class_id,
                layer_index: m.layer_index,
                method: m.method.clone(),
                file,
            });
        }
        write_json(
            &dir.join(INDEX_FILE),
            &StoreIndex {
                entries,
                failures: self.failures.clone(),
                partial: !self.failures.is_empty(),
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index: StoreIndex = read_json(&dir.join(INDEX_FILE))?;
        let models = index
            .entries
            .iter()
            .map(|e| load_model(&dir.join(&e.file)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            models,
            failures: index.failures,
        })
    }

    /// Models for one layer and method, ordered by class id.
    pub fn select(&self, layer_index: usize, method: &str) -> Vec<&PrototypeModel> {
        let mut out: Vec<&PrototypeModel> = self
            .models
            .iter()
            .filter(|m| m.layer_index == layer_index && m.method == method)
            .collect();
        out.sort_by_key(|m| m.class_id);
        out
    }

    pub fn class_model(&self, class_id: usize, layer_index: Option<usize>) -> Result<&PrototypeModel> {
        self.models
            .iter()
            .find(|m| m.class_id == class_id && layer_index.is_none_or(|l| l == m.layer_index))
            .ok_or(PcxError::MissingClass(class_id))
    }

    pub fn model_paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.models.iter().map(|m| dir.join(Self::file_name(m))).collect()
    }
}

//! Metric reports per layer, plus a methods x metrics table built from a
//! directory of reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use pcx_core::eval::{
    compare_clusterings, coverage_with_models, faithfulness, fit_strategy_models, outlier_detection, sparseness, stability,
    DeletionSample, EvalConfig, EvalReport, LayerScore, Regime, StrategyOptions, STABILITY_FOLDS,
    STABILITY_PROTOTYPES,
};
use pcx_core::io::{read_json, write_json};
use pcx_core::prototype::PrototypeStore;
use pcx_core::synth::{Split, StrategySets};
use pcx_core::Network;
use serde::{Deserialize, Serialize};

use super::{Context, SplitFilter};
use crate::artifacts::{layers_in, AttributionSet};
use crate::error::{CliError, CliResult};
use crate::manifest::DatasetManifest;
use crate::table;

/// Share of concepts removed when scoring faithfulness.
pub const DEFAULT_FRACTION_REMOVED: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Faithfulness,
    Stability,
    Sparseness,
    Coverage,
    Outlier,
    ClusteringCompare,
}

impl Metric {
    pub fn id(self) -> &'static str {
        match self {
            Metric::Faithfulness => "faithfulness",
            Metric::Stability => "stability",
            Metric::Sparseness => "sparseness",
            Metric::Coverage => "coverage",
            Metric::Outlier => "outlier",
            Metric::ClusteringCompare => "clustering-compare",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long, value_enum, required_unless_present = "render")]
    pub metric: Option<Metric>,
    /// Directory written by `attribute`.
    #[arg(long)]
    pub attributions: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Manifest holding the inputs named in the attribution sidecars.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Split whose samples are scored (faithfulness).
    #[arg(long, value_enum, default_value = "holdout")]
    pub split: SplitFilter,
    #[arg(long, default_value_t = DEFAULT_FRACTION_REMOVED)]
    pub fraction: f64,
    #[arg(long, default_value_t = STABILITY_FOLDS)]
    pub folds: usize,
    /// Prototypes per fit; defaults to 5 for stability and 1 per strategy
    /// for coverage, outlier and clustering-compare.
    #[arg(long)]
    pub prototypes: Option<usize>,
    /// Report directory; the table covers every report in it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Only render the table for an existing report directory.
    #[arg(long)]
    pub render: Option<PathBuf>,
}

fn need<'a>(opt: &'a Option<PathBuf>, flag: &str, metric: Metric) -> CliResult<&'a Path> {
    opt.as_deref()
        .ok_or_else(|| CliError::input(format!("--{flag} is required for metric {}", metric.id())))
}

fn eval_layers(args: &EvalArgs, dir: &Path) -> CliResult<Vec<usize>> {
    if args.layers.is_empty() {
        layers_in(dir)
    } else {
        Ok(args.layers.clone())
    }
}

fn config(method: &str, prototypes: usize, seed: u64, folds: usize) -> EvalConfig {
    EvalConfig {
        method: method.to_string(),
        prototypes,
        seed,
        folds,
    }
}

/// Strategy-labelled train and holdout vectors of correctly predicted samples.
fn strategy_sets(set: &AttributionSet) -> CliResult<(StrategySets, StrategySets)> {
    let count = set.strategy_count();
    if count == 0 {
        return Err(CliError::input("attributions carry no strategy labels"));
    }
    let train = set.by_strategy(&set.usable_rows(Some(Split::Train), true), count);
    let test = set.by_strategy(&set.usable_rows(Some(Split::Holdout), true), count);
    Ok((train, test))
}

/// Computes the reports for one metric.
pub fn evaluate(args: &EvalArgs, metric: Metric, seed: u64) -> CliResult<Vec<EvalReport>> {
    let mut reports = Vec::new();
    match metric {
        Metric::Sparseness => {
            let store = PrototypeStore::load(need(&args.store, "store", metric)?)?;
            let mut groups: BTreeMap<String, Vec<LayerScore>> = BTreeMap::new();
            let mut pairs: Vec<(usize, String)> =
                store.models.iter().map(|m| (m.layer_index, m.method.clone())).collect();
            pairs.sort();
            pairs.dedup();
            for (layer, method) in pairs {
                if !args.layers.is_empty() && !args.layers.contains(&layer) {
                    continue;
                }
                let values = store
                    .select(layer, &method)
                    .into_iter()
                    .map(sparseness)
                    .collect::<Result<Vec<_>, _>>()?;
                groups.entry(method).or_default().push(LayerScore::from_values(layer, &values)?);
            }
            for (method, layers) in groups {
                let k = store.models.iter().find(|m| m.method == method).map_or(0, |m| m.components.len());
                reports.push(EvalReport::new(metric.id(), layers, config(&method, k, seed, 0))?);
            }
        }
        Metric::Faithfulness => {
            let dir = need(&args.attributions, "attributions", metric)?;
            let store = PrototypeStore::load(need(&args.store, "store", metric)?)?;
            let net = Network::load(need(&args.net, "net", metric)?)?;
            let data = DatasetManifest::load(need(&args.manifest, "manifest", metric)?, None)?;
            let mut layers = Vec::new();
            let mut method = String::new();
            let mut k = 0;
            for layer in eval_layers(args, dir)? {
                let set = AttributionSet::load(dir, layer)?;
                method = set.meta.method.id().to_string();
                let rows = set.usable_rows(args.split.split(), false);
                let vectors: Vec<Vec<f64>> = rows.iter().map(|&i| set.row(i)).collect();
                let mut values = Vec::new();
                for model in store.select(layer, &method) {
                    k = model.components.len();
                    let mut samples = Vec::new();
                    for (pos, &i) in rows.iter().enumerate() {
                        if set.meta.explained[i] != model.class_id {
                            continue;
                        }
                        let at = data.position(&set.meta.ids[i]).ok_or_else(|| {
                            CliError::input(format!("sample '{}' missing from manifest", set.meta.ids[i]))
                        })?;
                        samples.push(DeletionSample {
                            input: &data.inputs[at],
                            class: model.class_id,
                            concepts: &vectors[pos],
                        });
                    }
                    if !samples.is_empty() {
                        values.extend(faithfulness(&net, &samples, model, layer, args.fraction)?.per_sample);
                    }
                }
                layers.push(LayerScore::from_values(layer, &values)?);
            }
            reports.push(EvalReport::new(metric.id(), layers, config(&method, k, seed, 0))?);
        }
        Metric::Stability => {
            let dir = need(&args.attributions, "attributions", metric)?;
            let k = args.prototypes.unwrap_or(STABILITY_PROTOTYPES);
            let mut layers = Vec::new();
            let mut method = String::new();
            for layer in eval_layers(args, dir)? {
                let set = AttributionSet::load(dir, layer)?;
                method = set.meta.method.id().to_string();
                let rows = set.usable_rows(Some(Split::Train), true);
                let mut values = Vec::new();
                for c in 0..set.meta.class_count {
                    let points: Vec<Vec<f64>> =
                        rows.iter().filter(|&&i| set.meta.labels[i] == c).map(|&i| set.row(i)).collect();
                    values.push(
                        stability(&points, k, args.folds, seed)
                            .map_err(|e| CliError::input(format!("class {c} at layer {layer}: {e}")))?
                            .score,
                    );
                }
                layers.push(LayerScore::from_values(layer, &values)?);
            }
            reports.push(EvalReport::new(metric.id(), layers, config(&method, k, seed, args.folds))?);
        }
        Metric::Coverage | Metric::Outlier | Metric::ClusteringCompare => {
            let dir = need(&args.attributions, "attributions", metric)?;
            let k = args.prototypes.unwrap_or(1);
            let opts = StrategyOptions {
                k,
                seed,
                ..StrategyOptions::default()
            };
            let mut per_label: BTreeMap<(String, &'static str), Vec<LayerScore>> = BTreeMap::new();
            for layer in eval_layers(args, dir)? {
                let set = AttributionSet::load(dir, layer)?;
                let method = set.meta.method.id().to_string();
                let (train, test) = strategy_sets(&set)?;
                match metric {
                    Metric::Coverage => {
                        let models = fit_strategy_models(&train, &opts, Regime::GmmLoglik)?;
                        let r = coverage_with_models(&models, &test, Regime::GmmLoglik.assign_rule())?;
                        per_label
                            .entry((method.clone(), "coverage"))
                            .or_default()
                            .push(LayerScore::from_values(layer, &r.per_strategy)?);
                    }
                    Metric::Outlier => {
                        let models = fit_strategy_models(&train, &opts, Regime::GmmLoglik)?;
                        let r = outlier_detection(&models, &test, Regime::GmmLoglik)?;
                        per_label
                            .entry((method.clone(), "outlier"))
                            .or_default()
                            .push(LayerScore::from_values(layer, &r.per_strategy)?);
                    }
                    _ => {
                        for r in compare_clusterings(&train, &test, k, seed)? {
                            let label = format!("{}@{method}", r.regime.id());
                            per_label
                                .entry((label.clone(), "coverage"))
                                .or_default()
                                .push(LayerScore::from_values(layer, &[r.coverage])?);
                            per_label
                                .entry((label, "outlier"))
                                .or_default()
                                .push(LayerScore::from_values(layer, &[r.outlier_auc])?);
                        }
                    }
                }
            }
            for ((label, name), layers) in per_label {
                reports.push(EvalReport::new(name, layers, config(&label, k, seed, 0))?);
            }
        }
    }
    Ok(reports)
}

pub fn report_file(report: &EvalReport) -> String {
    format!("{}_{}.json", report.metric, report.config.method.replace(['/', '@'], "_"))
}

const COLUMN_ORDER: [&str; 5] = ["faithfulness", "stability", "sparseness", "coverage", "outlier"];

/// Methods x metrics table over every report in `dir`.
pub fn render_dir(dir: &Path) -> CliResult<String> {
    let entries = std::fs::read_dir(dir).map_err(|e| pcx_core::PcxError::io_at(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut cells: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut metrics: Vec<String> = Vec::new();
    for f in files {
        let Ok(r) = read_json::<EvalReport>(&f) else { continue };
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric.clone());
        }
        cells
            .entry(r.config.method.clone())
            .or_default()
            .insert(r.metric.clone(), table::score_cell(r.aggregate, r.standard_error));
    }
    metrics.sort_by_key(|m| (COLUMN_ORDER.iter().position(|c| c == m).unwrap_or(COLUMN_ORDER.len()), m.clone()));
    let mut header = vec!["method".to_string()];
    header.extend(metrics.iter().cloned());
    let rows: Vec<Vec<String>> = cells
        .into_iter()
        .map(|(method, by_metric)| {
            let mut row = vec![method];
            row.extend(metrics.iter().map(|m| by_metric.get(m).cloned().unwrap_or_else(|| "-".into())));
            row
        })
        .collect();
    Ok(table::render(&header, &rows))
}

pub fn run(args: &EvalArgs, ctx: &Context) -> CliResult<String> {
    let Some(metric) = args.metric else {
        let dir = args.render.as_deref().expect("clap requires --metric or --render");
        return render_dir(dir);
    };
    if !(args.fraction > 0.0 && args.fraction <= 1.0) {
        return Err(CliError::input(format!("fraction {} outside (0, 1]", args.fraction)));
    }
    let reports = evaluate(args, metric, ctx.seed)?;
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| CliError::input("--out is required to write reports"))?;
    for r in &reports {
        write_json(&out.join(report_file(r)), r)?;
    }
    render_dir(out)
}

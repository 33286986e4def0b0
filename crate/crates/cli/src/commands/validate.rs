//! Checks one prediction against the prototypes of its class: how likely
//! its concept vector is, which prototype it follows, and which concepts
//! it over- or underuses.

use std::path::PathBuf;

use clap::Args;
use pcx_core::attribution::{attribute, normalize, Method, DEFAULT_EPSILON};
use pcx_core::io::write_json;
use pcx_core::prototype::{
    explain_delta, nearest_component, AssignRule, DeltaExplanation, PrototypeModel, PrototypeRef, PrototypeStore,
    Usage, DEFAULT_SIMILAR_BAND,
};
use pcx_core::{Network, PcxError, Tensor};
use serde::{Deserialize, Serialize};

use super::{check_percentile, method_of, select_models, Context};
use crate::error::{CliError, CliResult};
use crate::manifest::DatasetManifest;
use crate::table;

pub const DEFAULT_TOP_N: usize = 5;
/// Training log-likelihood percentile below which a prediction is an outlier.
pub const DEFAULT_OUTLIER_PERCENTILE: f64 = 5.0;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    /// Input tensor file. Alternatively give --manifest and --id.
    #[arg(long, conflicts_with_all = ["manifest", "id"])]
    pub sample: Option<PathBuf>,
    #[arg(long, requires = "id")]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    pub id: Option<String>,
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    pub top_n: usize,
    /// Outlier threshold as a percentile of training log-likelihoods.
    #[arg(long, default_value_t = DEFAULT_OUTLIER_PERCENTILE)]
    pub percentile: f64,
    #[arg(long, default_value_t = DEFAULT_SIMILAR_BAND)]
    pub similar_band: f64,
    /// Also compare against the prototypes of this class.
    #[arg(long)]
    pub against_class: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f32,
    /// Report file (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    InDistribution,
    Outlier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptValue {
    pub concept: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDelta {
    pub concept: usize,
    pub delta: f64,
    pub usage: Usage,
    /// This concept's own term of the squared Mahalanobis distance.
    pub intra: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub similar_band: f64,
    pub top: Vec<ConceptDelta>,
    pub overused: usize,
    pub underused: usize,
    pub similar: usize,
    pub mahalanobis_sq: f64,
    pub intra_sum: f64,
    pub inter_sum: f64,
}

impl DeltaSummary {
    fn new(d: &DeltaExplanation, top_n: usize) -> Self {
        let count = |u: Usage| d.usage.iter().filter(|&&x| x == u).count();
        Self {
            similar_band: d.similar_band,
            top: d
                .ranked_concepts()
                .into_iter()
                .take(top_n)
                .map(|i| ConceptDelta {
                    concept: i,
                    delta: d.delta[i],
                    usage: d.usage[i],
                    intra: d.intra[i],
                })
                .collect(),
            overused: count(Usage::Overused),
            underused: count(Usage::Underused),
            similar: count(Usage::Similar),
            mahalanobis_sq: d.total,
            intra_sum: d.intra_sum(),
            inter_sum: d.inter_sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub class_id: usize,
    pub log_likelihood: f64,
    pub prototype: PrototypeRef,
    pub top_prototype: Vec<ConceptValue>,
    pub delta: DeltaSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub sample_id: String,
    pub predicted_class: usize,
    pub layer_index: usize,
    pub method: String,
    pub log_likelihood: f64,
    /// Rank of the log-likelihood among the class's training scores, 0..=100.
    pub percentile: f64,
    pub threshold_percentile: f64,
    pub threshold_log_likelihood: f64,
    pub verdict: Verdict,
    pub prototype: PrototypeRef,
    /// Attribution-matrix row nearest to the assigned prototype's mean.
    pub closest_training_index: Option<usize>,
    pub top_sample: Vec<ConceptValue>,
    pub top_prototype: Vec<ConceptValue>,
    pub delta: DeltaSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub against: Option<Comparison>,
}

/// Indices of the `n` largest `|values|`, lowest index first on ties.
pub fn top_concepts(values: &[f64], n: usize) -> Vec<ConceptValue> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.into_iter()
        .take(n)
        .map(|i| ConceptValue {
            concept: i,
            value: values[i],
        })
        .collect()
}

fn compare(model: &PrototypeModel, v: &[f64], args: &ValidateArgs) -> CliResult<(f64, PrototypeRef, Vec<ConceptValue>, DeltaSummary)> {
    let ll = model.log_likelihood(v)?;
    let component = nearest_component(model, v, AssignRule::WeightedLogLikelihood)?;
    let proto = &model.components[component];
    let delta = explain_delta(proto, v, args.similar_band)?;
    Ok((
        ll,
        PrototypeRef {
            class_id: model.class_id,
            component,
        },
        top_concepts(proto.mean(), args.top_n),
        DeltaSummary::new(&delta, args.top_n),
    ))
}

fn find(models: &[PrototypeModel], class: usize) -> CliResult<&PrototypeModel> {
    models
        .iter()
        .find(|m| m.class_id == class)
        .ok_or(CliError::Core(PcxError::MissingClass(class)))
}

/// Builds the report for `input`, explaining the predicted class.
pub fn validate(net: &Network, store: &PrototypeStore, input: &Tensor, sample_id: &str, args: &ValidateArgs) -> CliResult<ValidationReport> {
    check_percentile(args.percentile)?;
    let (layer, method_id, models) = select_models(store, args.layer, args.method)?;
    let method = method_of(&models)?;
    let predicted = net.predict(input)?;
    let model = find(&models, predicted)?;
    let raw = attribute(net, input, method, predicted, layer, args.epsilon)?;
    let v = normalize(&raw)?.to_f64();
    let (ll, prototype, top_prototype, delta) = compare(model, &v, args)?;
    let percentile = model
        .training_percentile(ll)
        .ok_or_else(|| CliError::input(format!("class {predicted} model has no training scores")))?;
    let threshold = model.training_threshold(args.percentile).expect("training scores present");
    let against = match args.against_class {
        Some(c) => {
            let other = find(&models, c)?;
            let (log_likelihood, prototype, top_prototype, delta) = compare(other, &v, args)?;
            Some(Comparison {
                class_id: c,
                log_likelihood,
                prototype,
                top_prototype,
                delta,
            })
        }
        None => None,
    };
    Ok(ValidationReport {
        sample_id: sample_id.to_string(),
        predicted_class: predicted,
        layer_index: layer,
        method: method_id,
        log_likelihood: ll,
        percentile,
        threshold_percentile: args.percentile,
        threshold_log_likelihood: threshold,
        verdict: if ll < threshold {
            Verdict::Outlier
        } else {
            Verdict::InDistribution
        },
        closest_training_index: model.closest_training_index[prototype.component],
        prototype,
        top_sample: top_concepts(&v, args.top_n),
        top_prototype,
        delta,
        against,
    })
}

fn render_deltas(d: &DeltaSummary) -> String {
    let header = ["concept", "delta", "usage", "intra"].map(String::from);
    let rows: Vec<Vec<String>> = d
        .top
        .iter()
        .map(|c| {
            vec![
                c.concept.to_string(),
                format!("{:+.4}", c.delta),
                serde_json::to_value(c.usage).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                format!("{:.4}", c.intra),
            ]
        })
        .collect();
    table::render(&header, &rows)
}

pub fn render(r: &ValidationReport) -> String {
    let mut out = format!(
        "sample {} predicted class {} (layer {}, {})\nlog-likelihood {:.4}, percentile {:.1} (threshold {:.4} at {}), verdict {}\nprototype {}/{}, squared Mahalanobis {:.4} (intra {:.4}, inter {:.4})\n",
        r.sample_id,
        r.predicted_class,
        r.layer_index,
        r.method,
        r.log_likelihood,
        r.percentile,
        r.threshold_log_likelihood,
        r.threshold_percentile,
        if r.verdict == Verdict::Outlier { "outlier" } else { "in-distribution" },
        r.prototype.class_id,
        r.prototype.component,
        r.delta.mahalanobis_sq,
        r.delta.intra_sum,
        r.delta.inter_sum,
    );
    out.push_str(&render_deltas(&r.delta));
    if let Some(a) = &r.against {
        out.push_str(&format!(
            "against class {}: log-likelihood {:.4}, prototype {}/{}\n",
            a.class_id, a.log_likelihood, a.prototype.class_id, a.prototype.component
        ));
        out.push_str(&render_deltas(&a.delta));
    }
    out
}

pub fn run(args: &ValidateArgs, _ctx: &Context) -> CliResult<String> {
    let net = Network::load(&args.net)?;
    let store = PrototypeStore::load(&args.store)?;
    let (input, id) = match (&args.sample, &args.manifest, &args.id) {
        (Some(path), _, _) => (
            Tensor::load(path)?,
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        ),
        (None, Some(manifest), Some(id)) => {
            let m = DatasetManifest::read(manifest)?;
            let sample = m
                .samples
                .iter()
                .find(|s| &s.id == id)
                .ok_or_else(|| CliError::input(format!("sample '{id}' not in {}", manifest.display())))?;
            (Tensor::load(&DatasetManifest::resolve(manifest, sample))?, id.clone())
        }
        _ => return Err(CliError::input("give --sample, or --manifest with --id")),
    };
    let report = validate(&net, &store, &input, &id, args)?;
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(render(&report))
}

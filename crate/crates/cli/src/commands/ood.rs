use std::path::PathBuf;

use clap::Args;
use pcx_core::attribution::{Method, DEFAULT_EPSILON};
use pcx_core::io::write_json;
use pcx_core::ood::{run_ood_benchmark, OodResult, OodScorer, ScorerKind, DEFAULT_TEMPERATURE};
use pcx_core::prototype::PrototypeStore;
use pcx_core::{Network, Tensor};
use serde::{Deserialize, Serialize};

use super::{method_of, select_models, write_text, Context, SplitFilter};
use crate::error::{CliError, CliResult};
use crate::manifest::{DatasetManifest, LoadedDataset};
use crate::table;

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OodArgs {
    /// Comma-separated scorers: msp, energy, mahalanobis-baseline, pcx-gmm, pcx-e.
    #[arg(long, value_delimiter = ',', default_value = "pcx-gmm")]
    pub scorer: Vec<String>,
    #[arg(long)]
    pub net: PathBuf,
    /// Prototype store (pcx-gmm, pcx-e).
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// In-distribution manifest.
    #[arg(long)]
    pub in_manifest: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub in_split: SplitFilter,
    /// Out-of-distribution manifest.
    #[arg(long)]
    pub out_manifest: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub out_split: SplitFilter,
    /// Training manifest for the Mahalanobis baseline statistics.
    #[arg(long)]
    pub train_manifest: Option<PathBuf>,
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f32,
    /// Output directory for the report and score files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodEntry {
    pub scorer: ScorerKind,
    pub auc: f64,
    pub layer_index: Option<usize>,
    pub in_count: usize,
    pub out_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub entries: Vec<OodEntry>,
    pub temperature: f64,
    pub method: Option<String>,
    pub seed: u64,
}

fn build_scorer(kind: ScorerKind, args: &OodArgs, net: &Network) -> CliResult<OodScorer> {
    Ok(match kind {
        ScorerKind::Msp => OodScorer::msp(),
        ScorerKind::Energy => OodScorer::energy(args.temperature)?,
        ScorerKind::MahalanobisBaseline => {
            let path = args
                .train_manifest
                .as_deref()
                .ok_or_else(|| CliError::input("mahalanobis-baseline needs --train-manifest"))?;
            let train = DatasetManifest::load(path, Some(pcx_core::synth::Split::Train))?;
            train.require_nonempty("training")?;
            let mut by_class: Vec<Vec<Tensor>> = vec![Vec::new(); train.class_count];
            for (s, x) in train.samples.iter().zip(&train.inputs) {
                by_class[s.label].push(x.clone());
            }
            let layer = match args.layer {
                Some(l) => l,
                None => net
                    .last_conv_layer()
                    .ok_or_else(|| CliError::input("network has no hidden layer; pass --layer"))?,
            };
            OodScorer::fit_mahalanobis(net, layer, &by_class)?
        }
        ScorerKind::PcxGmm | ScorerKind::PcxE => {
            let path = args
                .store
                .as_deref()
                .ok_or_else(|| CliError::input(format!("{} needs --store", kind.id())))?;
            let store = PrototypeStore::load(path)?;
            let (layer, _, models) = select_models(&store, args.layer, args.method)?;
            let method = method_of(&models)?;
            OodScorer::pcx(kind, models, layer, method, args.epsilon)?
        }
    })
}

fn fmt_score(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn scores_csv(ins: &LoadedDataset, outs: &LoadedDataset, r: &OodResult) -> String {
    let mut out = String::from("set,id,score\n");
    for (s, v) in ins.samples.iter().zip(&r.in_scores) {
        out.push_str(&format!("in,{},{}\n", s.id, fmt_score(*v)));
    }
    for (s, v) in outs.samples.iter().zip(&r.out_scores) {
        out.push_str(&format!("out,{},{}\n", s.id, fmt_score(*v)));
    }
    out
}

/// Counts per equal-width bin over the finite score range. Infinite scores
/// land in the outer bins.
pub fn histogram_csv(r: &OodResult, bins: usize) -> String {
    let finite: Vec<f64> = r.in_scores.iter().chain(&r.out_scores).copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if finite.is_empty() { (0.0, 1.0) } else { (lo, hi) };
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let bin = |v: f64| -> usize {
        if v.is_nan() || v == f64::NEG_INFINITY {
            0
        } else if v == f64::INFINITY {
            bins - 1
        } else {
            (((v - lo) / width) as usize).min(bins - 1)
        }
    };
    let mut counts = vec![(0usize, 0usize); bins];
    r.in_scores.iter().for_each(|&v| counts[bin(v)].0 += 1);
    r.out_scores.iter().for_each(|&v| counts[bin(v)].1 += 1);
    let mut out = String::from("lower,upper,in,out\n");
    for (i, (a, b)) in counts.into_iter().enumerate() {
        let l = lo + i as f64 * width;
        out.push_str(&format!("{l},{},{a},{b}\n", l + width));
    }
    out
}

pub fn run(args: &OodArgs, ctx: &Context) -> CliResult<String> {
    let kinds = args
        .scorer
        .iter()
        .map(|s| s.parse::<ScorerKind>())
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err(CliError::input("no scorer given"));
    }
    let net = Network::load(&args.net)?;
    let ins = DatasetManifest::load(&args.in_manifest, args.in_split.split())?;
    ins.require_nonempty("in-distribution")?;
    let outs = DatasetManifest::load(&args.out_manifest, args.out_split.split())?;
    outs.require_nonempty("out-of-distribution")?;

    let mut report = OodReport {
        entries: Vec::new(),
        temperature: args.temperature,
        method: None,
        seed: ctx.seed,
    };
    for kind in kinds {
        let scorer = build_scorer(kind, args, &net)?;
        if matches!(kind, ScorerKind::PcxGmm | ScorerKind::PcxE) {
            let store = PrototypeStore::load(args.store.as_deref().expect("checked by build_scorer"))?;
            report.method = Some(select_models(&store, args.layer, args.method)?.1);
        }
        let result = run_ood_benchmark(&net, &scorer, &ins.inputs, &outs.inputs)?;
        write_text(&args.out.join(format!("scores_{}.csv", kind.id())), &scores_csv(&ins, &outs, &result))?;
        write_text(&args.out.join(format!("histogram_{}.csv", kind.id())), &histogram_csv(&result, HISTOGRAM_BINS))?;
        report.entries.push(OodEntry {
            scorer: kind,
            auc: result.auc,
            layer_index: (!matches!(kind, ScorerKind::Msp | ScorerKind::Energy)).then(|| scorer.layer_index()),
            in_count: ins.samples.len(),
            out_count: outs.samples.len(),
        });
    }
    write_json(&args.out.join("ood_report.json"), &report)?;
    Ok(render(&report))
}

pub fn render(report: &OodReport) -> String {
    let header = ["scorer", "auc", "in", "out"].map(String::from);
    let rows: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| {
            vec![
                e.scorer.id().to_string(),
                format!("{:.4}", e.auc),
                e.in_count.to_string(),
                e.out_count.to_string(),
            ]
        })
        .collect();
    table::render(&header, &rows)
}

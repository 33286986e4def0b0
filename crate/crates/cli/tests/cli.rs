mod common;

use std::process::Command;

use common::{pcx, prepare, s, write_toy, Run};
use pcx_cli::artifacts::AttributionSet;
use pcx_cli::commands::eval::report_file;
use pcx_cli::commands::ood::OodReport;
use pcx_cli::commands::synth::TruthFile;
use pcx_cli::commands::validate::{ValidationReport, Verdict};
use pcx_cli::error::CliError;
use pcx_cli::manifest::DatasetManifest;
use pcx_core::attribution::{attribute, normalize, Flavor, Method, DEFAULT_EPSILON};
use pcx_core::eval::EvalReport;
use pcx_core::io::read_json;
use pcx_core::prototype::{
    assign_prototype, AssignRule, PrototypeComponent, PrototypeModel, PrototypeStore, Usage,
};
use pcx_core::synth::Split;
use pcx_core::{Network, PcxError, Tensor};
use tempfile::TempDir;

/// Rows are scaled to unit absolute sum in f64 and stored as f32.
const NORMALIZATION_TOL: f64 = 1e-6;
/// Same data, same arithmetic: only summation order could differ.
const MEAN_TOL: f64 = 1e-12;
const LIKELIHOOD_TOL: f64 = 1e-12;
const REGIME_AGREEMENT: f64 = 0.01;
const OUTLIER_AUC_MIN: f64 = 0.99;
const SEPARATED_COVERAGE_MIN: f64 = 0.95;
/// Sampling noise of a chance-level coverage estimate over 800 points.
const CHANCE_COVERAGE_BAND: f64 = 0.05;
/// Share of planted outliers that must fall below the 5th percentile.
const PLANTED_FLAGGED_MIN: f64 = 0.9;
/// Share of held-out inliers allowed below the 5th percentile.
const HOLDOUT_FLAGGED_MAX: f64 = 0.15;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcx"))
}

fn tmp() -> TempDir {
    tempfile::tempdir().unwrap()
}

fn wobble(i: usize, scale: f32) -> f32 {
    ((i as f32) * 1.7).sin() * scale
}

/// Two concepts; class 0 leans on concept 0 and class 1 on concept 1.
fn two_concept_toy(dir: &std::path::Path, per_class: [usize; 2]) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut inputs = Vec::new();
    for (class, &n) in per_class.iter().enumerate() {
        for i in 0..n {
            let (a, b) = (3.0 + wobble(i, 0.4), 1.0 + wobble(i + 7, 0.3));
            let x = if class == 0 { vec![a, b] } else { vec![b, a] };
            inputs.push((x, class, Split::Train));
        }
    }
    write_toy(dir, &[vec![1.0, 0.5], vec![0.5, 1.0]], &inputs)
}

fn four_sample_toy(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let inputs = vec![
        (vec![1.0, 0.5, 0.2, 0.1], 0, Split::Train),
        (vec![0.3, 2.0, 0.1, 0.4], 0, Split::Train),
        (vec![0.2, 0.1, 1.5, 0.9], 1, Split::Train),
        (vec![0.5, 0.3, 0.4, 2.2], 1, Split::Train),
    ];
    write_toy(dir, &[vec![1.0, 1.0, 0.2, 0.0], vec![0.1, 0.0, 1.0, 1.0]], &inputs)
}

#[test]
fn attribution_rows_have_unit_mass() {
    let t = tmp();
    let (net, manifest) = four_sample_toy(t.path());
    let out = t.path().join("attr");
    pcx(&["attribute", "--net", s(&net), "--manifest", s(&manifest), "--method", "lrp-eps", "--out", s(&out)]).unwrap();
    let set = AttributionSet::load(&out, 1).unwrap();
    assert_eq!(set.matrix.shape(), &[4, 4]);
    for i in 0..4 {
        let mass: f64 = set.row(i).iter().map(|v| v.abs()).sum();
        assert!((mass - 1.0).abs() <= NORMALIZATION_TOL, "row {i} mass {mass}");
    }
    assert!(set.meta.normalized);
    assert_eq!(set.meta.flavor, Flavor::Relevance);
    assert_eq!(set.meta.ids, vec!["x0", "x1", "x2", "x3"]);
}

#[test]
fn activation_methods_record_their_flavor() {
    let t = tmp();
    let (net, manifest) = four_sample_toy(t.path());
    let out = t.path().join("attr");
    pcx(&["attribute", "--net", s(&net), "--manifest", s(&manifest), "--method", "activation-sum", "--out", s(&out)])
        .unwrap();
    let set = AttributionSet::load(&out, 1).unwrap();
    assert_eq!(set.meta.flavor, Flavor::Activation);
    assert_eq!(set.meta.method, Method::ActivationSum);
}

#[test]
fn attribution_is_bitwise_repeatable() {
    let t = tmp();
    let (net, manifest) = four_sample_toy(t.path());
    for dir in ["a", "b"] {
        let out = t.path().join(dir);
        pcx(&["attribute", "--net", s(&net), "--manifest", s(&manifest), "--out", s(&out)]).unwrap();
    }
    for file in ["layer1.pcxt", "layer1.json"] {
        let a = std::fs::read(t.path().join("a").join(file)).unwrap();
        let b = std::fs::read(t.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn sidecar_and_manifest_round_trip() {
    let t = tmp();
    let r = prepare(t.path(), "3", &["--train", "10", "--holdout", "5", "--ood", "4"], "1");
    let manifest = DatasetManifest::read(&r.manifest()).unwrap();
    let again = t.path().join("copy.json");
    manifest.save(&again).unwrap();
    assert_eq!(DatasetManifest::read(&again).unwrap(), manifest);
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(r.manifest()).unwrap());

    let set = AttributionSet::load(&r.attr, 1).unwrap();
    let copy = t.path().join("attr2");
    set.save(&copy).unwrap();
    let back = AttributionSet::load(&copy, 1).unwrap();
    assert_eq!(back.meta, set.meta);
    assert_eq!(back.matrix, set.matrix);
}

#[test]
fn malformed_inputs_are_named_with_path_and_offset() {
    let t = tmp();
    let (net, manifest) = four_sample_toy(t.path());
    let text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(&manifest, text.replacen("\"label\"", "\"label\" 0,", 1)).unwrap();
    let err = pcx(&["attribute", "--net", s(&net), "--manifest", s(&manifest), "--out", s(&t.path().join("o"))])
        .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("manifest.json"), "{msg}");
    assert!(msg.contains("byte offset"), "{msg}");
    assert_eq!(err.exit_code(), 2);

    let (net, manifest) = four_sample_toy(t.path());
    std::fs::write(t.path().join("x2.pcxt"), b"PCXT\x01garbage").unwrap();
    let err = pcx(&["attribute", "--net", s(&net), "--manifest", s(&manifest), "--out", s(&t.path().join("o"))])
        .unwrap_err();
    assert!(err.to_string().contains("x2.pcxt"), "{err}");
}

#[test]
fn labels_outside_class_count_are_rejected() {
    let t = tmp();
    let (net, manifest) = four_sample_toy(t.path());
    let text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(&manifest, text.replace("\"class_count\": 2", "\"class_count\": 1")).unwrap();
    let err = pcx(&["attribute", "--net", s(&net), "--manifest", s(&manifest), "--out", s(&t.path().join("o"))])
        .unwrap_err();
    assert!(err.to_string().contains("class_count"), "{err}");
}

#[test]
fn single_prototype_is_the_class_mean() {
    let t = tmp();
    let r = prepare(t.path(), "1", &[], "1");
    let set = AttributionSet::load(&r.attr, 1).unwrap();
    let store = PrototypeStore::load(&r.store).unwrap();
    let rows = set.usable_rows(Some(Split::Train), true);
    for model in store.select(1, "lrp-eps") {
        let class_rows: Vec<usize> = rows.iter().copied().filter(|&i| set.meta.labels[i] == model.class_id).collect();
        let m = set.meta.concepts;
        let mut mean = vec![0.0; m];
        for &i in &class_rows {
            for (acc, v) in mean.iter_mut().zip(set.row(i)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= class_rows.len() as f64);
        for (a, b) in model.components[0].mean().iter().zip(&mean) {
            assert!((a - b).abs() <= MEAN_TOL, "class {}: {a} vs {b}", model.class_id);
        }
    }
}

#[test]
fn two_prototypes_recover_planted_strategies() {
    let t = tmp();
    let r = prepare(t.path(), "2", &[], "2");
    let set = AttributionSet::load(&r.attr, 1).unwrap();
    let store = PrototypeStore::load(&r.store).unwrap();
    let rows = set.usable_rows(Some(Split::Train), true);
    for model in store.select(1, "lrp-eps") {
        // strategy -> component must be a bijection on the training data
        let mut seen = std::collections::BTreeMap::new();
        for &i in rows.iter().filter(|&&i| set.meta.labels[i] == model.class_id) {
            let comp = assign_prototype(std::slice::from_ref(model), &set.row(i), AssignRule::WeightedLogLikelihood)
                .unwrap()
                .component;
            let strategy = set.meta.strategies[i].unwrap();
            assert_eq!(*seen.entry(strategy).or_insert(comp), comp, "strategy {strategy} split across components");
        }
        let comps: std::collections::BTreeSet<_> = seen.values().collect();
        assert_eq!(comps.len(), 2, "class {}", model.class_id);
    }
}

#[test]
fn closest_sample_is_nearest_to_its_prototype() {
    let t = tmp();
    let r = prepare(t.path(), "4", &[], "2");
    let set = AttributionSet::load(&r.attr, 1).unwrap();
    let store = PrototypeStore::load(&r.store).unwrap();
    let rows = set.usable_rows(Some(Split::Train), true);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    for model in &store.models {
        let class_rows: Vec<usize> = rows.iter().copied().filter(|&i| set.meta.labels[i] == model.class_id).collect();
        for (c, closest) in model.components.iter().zip(&model.closest_training_index) {
            let closest = closest.expect("recorded");
            assert!(class_rows.contains(&closest));
            let best = class_rows.iter().map(|&i| dist(&set.row(i), c.mean())).fold(f64::INFINITY, f64::min);
            assert_eq!(dist(&set.row(closest), c.mean()), best);
        }
    }
}

#[test]
fn classes_with_too_few_samples_give_a_partial_store() {
    let t = tmp();
    let (net, manifest) = two_concept_toy(t.path(), [8, 2]);
    let attr = t.path().join("attr");
    let store_dir = t.path().join("store");
    pcx(&["attribute", "--net", s(&net), "--manifest", s(&manifest), "--out", s(&attr)]).unwrap();
    let err = pcx(&["fit", "--attributions", s(&attr), "--k", "3", "--out", s(&store_dir)]).unwrap_err();
    assert!(matches!(err, CliError::PartialFit { .. }));
    assert!(err.to_string().contains("class 1"), "{err}");
    assert_eq!(err.exit_code(), 2);
    let store = PrototypeStore::load(&store_dir).unwrap();
    assert_eq!(store.models.len(), 1);
    assert_eq!(store.models[0].class_id, 0);
    assert_eq!(store.failures.len(), 1);
    let index: serde_json::Value = read_json(&store_dir.join("index.json")).unwrap();
    assert_eq!(index["partial"], true);

    let out = bin()
        .args(["fit", "--attributions", s(&attr), "--k", "3", "--out", s(&t.path().join("s2"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("class 1"));
}

fn validate(r: &Run, id: &str, extra: &[&str]) -> ValidationReport {
    let out = r.data.join(format!("report_{id}.json"));
    let net = r.net();
    let mut args = vec![
        "validate",
        "--net",
        s(&net),
        "--store",
        s(&r.store),
        "--id",
        id,
        "--out",
        s(&out),
    ];
    let manifest = r.manifest();
    args.extend_from_slice(&["--manifest", s(&manifest)]);
    args.extend_from_slice(extra);
    pcx(&args).unwrap();
    read_json(&out).unwrap()
}

#[test]
fn sample_at_a_prototype_mean_is_typical() {
    let t = tmp();
    // one prototype per planted strategy, so each mean sits inside a cluster
    let r = prepare(t.path(), "5", &[], "2");
    let set = AttributionSet::load(&r.attr, 1).unwrap();
    let store = PrototypeStore::load(&r.store).unwrap();
    for model in &store.models {
        let row = model.closest_training_index[0].unwrap();
        let rep = validate(&r, &set.meta.ids[row], &[]);
        assert_eq!(rep.predicted_class, model.class_id);
        assert_eq!(rep.prototype.component, 0);
        assert!(rep.percentile >= 50.0, "percentile {}", rep.percentile);
        assert_eq!(rep.verdict, Verdict::InDistribution);
        assert!(rep.delta.top.iter().all(|d| d.usage == Usage::Similar), "{:?}", rep.delta.top);
        assert_eq!(rep.closest_training_index, Some(row));
    }
}

#[test]
fn planted_outliers_fall_below_the_threshold() {
    let t = tmp();
    let r = prepare(t.path(), "6", &[], "1");
    let manifest = DatasetManifest::read(&r.manifest()).unwrap();
    let share = |split: Split| {
        let ids: Vec<&str> = manifest.samples.iter().filter(|x| x.split == split).map(|x| x.id.as_str()).collect();
        let flagged = ids.iter().filter(|id| validate(&r, id, &[]).verdict == Verdict::Outlier).count();
        flagged as f64 / ids.len() as f64
    };
    let planted = share(Split::Ood);
    assert!(planted >= PLANTED_FLAGGED_MIN, "flagged {planted}");
    let holdout = share(Split::Holdout);
    assert!(holdout <= HOLDOUT_FLAGGED_MAX, "flagged {holdout}");
}

#[test]
fn report_likelihood_matches_the_library() {
    let t = tmp();
    let r = prepare(t.path(), "7", &[], "2");
    let net = Network::load(&r.net()).unwrap();
    let store = PrototypeStore::load(&r.store).unwrap();
    let manifest = DatasetManifest::read(&r.manifest()).unwrap();
    for sample in manifest.samples.iter().step_by(37) {
        let rep = validate(&r, &sample.id, &[]);
        let x = Tensor::load(&DatasetManifest::resolve(&r.manifest(), sample)).unwrap();
        let class = net.predict(&x).unwrap();
        let v = normalize(&attribute(&net, &x, Method::LrpEps, class, 1, DEFAULT_EPSILON).unwrap()).unwrap().to_f64();
        let ll = store.class_model(class, Some(1)).unwrap().log_likelihood(&v).unwrap();
        assert!((rep.log_likelihood - ll).abs() <= LIKELIHOOD_TOL * ll.abs().max(1.0));
        assert!((0.0..=100.0).contains(&rep.percentile));
        assert_eq!(rep.verdict == Verdict::Outlier, rep.log_likelihood < rep.threshold_log_likelihood);
    }
}

#[test]
fn counterfactual_delta_flips_on_the_discriminative_concept() {
    let t = tmp();
    let (net, manifest) = two_concept_toy(t.path(), [20, 20]);
    let attr = t.path().join("attr");
    let store = t.path().join("store");
    pcx(&["attribute", "--net", s(&net), "--manifest", s(&manifest), "--out", s(&attr)]).unwrap();
    pcx(&["fit", "--attributions", s(&attr), "--k", "1", "--out", s(&store)]).unwrap();
    let report = |id: &str, other: &str| -> ValidationReport {
        let out = t.path().join(format!("{id}.json"));
        pcx(&[
            "validate", "--net", s(&net), "--store", s(&store), "--manifest", s(&manifest), "--id", id,
            "--against-class", other, "--top-n", "2", "--out", s(&out),
        ])
        .unwrap();
        read_json(&out).unwrap()
    };
    let concept0 = |d: &pcx_cli::commands::validate::DeltaSummary| d.top.iter().find(|c| c.concept == 0).unwrap().delta;
    // x0 is a class-0 sample, x20 a class-1 sample
    let a = report("x0", "1");
    let b = report("x20", "0");
    assert_eq!((a.predicted_class, b.predicted_class), (0, 1));
    let (own_a, cf_a) = (concept0(&a.delta), concept0(&a.against.as_ref().unwrap().delta));
    let (own_b, cf_b) = (concept0(&b.delta), concept0(&b.against.as_ref().unwrap().delta));
    assert!(cf_a > 0.0 && cf_b < 0.0, "{cf_a} {cf_b}");
    assert!(cf_a.abs() > 10.0 * own_a.abs() && cf_b.abs() > 10.0 * own_b.abs());
    let usage0 = a.against.as_ref().unwrap().delta.top.iter().find(|c| c.concept == 0).unwrap().usage;
    assert_eq!(usage0, Usage::Overused);
}

#[test]
fn missing_class_in_store_is_an_input_error() {
    let t = tmp();
    let r = prepare(t.path(), "8", &["--train", "20", "--holdout", "5", "--ood", "0"], "1");
    let mut store = PrototypeStore::load(&r.store).unwrap();
    store.models.retain(|m| m.class_id == 0);
    let only0 = t.path().join("only0");
    store.save(&only0).unwrap();
    let set = AttributionSet::load(&r.attr, 1).unwrap();
    let row = (0..set.len()).find(|&i| set.meta.predictions[i] == 1).unwrap();
    let err = pcx(&[
        "validate", "--net", s(&r.net()), "--store", s(&only0), "--manifest", s(&r.manifest()), "--id",
        &set.meta.ids[row],
    ])
    .unwrap_err();
    assert!(matches!(err, CliError::Core(PcxError::MissingClass(1))), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn sparseness_of_one_hot_prototypes_is_one_half() {
    let t = tmp();
    let models = (0..4)
        .map(|c| {
            let mut mean = vec![0.0; 4];
            mean[c] = 1.0;
            let mut m = PrototypeModel::from_components(c, vec![PrototypeComponent::isotropic(1.0, mean, 0.1).unwrap()])
                .unwrap();
            m.layer_index = 1;
            m.method = "lrp-eps".into();
            m
        })
        .collect();
    let store = t.path().join("store");
    PrototypeStore::new(models).save(&store).unwrap();
    let out = t.path().join("reports");
    let table = pcx(&["eval", "--metric", "sparseness", "--store", s(&store), "--out", s(&out)]).unwrap();
    let rep: EvalReport = read_json(&out.join("sparseness_lrp-eps.json")).unwrap();
    assert!((rep.aggregate - 0.5).abs() < 1e-12, "{}", rep.aggregate);
    assert!(table.contains("0.500 ± 0.000"), "{table}");
}

#[test]
fn regimes_agree_on_isotropic_data() {
    let t = tmp();
    let r = prepare(t.path(), "9", &[], "1");
    let out = t.path().join("reports");
    pcx(&["eval", "--metric", "clustering-compare", "--attributions", s(&r.attr), "--out", s(&out)]).unwrap();
    for name in ["coverage", "outlier"] {
        let scores: Vec<f64> = ["kmeans-euclid", "gmm-euclid", "gmm-loglik"]
            .iter()
            .map(|regime| {
                let rep: EvalReport = read_json(&out.join(format!("{name}_{regime}_lrp-eps.json"))).unwrap();
                rep.aggregate
            })
            .collect();
        let spread = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - scores.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= REGIME_AGREEMENT, "{name}: {scores:?}");
    }
}

#[test]
fn outlier_metric_on_separated_data() {
    let t = tmp();
    let r = prepare(t.path(), "10", &[], "1");
    let out = t.path().join("reports");
    pcx(&["eval", "--metric", "outlier", "--attributions", s(&r.attr), "--out", s(&out)]).unwrap();
    let rep: EvalReport = read_json(&out.join("outlier_lrp-eps.json")).unwrap();
    assert!(rep.aggregate >= OUTLIER_AUC_MIN, "{}", rep.aggregate);
    assert_eq!(rep.layers.len(), 1);
}

#[test]
fn eval_reports_round_trip_and_fill_the_table() {
    let t = tmp();
    let r = prepare(t.path(), "11", &[], "2");
    let out = t.path().join("reports");
    for metric in ["coverage", "stability", "sparseness", "faithfulness"] {
        pcx(&[
            "eval", "--metric", metric, "--attributions", s(&r.attr), "--store", s(&r.store), "--net", s(&r.net()),
            "--manifest", s(&r.manifest()), "--out", s(&out),
        ])
        .unwrap();
    }
    for metric in ["coverage", "stability", "sparseness", "faithfulness"] {
        let path = out.join(format!("{metric}_lrp-eps.json"));
        let rep: EvalReport = read_json(&path).unwrap();
        assert_eq!(report_file(&rep), format!("{metric}_lrp-eps.json"));
        let text = serde_json::to_string_pretty(&rep).unwrap() + "\n";
        assert_eq!(text.as_bytes(), std::fs::read(&path).unwrap().as_slice());
    }
    let table = pcx(&["eval", "--render", s(&out)]).unwrap();
    let header = table.lines().next().unwrap();
    let cols: Vec<&str> = header.split_whitespace().collect();
    assert_eq!(cols, ["method", "faithfulness", "stability", "sparseness", "coverage"]);
    assert!(table.lines().nth(2).unwrap().starts_with("lrp-eps"));
}

#[test]
fn unknown_metric_lists_the_valid_ones() {
    let out = bin().args(["eval", "--metric", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for m in ["faithfulness", "stability", "sparseness", "coverage", "outlier", "clustering-compare"] {
        assert!(err.contains(m), "{err}");
    }

    let t = tmp();
    let cfg = t.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"eval": {"metric": "bogus"}}"#).unwrap();
    let out = bin().args(["--config", s(&cfg), "eval", "--metric", "coverage"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("clustering-compare") && err.contains("faithfulness"), "{err}");
}

#[test]
fn ood_writes_report_and_score_files() {
    let t = tmp();
    let r = prepare(t.path(), "12", &[], "1");
    let out = t.path().join("ood");
    let grid = pcx(&[
        "ood", "--scorer", "msp,energy,pcx-gmm,pcx-e,mahalanobis-baseline", "--net", s(&r.net()), "--store",
        s(&r.store), "--in-manifest", s(&r.split("holdout")), "--out-manifest", s(&r.split("ood")),
        "--train-manifest", s(&r.split("train")), "--out", s(&out),
    ])
    .unwrap();
    let rep: OodReport = read_json(&out.join("ood_report.json")).unwrap();
    assert_eq!(rep.entries.len(), 5);
    for e in &rep.entries {
        assert!((0.0..=1.0).contains(&e.auc));
        assert_eq!((e.in_count, e.out_count), (200, 20));
        let scores = std::fs::read_to_string(out.join(format!("scores_{}.csv", e.scorer.id()))).unwrap();
        assert_eq!(scores.lines().count(), 221);
        let hist = std::fs::read_to_string(out.join(format!("histogram_{}.csv", e.scorer.id()))).unwrap();
        let totals = hist.lines().skip(1).fold((0, 0), |(a, b), l| {
            let f: Vec<&str> = l.split(',').collect();
            (a + f[2].parse::<usize>().unwrap(), b + f[3].parse::<usize>().unwrap())
        });
        assert_eq!(totals, (200, 20));
    }
    assert!(grid.contains("pcx-gmm"));
}

#[test]
fn ood_on_an_empty_manifest_is_an_input_error() {
    let t = tmp();
    let r = prepare(t.path(), "13", &["--train", "10", "--holdout", "5", "--ood", "0"], "1");
    let out = bin()
        .args([
            "ood", "--scorer", "msp", "--net", s(&r.net()), "--in-manifest", s(&r.split("holdout")),
            "--out-manifest", s(&r.split("ood")), "--out", s(&t.path().join("ood")),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no samples"));
}

#[test]
fn similarity_csv_is_symmetric_with_unit_diagonal() {
    let t = tmp();
    let r = prepare(t.path(), "14", &["--classes-per-family", "3"], "2");
    let csv_path = t.path().join("sim.csv");
    pcx(&["similarity", "--store", s(&r.store), "--out", s(&csv_path)]).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "class,0,1,2");
    let m: Vec<Vec<f64>> = lines[1..]
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[0], i.to_string());
            f[1..].iter().map(|v| v.parse().unwrap()).collect()
        })
        .collect();
    for (i, row) in m.iter().enumerate() {
        assert_eq!(row[i], 1.0);
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, m[j][i]);
        }
    }
}

#[test]
fn zero_norm_prototype_is_a_numerical_failure() {
    let t = tmp();
    let models = [vec![0.0, 0.0], vec![1.0, 0.0]]
        .into_iter()
        .enumerate()
        .map(|(c, mean)| {
            let mut m = PrototypeModel::from_components(c, vec![PrototypeComponent::isotropic(1.0, mean, 1.0).unwrap()])
                .unwrap();
            m.method = "lrp-eps".into();
            m
        })
        .collect();
    let store = t.path().join("store");
    PrototypeStore::new(models).save(&store).unwrap();
    let out = bin().args(["similarity", "--store", s(&store), "--out", s(&t.path().join("s.csv"))]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let diag: serde_json::Value = serde_json::from_slice(&out.stderr).expect("JSON diagnostic");
    assert_eq!(diag["error"], "numerical");
    assert_eq!(diag["command"], "similarity");
    assert!(diag["message"].as_str().unwrap().contains("class 0"));
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let t = tmp();
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|d| t.path().join(d)).collect();
    for (dir, seed) in dirs.iter().zip(["5", "5", "6"]) {
        pcx(&["--seed", seed, "synth", "--train", "10", "--holdout", "4", "--ood", "3", "--out", s(dir)]).unwrap();
    }
    let read = |d: &std::path::Path, f: &str| std::fs::read(d.join(f)).unwrap();
    for f in ["manifest.json", "truth.json", "net.json", "samples/s00000.pcxt", "samples/s00050.pcxt"] {
        assert_eq!(read(&dirs[0], f), read(&dirs[1], f), "{f}");
    }
    assert_ne!(read(&dirs[0], "samples/s00000.pcxt"), read(&dirs[2], "samples/s00000.pcxt"));
    let truth: TruthFile = read_json(&dirs[0].join("truth.json")).unwrap();
    assert_eq!(truth.config.seed, 5);
    let text = serde_json::to_string_pretty(&truth).unwrap() + "\n";
    assert_eq!(text.into_bytes(), read(&dirs[0], "truth.json"));
}

fn coverage_of(t: &TempDir, synth: &[&str]) -> f64 {
    let r = prepare(t.path(), "15", synth, "1");
    let out = t.path().join("reports");
    pcx(&["eval", "--metric", "coverage", "--attributions", s(&r.attr), "--out", s(&out)]).unwrap();
    read_json::<EvalReport>(&out.join("coverage_lrp-eps.json")).unwrap().aggregate
}

#[test]
fn zero_separation_gives_chance_coverage() {
    let t = tmp();
    let c = coverage_of(
        &t,
        &["--classes-per-family", "1", "--strategies-per-class", "4", "--separation", "0", "--train", "200", "--holdout", "200"],
    );
    assert!((c - 0.25).abs() <= CHANCE_COVERAGE_BAND, "coverage {c}");
}

#[test]
fn separated_strategies_are_covered() {
    let t = tmp();
    let c = coverage_of(&t, &["--strategies-per-class", "4", "--dim", "16"]);
    assert!(c >= SEPARATED_COVERAGE_MIN, "coverage {c}");
}

#[test]
fn config_file_overrides_flags() {
    let t = tmp();
    let cfg = t.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 21, "threads": 2, "dim": 6, "synth": {"ood": 2}, "fit": {"k": 9}}"#).unwrap();
    let out = t.path().join("d");
    pcx(&["--config", s(&cfg), "--seed", "1", "synth", "--dim", "4", "--out", s(&out)]).unwrap();
    let truth: TruthFile = read_json(&out.join("truth.json")).unwrap();
    assert_eq!((truth.config.seed, truth.config.dim, truth.config.ood_count), (21, 6, 2));

    std::fs::write(&cfg, r#"{"dimm": 6}"#).unwrap();
    let err = pcx(&["--config", s(&cfg), "synth", "--out", s(&out)]).unwrap_err();
    assert!(err.to_string().contains("dimm"));
}

#[test]
fn relmax_and_outlier_clusters() {
    let t = tmp();
    let r = prepare(t.path(), "16", &[], "1");
    let out = t.path().join("relmax.json");
    pcx(&["relmax", "--attributions", s(&r.attr), "--layer", "1", "--concept", "2", "--k", "4", "--out", s(&out)])
        .unwrap();
    let rep: pcx_cli::commands::relmax::RelmaxReport = read_json(&out).unwrap();
    let set = AttributionSet::load(&r.attr, 1).unwrap();
    let top = (0..set.len()).map(|i| set.row(i)[2]).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(rep.samples.len(), 4);
    assert_eq!(rep.samples[0].relevance, top);
    assert!(rep.samples.windows(2).all(|w| w[0].relevance >= w[1].relevance));

    let out = t.path().join("clusters.json");
    pcx(&[
        "outlier-clusters", "--attributions", s(&r.attr), "--store", s(&r.store), "--class", "1", "--percentile", "10",
        "--k", "2", "--out", s(&out),
    ])
    .unwrap();
    let rep: pcx_cli::commands::outliers::OutlierClustersReport = read_json(&out).unwrap();
    assert!(!rep.outliers.is_empty());
    let grouped: usize = rep.clusters.iter().map(Vec::len).sum();
    assert_eq!(grouped, rep.outliers.len());
}

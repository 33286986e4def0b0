//! Acceptance checks. Each returns an [`Outcome`] instead of panicking so a
//! runner can report every criterion, pass or fail.

use std::time::{Duration, Instant};

use pcx_core::attribution::{
    attribute_batch, concept_heatmap, input_x_gradient, lrp_epsilon, lrp_heatmap, normalize, Method,
    DEFAULT_EPSILON,
};
use pcx_core::eval::{
    compare_clusterings, coverage, coverage_with_models, fit_strategy_models, hungarian, outlier_auc,
    outlier_detection, sparseness, Regime, StrategyOptions,
};
use pcx_core::ood::{run_ood_benchmark, OodScorer, ScorerKind};
use pcx_core::prototype::{fit_gmm, AssignRule, FitOptions, PrototypeComponent, PrototypeModel, DEFAULT_REG};
use pcx_core::synth::{
    distractor_scenario, overlap_scenario, planted_outliers, strategy_points, DistractorConfig, Split,
    SynthConfig, SynthDataset, CONCEPT_LAYER,
};
use pcx_core::{Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brute::{assignment_minimum, pair_auc};
use crate::nets::{normal, random_conv, random_dense, random_input, to_f64};
use crate::quad::{simpson_1d, simpson_2d};
use crate::reference::{finite_difference, forward};

pub const CONSERVATION_TOL: f64 = 1e-4;
pub const EQUIVALENCE_TOL: f64 = 1e-4;
pub const GRADIENT_TOL: f64 = 1e-3;
/// Denominator floor for elementwise gradient errors, relative to the
/// largest finite-difference magnitude of the same vector.
pub const GRADIENT_FLOOR: f64 = 1e-5;
/// Minimum share of gradient coordinates that must be checkable (not
/// straddling a ReLU kink or max-pool switch).
pub const GRADIENT_COVERED: f64 = 0.9;
pub const COMPLETENESS_TOL: f64 = 1e-4;
pub const EM_SLACK: f64 = 1e-7;
pub const CLOSED_FORM_TOL: f64 = 1e-12;
pub const DENSITY_TOL: f64 = 1e-3;
pub const ASSIGNMENT_TOL: f64 = 1e-9;
pub const AUC_TOL: f64 = 1e-12;
pub const COVERAGE_SEPARATED_MIN: f64 = 0.95;
pub const COVERAGE_MIXED_MAX: f64 = 0.20;
pub const PLANTED_AUC_MIN: f64 = 0.99;
pub const EXCHANGEABLE_AUC_BAND: f64 = 0.05;
pub const CLUSTERING_SLACK: f64 = 0.02;
pub const OOD_MARGIN: f64 = 0.05;
pub const RUNTIME_LIMIT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn dense_nets(count: usize, seed: u64) -> Vec<(Network, Tensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let net = random_dense(&mut rng, 4, 64, false);
            let x = random_input(&mut rng, &net);
            (net, x)
        })
        .collect()
}

/// Hidden layers whose outputs can serve as concept layers.
fn hidden_layers(net: &Network) -> std::ops::Range<usize> {
    0..net.len() - 1
}

pub fn lrp_conservation() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for (net, x) in dense_nets(100, 11) {
        let logits = net.forward(&x).expect("forward");
        let k = pcx_core::net::argmax(logits.logits());
        let yk = logits.logits()[k] as f64;
        for l in hidden_layers(&net) {
            let nu = lrp_epsilon(&net, &x, k, l, DEFAULT_EPSILON).expect("lrp");
            let total: f64 = nu.values.iter().map(|&v| v as f64).sum();
            worst = worst.max((total - yk).abs() / yk.abs());
            checks += 1;
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        "lrp-conservation",
        worst <= CONSERVATION_TOL && elapsed < RUNTIME_LIMIT,
        format!("{checks} layer checks on 100 nets, worst |sum - y|/|y| = {worst:.2e} (tol {CONSERVATION_TOL:.0e}), {:.2}s", elapsed.as_secs_f64()),
    )
}

pub fn attribution_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut checks = 0;
    for (net, x) in dense_nets(100, 11) {
        let k = net.predict(&x).expect("predict");
        for l in hidden_layers(&net) {
            let a = lrp_epsilon(&net, &x, k, l, DEFAULT_EPSILON).expect("lrp").to_f64();
            let b = input_x_gradient(&net, &x, k, l).expect("ixg").to_f64();
            worst = worst.max(rel_inf(&a, &b));
            checks += 1;
        }
    }
    Outcome::new(
        "attribution-equivalence",
        worst <= EQUIVALENCE_TOL,
        format!("{checks} layer checks, worst max|lrp - ixg| / max|ixg| = {worst:.2e} (tol {EQUIVALENCE_TOL:.0e})"),
    )
}

pub fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0usize, 0usize);
    for i in 0..50 {
        let net = if i % 2 == 0 {
            random_dense(&mut rng, 4, 64, true)
        } else {
            random_conv(&mut rng, true)
        };
        // keep the engine and the reference on the same linear piece
        let x = loop {
            let x = random_input(&mut rng, &net);
            if forward(&net, &to_f64(&x)).margin > 1e-3 {
                break x;
            }
        };
        let class = rng.random_range(0..net.class_count());
        for l in 0..net.len() {
            let g = to_f64(&net.grad_wrt_layer(&x, l, class).expect("grad"));
            let fd = finite_difference(&net, &to_f64(&x), l, class, 1e-4);
            let scale = fd.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
            for (gi, fi) in g.iter().zip(&fd) {
                match fi {
                    Some(f) => {
                        let denom = f.abs().max(GRADIENT_FLOOR * scale);
                        let err = if denom == 0.0 { gi.abs() } else { (gi - f).abs() / denom };
                        worst = worst.max(err);
                        checked += 1;
                    }
                    None => skipped += 1,
                }
            }
        }
    }
    let covered = checked as f64 / (checked + skipped) as f64;
    Outcome::new(
        "gradient-oracle",
        worst <= GRADIENT_TOL && covered >= GRADIENT_COVERED,
        format!("50 nets, {checked} coordinates ({:.1}% checkable), worst relative error {worst:.2e} (tol {GRADIENT_TOL:.0e})", covered * 100.0),
    )
}

pub fn crp_completeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let net = if i % 2 == 0 {
            random_dense(&mut rng, 4, 64, true)
        } else {
            random_conv(&mut rng, true)
        };
        let x = random_input(&mut rng, &net);
        let k = net.predict(&x).expect("predict");
        let full = to_f64(&lrp_heatmap(&net, &x, k, DEFAULT_EPSILON).expect("heatmap").values);
        for l in hidden_layers(&net) {
            let channels = net.output_shape(l)[0];
            let mut sum = vec![0.0f64; full.len()];
            for c in 0..channels {
                let h = concept_heatmap(&net, &x, k, l, c).expect("concept heatmap");
                sum.iter_mut().zip(h.values.data()).for_each(|(s, &v)| *s += v as f64);
            }
            worst = worst.max(rel_inf(&sum, &full));
        }
    }
    Outcome::new(
        "crp-completeness",
        worst <= COMPLETENESS_TOL,
        format!("50 nets, worst max|sum of concept maps - full map| / max|full map| = {worst:.2e} (tol {COMPLETENESS_TOL:.0e})"),
    )
}

fn random_mixture_points(rng: &mut ChaCha8Rng, n: usize, m: usize, clusters: usize) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..clusters).map(|_| (0..m).map(|_| 3.0 * normal(rng)).collect()).collect();
    let mixing: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..m * m).map(|_| normal(rng)).collect())
        .collect();
    (0..n)
        .map(|_| {
            let c = rng.random_range(0..clusters);
            let z: Vec<f64> = (0..m).map(|_| normal(rng)).collect();
            (0..m)
                .map(|i| centers[c][i] + 0.3 * z[i] + (0..m).map(|j| mixing[c][i * m + j] * z[j]).sum::<f64>())
                .collect()
        })
        .collect()
}

pub fn em_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst_drop = 0.0f64;
    for d in 0..50 {
        let m = rng.random_range(1..=5);
        let n = rng.random_range(60..=200);
        let clusters = rng.random_range(1..=4);
        let pts = random_mixture_points(&mut rng, n, m, clusters);
        let k = rng.random_range(1..=4);
        let model = fit_gmm(&pts, &FitOptions::new(k, d)).expect("fit");
        let trace = &model.fit.as_ref().expect("fit info").log_likelihood_trace;
        for w in trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    // k = 1 against the closed form, ridge included
    let mut worst_closed = 0.0f64;
    for d in 0..10 {
        let m = rng.random_range(1..=5);
        let pts = random_mixture_points(&mut rng, 80, m, 2);
        let model = fit_gmm(&pts, &FitOptions::new(1, d)).expect("fit");
        let n = pts.len() as f64;
        let mean: Vec<f64> = (0..m).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                cov[i * m + j] = pts.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).sum::<f64>() / n;
            }
        }
        let ridge = DEFAULT_REG * (0..m).map(|i| cov[i * m + i]).sum::<f64>() / m as f64;
        (0..m).for_each(|i| cov[i * m + i] += ridge);
        let c = &model.components[0];
        worst_closed = worst_closed.max(rel_inf(c.mean(), &mean)).max(rel_inf(c.covariance(), &cov));
    }
    Outcome::new(
        "em-monotonicity",
        worst_drop <= EM_SLACK && worst_closed <= CLOSED_FORM_TOL,
        format!("50 fits, largest per-iteration drop {worst_drop:.2e} (slack {EM_SLACK:.0e}); k=1 closed-form relative deviation {worst_closed:.2e}"),
    )
}

pub fn density_normalization() -> Outcome {
    let one = PrototypeModel::from_components(
        0,
        vec![
            PrototypeComponent::new(0.2, vec![-3.0], vec![0.5]).unwrap(),
            PrototypeComponent::new(0.5, vec![1.0], vec![2.0]).unwrap(),
            PrototypeComponent::new(0.3, vec![4.0], vec![0.7]).unwrap(),
        ],
    )
    .unwrap();
    let i1 = simpson_1d(|x| one.log_likelihood(&[x]).unwrap().exp(), -25.0, 25.0, 4001);
    let two = PrototypeModel::from_components(
        0,
        vec![
            PrototypeComponent::new(0.6, vec![0.0, 1.0], vec![1.0, 0.6, 0.6, 2.0]).unwrap(),
            PrototypeComponent::new(0.4, vec![2.5, -1.0], vec![0.8, -0.3, -0.3, 0.5]).unwrap(),
        ],
    )
    .unwrap();
    let i2 = simpson_2d(|x, y| two.log_likelihood(&[x, y]).unwrap().exp(), (-10.0, 12.0), (-11.0, 12.0), 401);
    let ok = (i1 - 1.0).abs() <= DENSITY_TOL && (i2 - 1.0).abs() <= DENSITY_TOL;
    Outcome::new(
        "density-normalization",
        ok,
        format!("1-D integral {i1:.6}, 2-D integral {i2:.6} (tol {DENSITY_TOL:.0e})"),
    )
}

pub fn hungarian_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let mut worst = 0.0f64;
    let mut bijective = true;
    for t in 0..200 {
        let n = rng.random_range(1..=7);
        let m = rng.random_range(n..=7);
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        if t % 2 == 0 {
                            rng.random_range(0..5) as f64
                        } else {
                            rng.random::<f64>() * 10.0 - 3.0
                        }
                    })
                    .collect()
            })
            .collect();
        let a = hungarian(&cost).expect("hungarian");
        let mut cols = a.columns.clone();
        cols.sort_unstable();
        cols.dedup();
        bijective &= cols.len() == n;
        worst = worst.max((a.cost - assignment_minimum(&cost)).abs());
    }
    Outcome::new(
        "hungarian-oracle",
        worst <= ASSIGNMENT_TOL && bijective,
        format!("200 matrices up to 7x7, worst |cost - brute force| = {worst:.2e}, injective = {bijective}"),
    )
}

pub fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let mut worst = 0.0f64;
    for t in 0..200 {
        let (a, b) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k)
                .map(|_| if t % 2 == 0 { rng.random_range(0..6) as f64 } else { normal(&mut rng) })
                .collect()
        };
        let (ins, outs) = (draw(a), draw(b));
        worst = worst.max((outlier_auc(&ins, &outs).unwrap() - pair_auc(&ins, &outs)).abs());
    }
    Outcome::new(
        "auc-oracle",
        worst <= AUC_TOL,
        format!("200 score sets, worst |rank AUC - pair count| = {worst:.2e}"),
    )
}

fn coverage_config(separation: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        families: 2,
        classes_per_family: 2,
        strategies_per_class: 2,
        dim: 16,
        separation,
        anisotropy: 1.0,
        train_per_strategy: 200,
        holdout_per_strategy: 200,
        ood_count: 0,
        seed,
    }
}

pub fn coverage_separation() -> Outcome {
    let start = Instant::now();
    let run = |sep: f64| {
        let (train, test) = strategy_points(&coverage_config(sep, 7)).unwrap();
        coverage(&train, &test, 7).unwrap().accuracy
    };
    let (hi, lo) = (run(8.0), run(0.0));
    let elapsed = start.elapsed();
    Outcome::new(
        "coverage",
        hi >= COVERAGE_SEPARATED_MIN && lo <= COVERAGE_MIXED_MAX && elapsed < RUNTIME_LIMIT,
        format!("8 strategies, m=16: separation 8 -> {hi:.4} (min {COVERAGE_SEPARATED_MIN}), separation 0 -> {lo:.4} (max {COVERAGE_MIXED_MAX}), {:.2}s", elapsed.as_secs_f64()),
    )
}

pub fn outlier_detection_planted() -> Outcome {
    // one class holding all strategies, one prototype per strategy
    let cfg = SynthConfig {
        families: 1,
        classes_per_family: 1,
        strategies_per_class: 4,
        dim: 16,
        separation: 8.0,
        train_per_strategy: 250,
        holdout_per_strategy: 250,
        ..SynthConfig::default()
    };
    let (train, test) = strategy_points(&cfg).unwrap();
    let train: Vec<Vec<f64>> = train.concat();
    let test: Vec<Vec<f64>> = test.concat();
    let model = fit_gmm(&train, &FitOptions::new(4, 3)).unwrap();
    let score = |pts: &[Vec<f64>]| pts.iter().map(|p| model.log_likelihood(p).unwrap()).collect::<Vec<_>>();
    let planted = planted_outliers(&cfg, 1000, 8.0, 99).unwrap();
    let auc_planted = outlier_auc(&score(&test), &score(&planted)).unwrap();
    // exchangeable: a second draw from the same distribution
    let (fresh, _) = strategy_points(&SynthConfig { seed: 1234, ..cfg.clone() }).unwrap();
    let auc_same = outlier_auc(&score(&test), &score(&fresh.concat())).unwrap();
    Outcome::new(
        "outlier-detection",
        auc_planted >= PLANTED_AUC_MIN && (auc_same - 0.5).abs() <= EXCHANGEABLE_AUC_BAND,
        format!("planted 8 sd outliers AUC {auc_planted:.4} (min {PLANTED_AUC_MIN}); same distribution AUC {auc_same:.4} (0.5 +- {EXCHANGEABLE_AUC_BAND}) at 1000 vs 1000"),
    )
}

pub fn clustering_ordering() -> Outcome {
    let cfg = SynthConfig {
        anisotropy: 25.0,
        separation: 8.0,
        ..coverage_config(8.0, 17)
    };
    let (train, test) = strategy_points(&cfg).unwrap();
    let scores = compare_clusterings(&train, &test, 1, 17).unwrap();
    let cov = |r: Regime| scores.iter().find(|s| s.regime == r).unwrap().coverage;
    let (km, ge, gl) = (cov(Regime::KmeansEuclid), cov(Regime::GmmEuclid), cov(Regime::GmmLoglik));
    Outcome::new(
        "clustering-ordering",
        gl >= ge && ge >= km - CLUSTERING_SLACK,
        format!("variance ratio 25:1 coverage: gmm-loglik {gl:.4} >= gmm-euclid {ge:.4} >= kmeans-euclid {km:.4} - {CLUSTERING_SLACK}"),
    )
}

/// Normalized concept vectors of the correctly predicted samples of a
/// split, grouped by strategy.
pub fn concept_sets(ds: &SynthDataset, method: Method, split: Split, strategies: usize) -> Vec<Vec<Vec<f64>>> {
    let samples: Vec<_> = ds
        .split(split)
        .filter(|s| ds.net.predict(&s.input).unwrap() == s.label)
        .collect();
    let inputs: Vec<Tensor> = samples.iter().map(|s| s.input.clone()).collect();
    let classes: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let vecs = attribute_batch(&ds.net, &inputs, &classes, method, CONCEPT_LAYER, DEFAULT_EPSILON).unwrap();
    let mut out = vec![Vec::new(); strategies];
    for (s, v) in samples.iter().zip(vecs) {
        out[s.strategy.expect("labelled")].push(normalize(&v).unwrap().to_f64());
    }
    out
}

pub fn relevance_beats_activation() -> Outcome {
    let cfg = DistractorConfig::default();
    let ds = distractor_scenario(&cfg).unwrap();
    let strategies = cfg.classes * cfg.strategies_per_class;
    let opts = StrategyOptions {
        seed: 5,
        ..StrategyOptions::default()
    };
    let measure = |method: Method| {
        let train = concept_sets(&ds, method, Split::Train, strategies);
        let test = concept_sets(&ds, method, Split::Holdout, strategies);
        let models = fit_strategy_models(&train, &opts, Regime::GmmLoglik).unwrap();
        let cov = coverage_with_models(&models, &test, AssignRule::WeightedLogLikelihood).unwrap().accuracy;
        let auc = outlier_detection(&models, &test, Regime::GmmLoglik).unwrap().auc;
        let sp = models.iter().map(|m| sparseness(m).unwrap()).sum::<f64>() / models.len() as f64;
        (cov, auc, sp)
    };
    let (rc, ra, rs) = measure(Method::LrpEps);
    let (ac, aa, as_) = measure(Method::ActivationSum);
    Outcome::new(
        "relevance-vs-activation",
        rc > ac && ra > aa && rs > as_,
        format!("coverage {rc:.4} vs {ac:.4}, outlier AUC {ra:.4} vs {aa:.4}, sparseness {rs:.4} vs {as_:.4} (relevance vs activation)"),
    )
}

pub fn pcx_beats_msp() -> Outcome {
    let ds = overlap_scenario(2, 400, 400, 13).unwrap();
    let train = concept_sets(&ds, Method::LrpEps, Split::Train, 2);
    let models = train
        .iter()
        .enumerate()
        .map(|(c, pts)| {
            let mut m = fit_gmm(pts, &FitOptions::new(1, 13)).unwrap();
            m.class_id = c;
            m
        })
        .collect::<Vec<_>>();
    let ins: Vec<Tensor> = ds.split(Split::Holdout).map(|s| s.input.clone()).collect();
    let outs: Vec<Tensor> = ds.split(Split::Ood).map(|s| s.input.clone()).collect();
    let pcx = OodScorer::pcx(ScorerKind::PcxGmm, models, CONCEPT_LAYER, Method::LrpEps, DEFAULT_EPSILON).unwrap();
    let pcx_auc = run_ood_benchmark(&ds.net, &pcx, &ins, &outs).unwrap().auc;
    let msp_auc = run_ood_benchmark(&ds.net, &OodScorer::msp(), &ins, &outs).unwrap().auc;
    Outcome::new(
        "pcx-vs-msp",
        pcx_auc - msp_auc >= OOD_MARGIN,
        format!("overlapping logits: PCX-GMM AUC {pcx_auc:.4}, MSP AUC {msp_auc:.4} (margin >= {OOD_MARGIN})"),
    )
}

/// Every criterion that needs only the library, in a stable order.
pub fn library_criteria() -> Vec<fn() -> Outcome> {
    vec![
        lrp_conservation,
        attribution_equivalence,
        gradient_oracle,
        crp_completeness,
        em_monotonicity,
        density_normalization,
        hungarian_oracle,
        auc_oracle,
        coverage_separation,
        outlier_detection_planted,
        clustering_ordering,
        relevance_beats_activation,
        pcx_beats_msp,
    ]
}

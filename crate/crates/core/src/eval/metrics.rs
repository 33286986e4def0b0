//! Prototype quality metrics: faithfulness, stability, sparseness, coverage
//! and outlier detection, plus the clustering-regime comparison.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::auc::outlier_auc;
use super::hungarian::hungarian;
use crate::error::{PcxError, Result};
use crate::linalg::{cosine, sq_dist};
use crate::net::Network;
use crate::prototype::{
    assign_prototype, fit_gmm, kmeans, nearest_component, AssignRule, FitOptions, PrototypeComponent,
    PrototypeModel,
};
use crate::tensor::Tensor;

/// Default number of prototypes fitted per fold for stability.
pub const STABILITY_PROTOTYPES: usize = 5;
pub const STABILITY_FOLDS: usize = 10;

/// One prediction to be probed by concept deletion.
#[derive(Debug, Clone, Copy)]
pub struct DeletionSample<'a> {
    pub input: &'a Tensor,
    pub class: usize,
    /// The sample's concept vector, used to pick its nearest prototype.
    pub concepts: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessResult {
    pub score: f64,
    pub per_sample: Vec<f64>,
}

/// Logit drop `y(0) - y(t)` after zeroing concepts in `order`, sampled at
/// every removal step `t = s / m`.
pub fn deletion_curve(
    net: &Network,
    input: &Tensor,
    class: usize,
    layer_index: usize,
    order: &[usize],
) -> Result<Vec<f64>> {
    let trace = net.forward(input)?;
    let mut act = trace.layer(layer_index).clone();
    let channels = act.shape()[0];
    let per = act.len() / channels;
    let y0 = trace.logits()[class] as f64;
    let mut drops = vec![0.0];
    for &c in order {
        if c >= channels {
            return Err(PcxError::IndexOutOfRange {
                what: "concept",
                index: c,
                limit: channels,
            });
        }
        act.data_mut()[c * per..(c + 1) * per].iter_mut().for_each(|v| *v = 0.0);
        let y = net.forward_from(layer_index, &act)?.data()[class] as f64;
        drops.push(y0 - y);
    }
    Ok(drops)
}

/// Trapezoid area of a curve sampled at `t = s / m`, `s = 0..=m`, over
/// `[0, upto]`; the final partial segment is linearly interpolated.
pub fn curve_area(values: &[f64], upto: f64) -> f64 {
    let m = values.len() - 1;
    let dt = 1.0 / m as f64;
    let mut area = 0.0;
    for s in 0..m {
        let (t0, t1) = (s as f64 * dt, (s + 1) as f64 * dt);
        if t0 >= upto {
            break;
        }
        if t1 <= upto {
            area += 0.5 * (values[s] + values[s + 1]) * dt;
        } else {
            let w = (upto - t0) / dt;
            let end = values[s] + w * (values[s + 1] - values[s]);
            area += 0.5 * (values[s] + end) * (upto - t0);
        }
    }
    area
}

/// Concept indices by descending value, lower index first on ties.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Concept-deletion faithfulness: concepts are zeroed in descending order
/// of the nearest prototype's mean and the area under the logit-drop curve
/// over removal fraction `[0, fraction_removed]` is averaged over samples.
pub fn faithfulness(
    net: &Network,
    samples: &[DeletionSample<'_>],
    model: &PrototypeModel,
    layer_index: usize,
    fraction_removed: f64,
) -> Result<FaithfulnessResult> {
    if !(fraction_removed > 0.0 && fraction_removed <= 1.0) {
        return Err(PcxError::InvalidArgument(format!(
            "fraction_removed {fraction_removed} outside (0, 1]"
        )));
    }
    if samples.is_empty() {
        return Err(PcxError::InvalidArgument("no samples".into()));
    }
    net.check_layer(layer_index)?;
    let mut per_sample = Vec::with_capacity(samples.len());
    for s in samples {
        if s.class != model.class_id {
            return Err(PcxError::InvalidArgument(format!(
                "sample of class {} evaluated against model of class {}",
                s.class, model.class_id
            )));
        }
        let comp = nearest_component(model, s.concepts, AssignRule::WeightedLogLikelihood)?;
        let order = descending_order(model.components[comp].mean());
        let curve = deletion_curve(net, s.input, s.class, layer_index, &order)?;
        per_sample.push(curve_area(&curve, fraction_removed));
    }
    Ok(FaithfulnessResult {
        score: per_sample.iter().sum::<f64>() / per_sample.len() as f64,
        per_sample,
    })
}

/// Mean cosine similarity of Hungarian-matched prototype means.
pub fn matched_cosine(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(PcxError::InvalidArgument("prototype sets must be equal-sized and non-empty".into()));
    }
    let sims = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| cosine(x, y).ok_or_else(|| PcxError::Degenerate("zero-norm prototype".into())))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let cost: Vec<Vec<f64>> = sims.iter().map(|r| r.iter().map(|s| 1.0 - s).collect()).collect();
    let assignment = hungarian(&cost)?;
    Ok(assignment
        .columns
        .iter()
        .enumerate()
        .map(|(i, &j)| sims[i][j])
        .sum::<f64>()
        / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub score: f64,
    /// Matched cosine for each fold pair `(a, b)` with `a < b`.
    pub pair_scores: Vec<f64>,
}

fn fold_means(fold: &[Vec<f64>], k: usize, seed: u64, index: usize) -> Result<Vec<Vec<f64>>> {
    let model = fit_gmm(fold, &FitOptions::new(k, seed))?;
    if model.fit.as_ref().is_some_and(|f| f.degenerate) {
        return Err(PcxError::Degenerate(format!("fold {index} contains identical points only")));
    }
    Ok(model.components.iter().map(|c| c.mean().to_vec()).collect())
}

/// Stability over explicitly given folds: every fold pair is compared.
pub fn stability_from_folds(folds: &[Vec<Vec<f64>>], k: usize, seed: u64) -> Result<StabilityResult> {
    if folds.len() < 2 {
        return Err(PcxError::InvalidArgument("stability needs at least 2 folds".into()));
    }
    for (i, f) in folds.iter().enumerate() {
        if f.len() < k {
            return Err(PcxError::InvalidArgument(format!("fold {i} has fewer than k = {k} samples")));
        }
    }
    let means = folds
        .iter()
        .enumerate()
        .map(|(i, f)| fold_means(f, k, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let mut pair_scores = Vec::new();
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            pair_scores.push(matched_cosine(&means[a], &means[b])?);
        }
    }
    Ok(StabilityResult {
        score: pair_scores.iter().sum::<f64>() / pair_scores.len() as f64,
        pair_scores,
    })
}

/// Splits `points` into `folds` disjoint shuffled subsets and measures how
/// consistently `k` prototypes are recovered across them.
pub fn stability(points: &[Vec<f64>], k: usize, folds: usize, seed: u64) -> Result<StabilityResult> {
    if folds < 2 {
        return Err(PcxError::InvalidArgument("stability needs at least 2 folds".into()));
    }
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let size = points.len() / folds;
    let parts: Vec<Vec<Vec<f64>>> = (0..folds)
        .map(|f| idx[f * size..(f + 1) * size].iter().map(|&i| points[i].clone()).collect())
        .collect();
    stability_from_folds(&parts, k, seed)
}

/// `1 - cos(|mu|, 1)` for one prototype mean.
pub fn sparseness_of(mean: &[f64]) -> Result<f64> {
    let abs: Vec<f64> = mean.iter().map(|x| x.abs()).collect();
    let ones = vec![1.0; mean.len()];
    cosine(&abs, &ones)
        .map(|c| 1.0 - c)
        .ok_or_else(|| PcxError::Degenerate("prototype mean is zero".into()))
}

/// Mean sparseness over the components of a model.
pub fn sparseness(model: &PrototypeModel) -> Result<f64> {
    let vals = model
        .components
        .iter()
        .map(|c| sparseness_of(c.mean()))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// How strategy models are built and queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// k-means centroids, Euclidean distance.
    KmeansEuclid,
    /// EM-updated mixture means, Euclidean distance.
    GmmEuclid,
    /// Full mixture, log-likelihood.
    GmmLoglik,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::KmeansEuclid, Regime::GmmEuclid, Regime::GmmLoglik];

    pub fn id(self) -> &'static str {
        match self {
            Regime::KmeansEuclid => "kmeans-euclid",
            Regime::GmmEuclid => "gmm-euclid",
            Regime::GmmLoglik => "gmm-loglik",
        }
    }

    pub fn assign_rule(self) -> AssignRule {
        match self {
            Regime::GmmLoglik => AssignRule::WeightedLogLikelihood,
            _ => AssignRule::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOptions {
    pub k: usize,
    pub seed: u64,
    pub reg: f64,
}

impl Default for StrategyOptions {
    fn default() -> Self {
        Self {
            k: 1,
            seed: 0,
            reg: crate::prototype::DEFAULT_REG,
        }
    }
}

/// Fits one model per strategy; `class_id` is the strategy index.
pub fn fit_strategy_models(
    train: &[Vec<Vec<f64>>],
    opts: &StrategyOptions,
    regime: Regime,
) -> Result<Vec<PrototypeModel>> {
    train
        .iter()
        .enumerate()
        .map(|(s, pts)| {
            if pts.is_empty() {
                return Err(PcxError::InvalidArgument(format!("strategy {s} has no training points")));
            }
            let mut model = match regime {
                Regime::KmeansEuclid => {
                    let km = kmeans(pts, opts.k, opts.seed)?;
                    let w = 1.0 / opts.k as f64;
                    let comps = km
                        .centroids
                        .into_iter()
                        .map(|c| PrototypeComponent::isotropic(w, c, 1.0))
                        .collect::<Result<Vec<_>>>()?;
                    let mut m = PrototypeModel::from_components(s, comps)?;
                    m.method = "kmeans".into();
                    m
                }
                Regime::GmmEuclid | Regime::GmmLoglik => {
                    fit_gmm(pts, &FitOptions::new(opts.k, opts.seed).with_reg(opts.reg))?
                }
            };
            model.class_id = s;
            Ok(model)
        })
        .collect()
}

/// Class-level in-distribution score under a regime (higher = more typical).
pub fn class_score(model: &PrototypeModel, v: &[f64], regime: Regime) -> Result<f64> {
    match regime {
        Regime::GmmLoglik => model.log_likelihood(v),
        Regime::KmeansEuclid | Regime::GmmEuclid => {
            model.check_dim(v)?;
            Ok(-model
                .components
                .iter()
                .map(|c| sq_dist(c.mean(), v).sqrt())
                .fold(f64::INFINITY, f64::min))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub accuracy: f64,
    pub per_strategy: Vec<f64>,
}

/// Fraction of held-out points assigned to a prototype of their own strategy.
pub fn coverage_with_models(
    models: &[PrototypeModel],
    test: &[Vec<Vec<f64>>],
    rule: AssignRule,
) -> Result<CoverageResult> {
    let mut per_strategy = Vec::with_capacity(test.len());
    let (mut hits, mut total) = (0usize, 0usize);
    for (s, pts) in test.iter().enumerate() {
        if pts.is_empty() {
            return Err(PcxError::InvalidArgument(format!("strategy {s} has no test points")));
        }
        let mut h = 0;
        for p in pts {
            if assign_prototype(models, p, rule)?.class_id == s {
                h += 1;
            }
        }
        per_strategy.push(h as f64 / pts.len() as f64);
        hits += h;
        total += pts.len();
    }
    Ok(CoverageResult {
        accuracy: hits as f64 / total as f64,
        per_strategy,
    })
}

/// Coverage with one prototype per strategy, assigned by weighted log-likelihood.
pub fn coverage(train: &[Vec<Vec<f64>>], test: &[Vec<Vec<f64>>], seed: u64) -> Result<CoverageResult> {
    if train.len() != test.len() {
        return Err(PcxError::InvalidArgument("train and test strategy counts differ".into()));
    }
    let opts = StrategyOptions {
        seed,
        ..StrategyOptions::default()
    };
    let models = fit_strategy_models(train, &opts, Regime::GmmLoglik)?;
    coverage_with_models(&models, test, AssignRule::WeightedLogLikelihood)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierResult {
    pub auc: f64,
    /// AUC of each strategy's own points against all other strategies' points.
    pub per_strategy: Vec<f64>,
}

/// For each strategy, separates its held-out points from those of all other
/// strategies by class-level score; reports the mean AUC.
pub fn outlier_detection(models: &[PrototypeModel], test: &[Vec<Vec<f64>>], regime: Regime) -> Result<OutlierResult> {
    if test.len() < 2 || models.len() != test.len() {
        return Err(PcxError::InvalidArgument("outlier detection needs >= 2 strategies with models".into()));
    }
    let mut per_strategy = Vec::with_capacity(test.len());
    for (s, model) in models.iter().enumerate() {
        let inside = test[s]
            .iter()
            .map(|p| class_score(model, p, regime))
            .collect::<Result<Vec<_>>>()?;
        let outside = test
            .iter()
            .enumerate()
            .filter(|(t, _)| *t != s)
            .flat_map(|(_, pts)| pts.iter())
            .map(|p| class_score(model, p, regime))
            .collect::<Result<Vec<_>>>()?;
        per_strategy.push(outlier_auc(&inside, &outside)?);
    }
    Ok(OutlierResult {
        auc: per_strategy.iter().sum::<f64>() / per_strategy.len() as f64,
        per_strategy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeScores {
    pub regime: Regime,
    pub coverage: f64,
    pub outlier_auc: f64,
    /// Held-out strategy assignment per point, flattened in strategy order.
    pub assignments: Vec<usize>,
}

/// Coverage and outlier detection under each clustering regime.
pub fn compare_clusterings(
    train: &[Vec<Vec<f64>>],
    test: &[Vec<Vec<f64>>],
    k: usize,
    seed: u64,
) -> Result<Vec<RegimeScores>> {
    let opts = StrategyOptions {
        k,
        seed,
        ..StrategyOptions::default()
    };
    let gmm = fit_strategy_models(train, &opts, Regime::GmmLoglik)?;
    let km = fit_strategy_models(train, &opts, Regime::KmeansEuclid)?;
    Regime::ALL
        .iter()
        .map(|&regime| {
            let models = if regime == Regime::KmeansEuclid { &km } else { &gmm };
            let rule = regime.assign_rule();
            let cov = coverage_with_models(models, test, rule)?;
            let assignments = test
                .iter()
                .flatten()
                .map(|p| assign_prototype(models, p, rule).map(|r| r.class_id))
                .collect::<Result<Vec<_>>>()?;
            let outlier_auc = if test.len() >= 2 {
                outlier_detection(models, test, regime)?.auc
            } else {
                f64::NAN
            };
            Ok(RegimeScores {
                regime,
                coverage: cov.accuracy,
                outlier_auc,
                assignments,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Layer;

    #[test]
    fn hand_trapezoid() {
        // weights [3, 2, 1], unit activations: y = 6, 3, 1, 0
        let net = Network::new(
            vec![
                Layer::dense(Tensor::new(vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap(), None),
                Layer::dense(Tensor::new(vec![1, 3], vec![3.0, 2.0, 1.0]).unwrap(), None),
            ],
            vec![3],
            1,
        )
        .unwrap();
        let x = Tensor::from_vec(vec![1.0, 1.0, 1.0]);
        let curve = deletion_curve(&net, &x, 0, 0, &[0, 1, 2]).unwrap();
        assert_eq!(curve, vec![0.0, 3.0, 5.0, 6.0]);
        let expect = (1.5 + 4.0 + 5.5) / 3.0;
        assert!((curve_area(&curve, 1.0) - expect).abs() < 1e-12);

        let model = PrototypeModel::from_components(
            0,
            vec![PrototypeComponent::isotropic(1.0, vec![0.5, 0.3, 0.2], 1.0).unwrap()],
        )
        .unwrap();
        let concepts = [0.5, 0.3, 0.2];
        let s = [DeletionSample {
            input: &x,
            class: 0,
            concepts: &concepts,
        }];
        let f = faithfulness(&net, &s, &model, 0, 1.0).unwrap();
        assert!((f.score - expect).abs() < 1e-6);
        // first tenth of the curve: d rises linearly from 0 to 0.9 at t = 0.1
        let part = faithfulness(&net, &s, &model, 0, 0.1).unwrap();
        assert!((part.score - 0.5 * 0.1 * 0.9).abs() < 1e-9);
        assert!(faithfulness(&net, &s, &model, 0, 0.0).is_err());
        assert!(faithfulness(&net, &s, &model, 0, 1.5).is_err());
    }

    #[test]
    fn matched_cosine_examples() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let b = vec![vec![0.0, 2.0], vec![3.0, 0.0]];
        assert!((matched_cosine(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 2.0]];
        let d = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        assert_eq!(matched_cosine(&c, &d).unwrap(), 0.0);
    }

    #[test]
    fn sparseness_examples() {
        assert!(sparseness_of(&[0.3; 5]).unwrap().abs() < 1e-12);
        let mut one_hot = vec![0.0; 4];
        one_hot[2] = -1.0;
        assert!((sparseness_of(&one_hot).unwrap() - 0.5).abs() < 1e-12);
        let mut one_hot = vec![0.0; 100];
        one_hot[0] = 1.0;
        assert!((sparseness_of(&one_hot).unwrap() - 0.9).abs() < 1e-12);
        assert!(sparseness_of(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn coverage_of_identical_strategies_is_half() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.3).sin(), (i as f64 * 0.7).cos()]).collect();
        let train = vec![pts.clone(), pts.clone()];
        let r = coverage(&train, &train, 0).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_strategy, vec![1.0, 0.0]);
        assert!(coverage(&[pts.clone(), vec![]], &train, 0).is_err());
    }
}

//! Seeded synthetic data with known sub-strategy labels.
//!
//! Strategies are Gaussian clusters in an `m`-dimensional concept space.
//! For end-to-end runs the points are fed through a toy network
//! `dense(I) -> relu -> dense(W)` whose logit for class `c` sums the concept
//! dimensions owned by `c`; a positive offset keeps the ReLU active.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PcxError, Result};
use crate::net::{Layer, Network};
use crate::tensor::Tensor;

/// Index of the concept layer (the ReLU output) in every generated network.
pub const CONCEPT_LAYER: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub families: usize,
    pub classes_per_family: usize,
    pub strategies_per_class: usize,
    pub dim: usize,
    /// Pairwise distance between strategy means, in units of the base sd.
    pub separation: f64,
    /// Variance ratio of the stretched (even) dimensions to the others.
    pub anisotropy: f64,
    pub train_per_strategy: usize,
    pub holdout_per_strategy: usize,
    pub ood_count: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            families: 1,
            classes_per_family: 2,
            strategies_per_class: 2,
            dim: 8,
            separation: 8.0,
            anisotropy: 1.0,
            train_per_strategy: 50,
            holdout_per_strategy: 50,
            ood_count: 20,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn class_count(&self) -> usize {
        self.families * self.classes_per_family
    }

    pub fn strategy_count(&self) -> usize {
        self.class_count() * self.strategies_per_class
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("families", self.families),
            ("classes_per_family", self.classes_per_family),
            ("strategies_per_class", self.strategies_per_class),
            ("dim", self.dim),
            ("train_per_strategy", self.train_per_strategy),
            ("holdout_per_strategy", self.holdout_per_strategy),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(PcxError::InvalidArgument(format!("{name} must be >= 1")));
        }
        if !(self.separation >= 0.0) || !self.separation.is_finite() {
            return Err(PcxError::InvalidArgument(format!("separation {} must be >= 0", self.separation)));
        }
        if !(self.anisotropy > 0.0) || !self.anisotropy.is_finite() {
            return Err(PcxError::InvalidArgument(format!("anisotropy {} must be > 0", self.anisotropy)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Holdout,
    Ood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTruth {
    pub class: usize,
    pub family: usize,
    pub mean: Vec<f64>,
    /// Diagonal covariance.
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub strategies: Vec<StrategyTruth>,
    /// Concept dimension -> class whose logit it feeds, if any.
    pub owners: Vec<Option<usize>>,
    /// Constant added to every input to keep activations positive.
    pub offset: f64,
    /// Length of the displacement that plants OOD points.
    pub ood_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub input: Tensor,
    pub label: usize,
    pub strategy: Option<usize>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub net: Network,
    pub samples: Vec<SynthSample>,
    pub truth: GroundTruth,
}

impl SynthDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SynthSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// Strategy means: `sep / sqrt(2) * (+-e_j)`, cycling through axes; once all
/// `2m` signed axes are used the radius grows so pairs stay `sep` apart.
fn strategy_means(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    let m = cfg.dim;
    let step = cfg.separation / std::f64::consts::SQRT_2;
    (0..cfg.strategy_count())
        .map(|s| {
            let mut mu = vec![0.0; m];
            let ring = s / (2 * m);
            let axis = s % m;
            let sign = if (s / m).is_multiple_of(2) { 1.0 } else { -1.0 };
            mu[axis] = sign * step * (1.0 + ring as f64 * std::f64::consts::SQRT_2);
            mu
        })
        .collect()
}

fn variances(cfg: &SynthConfig) -> Vec<f64> {
    (0..cfg.dim)
        .map(|j| if j % 2 == 0 { cfg.anisotropy } else { 1.0 })
        .collect()
}

/// Ground-truth strategy parameters for a config.
pub fn ground_truth(cfg: &SynthConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let var = variances(cfg);
    let strategies: Vec<StrategyTruth> = strategy_means(cfg)
        .into_iter()
        .enumerate()
        .map(|(s, mean)| {
            let class = s / cfg.strategies_per_class;
            StrategyTruth {
                class,
                family: class / cfg.classes_per_family,
                mean,
                variances: var.clone(),
            }
        })
        .collect();
    let owners = (0..cfg.dim).map(|j| strategies.get(j).map(|s| s.class)).collect();
    let max_sd = var.iter().copied().fold(1.0f64, f64::max).sqrt();
    let radius = strategies
        .iter()
        .map(|s| s.mean.iter().map(|v| v.abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let ood_shift = 10.0 * max_sd;
    Ok(GroundTruth {
        strategies,
        owners,
        offset: radius + 4.0 * max_sd,
        ood_shift,
    })
}

fn draw(rng: &mut ChaCha8Rng, truth: &StrategyTruth) -> Vec<f64> {
    truth
        .mean
        .iter()
        .zip(&truth.variances)
        .map(|(m, v)| m + v.sqrt() * normal(rng))
        .collect()
}

/// Points grouped by strategy.
pub type StrategySets = Vec<Vec<Vec<f64>>>;

/// Concept-space points per strategy: `(train, holdout)`.
pub fn strategy_points(cfg: &SynthConfig) -> Result<(StrategySets, StrategySets)> {
    let truth = ground_truth(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train = Vec::with_capacity(truth.strategies.len());
    let mut holdout = Vec::with_capacity(truth.strategies.len());
    for s in &truth.strategies {
        train.push((0..cfg.train_per_strategy).map(|_| draw(&mut rng, s)).collect());
        holdout.push((0..cfg.holdout_per_strategy).map(|_| draw(&mut rng, s)).collect());
    }
    Ok((train, holdout))
}

/// Points displaced `shift` from a random strategy mean in a random direction.
pub fn planted_outliers(cfg: &SynthConfig, count: usize, shift: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let truth = ground_truth(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| displaced(&mut rng, &truth, shift).1)
        .collect())
}

fn displaced(rng: &mut ChaCha8Rng, truth: &GroundTruth, shift: f64) -> (usize, Vec<f64>) {
    let s = rng.random_range(0..truth.strategies.len());
    let st = &truth.strategies[s];
    let dir: Vec<f64> = (0..st.mean.len()).map(|_| normal(rng)).collect();
    let n = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let p = draw(rng, st);
    (s, p.iter().zip(&dir).map(|(x, d)| x + shift * d / n).collect())
}

/// `dense(I_m) -> relu -> dense(W)`, where `W[c][j]` is `weights(c, j)`.
pub fn toy_network(dim: usize, classes: usize, weights: impl Fn(usize, usize) -> f32) -> Result<Network> {
    let mut eye = vec![0.0f32; dim * dim];
    (0..dim).for_each(|i| eye[i * dim + i] = 1.0);
    let w: Vec<f32> = (0..classes).flat_map(|c| (0..dim).map(move |j| (c, j))).map(|(c, j)| weights(c, j)).collect();
    Network::new(
        vec![
            Layer::dense(Tensor::new(vec![dim, dim], eye)?, None),
            Layer::Relu,
            Layer::dense(Tensor::new(vec![classes, dim], w)?, None),
        ],
        vec![dim],
        classes,
    )
}

/// Moves mass from another concept of the source class onto the source
/// strategy's own concept, exaggerating that strategy beyond anything seen
/// in training while the class logit stays put. Strategies without an
/// owned axis, or classes owning a single dimension, fall back to a random
/// direction.
fn shifted_usage(rng: &mut ChaCha8Rng, truth: &GroundTruth, shift: f64) -> (usize, Vec<f64>) {
    let s = rng.random_range(0..truth.strategies.len());
    let class = truth.strategies[s].class;
    let own = (s < truth.owners.len() && truth.owners[s] == Some(class)).then_some(s);
    let others: Vec<usize> = (0..truth.owners.len())
        .filter(|&j| truth.owners[j] == Some(class) && Some(j) != own)
        .collect();
    let (Some(a), false) = (own, others.is_empty()) else {
        return displaced(rng, truth, shift);
    };
    let b = others[rng.random_range(0..others.len())];
    let mut p = draw(rng, &truth.strategies[s]);
    p[a] += shift / std::f64::consts::SQRT_2;
    p[b] -= shift / std::f64::consts::SQRT_2;
    (s, p)
}

fn to_input(p: &[f64], offset: f64) -> Tensor {
    Tensor::from_vec(p.iter().map(|&v| (v + offset) as f32).collect())
}

/// Full dataset with a class-aligned toy network. OOD points are planted
/// `ood_shift` away from a random strategy by moving mass onto its own
/// concept, and labelled with that strategy's class.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    let truth = ground_truth(cfg)?;
    let owners = truth.owners.clone();
    let net = toy_network(cfg.dim, cfg.class_count(), |c, j| if owners[j] == Some(c) { 1.0 } else { 0.0 })?;
    let (train, holdout) = strategy_points(cfg)?;
    let mut samples = Vec::new();
    for (split, sets) in [(Split::Train, &train), (Split::Holdout, &holdout)] {
        for (s, pts) in sets.iter().enumerate() {
            for p in pts {
                samples.push(SynthSample {
                    input: to_input(p, truth.offset),
                    label: truth.strategies[s].class,
                    strategy: Some(s),
                    split,
                });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00d0_0dd5);
    for _ in 0..cfg.ood_count {
        let (s, p) = shifted_usage(&mut rng, &truth, truth.ood_shift);
        samples.push(SynthSample {
            input: to_input(&p, truth.offset),
            label: truth.strategies[s].class,
            strategy: None,
            split: Split::Ood,
        });
    }
    Ok(SynthDataset { net, samples, truth })
}

/// Concept vectors from activations versus relevances when half of the
/// active dimensions carry no weight in the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct DistractorConfig {
    pub classes: usize,
    pub strategies_per_class: usize,
    /// Number of zero-weight dimensions appended after the signal block.
    pub distractors: usize,
    pub separation: f64,
    /// Upper bound of the uniform distractor intensity.
    pub distractor_scale: f64,
    pub train_per_strategy: usize,
    pub holdout_per_strategy: usize,
    pub seed: u64,
}

impl Default for DistractorConfig {
    fn default() -> Self {
        Self {
            classes: 2,
            strategies_per_class: 2,
            distractors: 4,
            separation: 4.0,
            distractor_scale: 40.0,
            train_per_strategy: 200,
            holdout_per_strategy: 200,
            seed: 0,
        }
    }
}

/// Signal dimension `j` belongs to class `j / strategies_per_class`; each
/// strategy lifts one of its class's dimensions. Distractor dimensions share
/// one random intensity per sample and have zero classifier weight.
pub fn distractor_scenario(cfg: &DistractorConfig) -> Result<SynthDataset> {
    let signal = cfg.classes * cfg.strategies_per_class;
    let dim = signal + cfg.distractors;
    if signal == 0 || cfg.train_per_strategy == 0 || cfg.holdout_per_strategy == 0 {
        return Err(PcxError::InvalidArgument("distractor scenario needs strategies and samples".into()));
    }
    let spc = cfg.strategies_per_class;
    let net = toy_network(dim, cfg.classes, |c, j| if j < signal && j / spc == c { 1.0 } else { 0.0 })?;
    let base = 2.0;
    let lift = cfg.separation / std::f64::consts::SQRT_2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut strategies = Vec::with_capacity(signal);
    let mut samples = Vec::new();
    for s in 0..signal {
        let mut mean = vec![base; dim];
        mean[s] += lift;
        for (split, n) in [(Split::Train, cfg.train_per_strategy), (Split::Holdout, cfg.holdout_per_strategy)] {
            for _ in 0..n {
                let intensity = rng.random::<f64>() * cfg.distractor_scale;
                let x: Vec<f32> = (0..dim)
                    .map(|j| {
                        let v = if j < signal { mean[j] + normal(&mut rng) * 0.5 } else { intensity };
                        v.max(0.0) as f32
                    })
                    .collect();
                samples.push(SynthSample {
                    input: Tensor::from_vec(x),
                    label: s / spc,
                    strategy: Some(s),
                    split,
                });
            }
        }
        strategies.push(StrategyTruth {
            class: s / spc,
            family: 0,
            mean,
            variances: vec![0.25; dim],
        });
    }
    let owners = (0..dim).map(|j| (j < signal).then_some(j / spc)).collect();
    Ok(SynthDataset {
        net,
        samples,
        truth: GroundTruth {
            strategies,
            owners,
            offset: base,
            ood_shift: 0.0,
        },
    })
}

/// Two concepts per class. In-distribution samples use both of their
/// class's concepts about equally; OOD samples put all of that mass on one
/// concept, so the logits of both sets are identically distributed.
pub fn overlap_scenario(classes: usize, per_class: usize, ood_per_class: usize, seed: u64) -> Result<SynthDataset> {
    if classes < 2 || per_class == 0 {
        return Err(PcxError::InvalidArgument("overlap scenario needs >= 2 classes and samples".into()));
    }
    let dim = 2 * classes;
    let net = toy_network(dim, classes, |c, j| if j / 2 == c { 1.0 } else { 0.0 })?;
    let (level, floor, sd) = (4.0, 0.2, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut strategies = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut mean = vec![floor; dim];
        mean[2 * c] = level / 2.0;
        mean[2 * c + 1] = level / 2.0;
        for split in [Split::Train, Split::Holdout, Split::Ood] {
            let n = if split == Split::Ood { ood_per_class } else { per_class };
            for _ in 0..n {
                let mut x: Vec<f64> = mean.iter().map(|m| m + sd * normal(&mut rng)).collect();
                if split == Split::Ood {
                    let total = x[2 * c] + x[2 * c + 1];
                    let hot = 2 * c + rng.random_range(0..2usize);
                    x[2 * c] = floor + sd * normal(&mut rng);
                    x[2 * c + 1] = floor + sd * normal(&mut rng);
                    // keep the logit: the hot concept carries the whole block sum
                    let cold = x[4 * c + 1 - hot];
                    x[hot] = total - cold;
                }
                samples.push(SynthSample {
                    input: Tensor::from_vec(x.iter().map(|v| v.max(0.0) as f32).collect()),
                    label: c,
                    strategy: (split != Split::Ood).then_some(c),
                    split,
                });
            }
        }
        strategies.push(StrategyTruth {
            class: c,
            family: 0,
            mean,
            variances: vec![sd * sd; dim],
        });
    }
    Ok(SynthDataset {
        net,
        samples,
        truth: GroundTruth {
            strategies,
            owners: (0..dim).map(|j| Some(j / 2)).collect(),
            offset: 0.0,
            ood_shift: 0.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_are_separated_as_configured() {
        let cfg = SynthConfig {
            dim: 4,
            strategies_per_class: 5,
            separation: 3.0,
            ..SynthConfig::default()
        };
        let t = ground_truth(&cfg).unwrap();
        assert_eq!(t.strategies.len(), 10);
        for a in 0..10 {
            for b in a + 1..10 {
                let d: f64 = t.strategies[a]
                    .mean
                    .iter()
                    .zip(&t.strategies[b].mean)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(d >= 3.0 - 1e-12, "strategies {a} and {b} at {d}");
            }
        }
    }

    #[test]
    fn same_seed_same_data() {
        let cfg = SynthConfig::default();
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap().samples, generate(&other).unwrap().samples);
    }

    #[test]
    fn toy_logits_follow_the_class_block() {
        let ds = generate(&SynthConfig::default()).unwrap();
        let correct = ds
            .split(Split::Holdout)
            .filter(|s| ds.net.predict(&s.input).unwrap() == s.label)
            .count();
        assert_eq!(correct, ds.split(Split::Holdout).count());
    }

    #[test]
    fn overlap_preserves_logits_in_expectation() {
        let ds = overlap_scenario(2, 400, 400, 3).unwrap();
        let mean_logit = |split| {
            let v: Vec<f64> = ds
                .split(split)
                .map(|s| ds.net.forward(&s.input).unwrap().logits()[s.label] as f64)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((mean_logit(Split::Holdout) - mean_logit(Split::Ood)).abs() < 0.1);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(ground_truth(&SynthConfig { dim: 0, ..SynthConfig::default() }).is_err());
        assert!(ground_truth(&SynthConfig { anisotropy: 0.0, ..SynthConfig::default() }).is_err());
    }
}

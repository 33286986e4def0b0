//! Out-of-distribution scores. Every scorer is oriented so that a higher
//! score means "more in-distribution".

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{activation_pool, attribute, normalize, Method, Pool, DEFAULT_EPSILON};
use crate::error::{PcxError, Result};
use crate::eval::outlier_auc;
use crate::linalg::{cholesky, log_sum_exp, quad_form_inv, sq_dist};
use crate::net::Network;
use crate::prototype::{PrototypeModel, DEFAULT_REG};
use crate::tensor::Tensor;

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

/// Maximum softmax probability.
pub fn score_msp(logits: &[f32]) -> Result<f64> {
    if logits.len() < 2 {
        return Err(PcxError::InvalidArgument("MSP needs at least 2 logits".into()));
    }
    let y: Vec<f64> = logits.iter().map(|&v| v as f64).collect();
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = y.iter().map(|v| (v - max).exp()).sum();
    Ok(1.0 / denom)
}

/// Negative energy `T * log sum exp(y / T)`.
pub fn score_energy(logits: &[f32], temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(PcxError::InvalidArgument(format!("temperature {temperature} must be > 0")));
    }
    let scaled: Vec<f64> = logits.iter().map(|&v| v as f64 / temperature).collect();
    Ok(temperature * log_sum_exp(&scaled))
}

/// Class means with one shared covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiedGaussian {
    pub means: Vec<Vec<f64>>,
    /// Row-major `m x m`.
    pub covariance: Vec<f64>,
    #[serde(skip)]
    chol: Vec<f64>,
}

impl TiedGaussian {
    pub fn new(means: Vec<Vec<f64>>, covariance: Vec<f64>) -> Result<Self> {
        let m = means.first().map(Vec::len).ok_or_else(|| PcxError::InvalidArgument("no class means".into()))?;
        if means.iter().any(|v| v.len() != m) || covariance.len() != m * m {
            return Err(PcxError::Shape(format!("tied statistics must be {m}-dimensional")));
        }
        let chol = cholesky(&covariance, m)?;
        Ok(Self {
            means,
            covariance,
            chol,
        })
    }

    /// Per-class means and pooled within-class covariance (biased), plus
    /// `reg * (trace / m) * I`. `by_class[c]` holds class `c`'s features.
    pub fn fit(by_class: &[Vec<Vec<f64>>], reg: f64) -> Result<Self> {
        let m = by_class
            .iter()
            .flatten()
            .next()
            .map(Vec::len)
            .ok_or_else(|| PcxError::InvalidArgument("no features".into()))?;
        let mut means = Vec::with_capacity(by_class.len());
        let mut cov = vec![0.0; m * m];
        let mut n = 0usize;
        for (c, pts) in by_class.iter().enumerate() {
            if pts.is_empty() {
                return Err(PcxError::MissingClass(c));
            }
            let mut mu = vec![0.0; m];
            for p in pts {
                if p.len() != m {
                    return Err(PcxError::Shape(format!("feature of length {} != {m}", p.len())));
                }
                mu.iter_mut().zip(p).for_each(|(a, b)| *a += b);
            }
            mu.iter_mut().for_each(|a| *a /= pts.len() as f64);
            for p in pts {
                for i in 0..m {
                    let di = p[i] - mu[i];
                    for j in 0..m {
                        cov[i * m + j] += di * (p[j] - mu[j]);
                    }
                }
            }
            n += pts.len();
            means.push(mu);
        }
        cov.iter_mut().for_each(|v| *v /= n as f64);
        let trace: f64 = (0..m).map(|i| cov[i * m + i]).sum();
        let ridge = reg * if trace > 0.0 { trace / m as f64 } else { 1.0 };
        for i in 0..m {
            cov[i * m + i] += ridge;
        }
        Self::new(means, cov)
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn ensure_factor(&mut self) -> Result<()> {
        if self.chol.is_empty() {
            self.chol = cholesky(&self.covariance, self.dim())?;
        }
        Ok(())
    }
}

/// `max_c -sqrt(d_c' S^-1 d_c)` over class means under the tied covariance.
pub fn score_mahalanobis_baseline(features: &[f64], tied: &TiedGaussian) -> Result<f64> {
    let m = tied.dim();
    if features.len() != m {
        return Err(PcxError::Shape(format!("feature length {} != {m}", features.len())));
    }
    if tied.chol.is_empty() {
        return Err(PcxError::InvalidArgument("tied statistics are not factorized".into()));
    }
    Ok(tied
        .means
        .iter()
        .map(|mu| {
            let d: Vec<f64> = features.iter().zip(mu).map(|(a, b)| a - b).collect();
            -quad_form_inv(&tied.chol, m, &d).sqrt()
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

fn class_model(models: &[PrototypeModel], class: usize) -> Result<&PrototypeModel> {
    models
        .iter()
        .find(|m| m.class_id == class)
        .ok_or(PcxError::MissingClass(class))
}

/// Mixture log-likelihood of `v` under the predicted class's model.
pub fn score_pcx_gmm(models: &[PrototypeModel], predicted_class: usize, v: &[f64]) -> Result<f64> {
    class_model(models, predicted_class)?.log_likelihood(v)
}

/// Negative Euclidean distance to the nearest prototype of the predicted class.
pub fn score_pcx_e(models: &[PrototypeModel], predicted_class: usize, v: &[f64]) -> Result<f64> {
    let model = class_model(models, predicted_class)?;
    model.check_dim(v)?;
    Ok(-model
        .components
        .iter()
        .map(|c| sq_dist(c.mean(), v))
        .fold(f64::INFINITY, f64::min)
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    Msp,
    Energy,
    MahalanobisBaseline,
    PcxGmm,
    PcxE,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 5] = [
        ScorerKind::Msp,
        ScorerKind::Energy,
        ScorerKind::MahalanobisBaseline,
        ScorerKind::PcxGmm,
        ScorerKind::PcxE,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ScorerKind::Msp => "msp",
            ScorerKind::Energy => "energy",
            ScorerKind::MahalanobisBaseline => "mahalanobis-baseline",
            ScorerKind::PcxGmm => "pcx-gmm",
            ScorerKind::PcxE => "pcx-e",
        }
    }
}

impl std::str::FromStr for ScorerKind {
    type Err = PcxError;

    fn from_str(s: &str) -> Result<Self> {
        ScorerKind::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| {
            let valid: Vec<_> = ScorerKind::ALL.iter().map(|k| k.id()).collect();
            PcxError::InvalidArgument(format!("unknown scorer '{s}', expected one of {}", valid.join(", ")))
        })
    }
}

/// A fitted OOD scorer. Build with one of the constructors.
#[derive(Debug, Clone)]
pub struct OodScorer {
    kind: ScorerKind,
    temperature: f64,
    layer_index: usize,
    method: Method,
    epsilon: f32,
    models: Vec<PrototypeModel>,
    tied: Option<TiedGaussian>,
}

impl OodScorer {
    pub fn msp() -> Self {
        Self::logit_based(ScorerKind::Msp, DEFAULT_TEMPERATURE)
    }

    pub fn energy(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(PcxError::InvalidArgument(format!("temperature {temperature} must be > 0")));
        }
        Ok(Self::logit_based(ScorerKind::Energy, temperature))
    }

    fn logit_based(kind: ScorerKind, temperature: f64) -> Self {
        Self {
            kind,
            temperature,
            layer_index: 0,
            method: Method::ActivationSum,
            epsilon: DEFAULT_EPSILON,
            models: Vec::new(),
            tied: None,
        }
    }

    /// Tied-covariance baseline on sum-pooled activations at `layer_index`.
    pub fn mahalanobis(layer_index: usize, mut tied: TiedGaussian) -> Result<Self> {
        tied.ensure_factor()?;
        Ok(Self {
            tied: Some(tied),
            layer_index,
            ..Self::logit_based(ScorerKind::MahalanobisBaseline, DEFAULT_TEMPERATURE)
        })
    }

    /// Fits the baseline's statistics from training inputs grouped by class.
    pub fn fit_mahalanobis(net: &Network, layer_index: usize, by_class: &[Vec<Tensor>]) -> Result<Self> {
        net.check_layer(layer_index)?;
        let feats = by_class
            .iter()
            .map(|xs| xs.iter().map(|x| pooled_features(net, x, layer_index)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::mahalanobis(layer_index, TiedGaussian::fit(&feats, DEFAULT_REG)?)
    }

    /// PCX scorer over concept vectors from `method` at `layer_index`.
    pub fn pcx(
        kind: ScorerKind,
        models: Vec<PrototypeModel>,
        layer_index: usize,
        method: Method,
        epsilon: f32,
    ) -> Result<Self> {
        if !matches!(kind, ScorerKind::PcxGmm | ScorerKind::PcxE) {
            return Err(PcxError::InvalidArgument(format!("{} is not a prototype scorer", kind.id())));
        }
        if models.is_empty() {
            return Err(PcxError::InvalidArgument("prototype scorer needs class models".into()));
        }
        Ok(Self {
            kind,
            models,
            layer_index,
            method,
            epsilon,
            ..Self::logit_based(kind, DEFAULT_TEMPERATURE)
        })
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    /// Scores one input routed through `net`.
    pub fn score(&self, net: &Network, input: &Tensor) -> Result<f64> {
        match self.kind {
            ScorerKind::Msp => score_msp(net.forward(input)?.logits()),
            ScorerKind::Energy => score_energy(net.forward(input)?.logits(), self.temperature),
            ScorerKind::MahalanobisBaseline => {
                let tied = self.tied.as_ref().ok_or_else(|| PcxError::InvalidArgument("unfitted statistics".into()))?;
                score_mahalanobis_baseline(&pooled_features(net, input, self.layer_index)?, tied)
            }
            ScorerKind::PcxGmm | ScorerKind::PcxE => {
                let class = net.predict(input)?;
                let raw = attribute(net, input, self.method, class, self.layer_index, self.epsilon)?;
                let v = match normalize(&raw) {
                    Ok(v) => v.to_f64(),
                    // nothing to compare against any prototype
                    Err(PcxError::Degenerate(_)) => return Ok(f64::NEG_INFINITY),
                    Err(e) => return Err(e),
                };
                if self.kind == ScorerKind::PcxGmm {
                    score_pcx_gmm(&self.models, class, &v)
                } else {
                    score_pcx_e(&self.models, class, &v)
                }
            }
        }
    }

    /// Scores many inputs in parallel, preserving order.
    pub fn score_batch(&self, net: &Network, inputs: &[Tensor]) -> Result<Vec<f64>> {
        inputs.par_iter().map(|x| self.score(net, x)).collect()
    }
}

fn pooled_features(net: &Network, input: &Tensor, layer_index: usize) -> Result<Vec<f64>> {
    Ok(activation_pool(&net.forward(input)?, layer_index, Pool::Sum)?.to_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodResult {
    pub auc: f64,
    pub in_scores: Vec<f64>,
    pub out_scores: Vec<f64>,
}

/// AUC of `scorer` separating `in_samples` from `out_samples`.
pub fn run_ood_benchmark(
    net: &Network,
    scorer: &OodScorer,
    in_samples: &[Tensor],
    out_samples: &[Tensor],
) -> Result<OodResult> {
    let in_scores = scorer.score_batch(net, in_samples)?;
    let out_scores = scorer.score_batch(net, out_samples)?;
    Ok(OodResult {
        auc: outlier_auc(&in_scores, &out_scores)?,
        in_scores,
        out_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototype::PrototypeComponent;

    #[test]
    fn msp_examples() {
        assert!((score_msp(&[1.5; 4]).unwrap() - 0.25).abs() < 1e-12);
        let e2 = 2.0f64.exp();
        assert!((score_msp(&[2.0, 0.0]).unwrap() - e2 / (e2 + 1.0)).abs() < 1e-12);
        assert_eq!(score_msp(&[2.0, 0.0, -1.0]).unwrap(), score_msp(&[12.0, 10.0, 9.0]).unwrap());
        assert!(score_msp(&[1.0]).is_err());
    }

    #[test]
    fn energy_examples() {
        assert!((score_energy(&[0.0, 0.0], 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((score_energy(&[50.0, 0.0, -3.0], 1.0).unwrap() - 50.0).abs() < 1e-12);
        let a = score_energy(&[1.0, -2.0, 0.5], 2.0).unwrap();
        let b = score_energy(&[3.0, -6.0, 1.5], 6.0).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12);
        assert!(score_energy(&[1.0, 2.0], 1.0).unwrap() < score_energy(&[1.0, 2.5], 1.0).unwrap());
        assert!(score_energy(&[1.0], 0.0).is_err());
    }

    #[test]
    fn mahalanobis_examples() {
        let t = TiedGaussian::new(vec![vec![0.0, 0.0], vec![4.0, 0.0]], vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(score_mahalanobis_baseline(&[4.0, 0.0], &t).unwrap(), 0.0);
        // inverse of [[2,1],[1,2]] is [[2,-1],[-1,2]] / 3; d = (1, 1) from mean 0 gives 2/3,
        // d = (-3, 1) from mean 1 gives (18 + 6 + 2) / 3
        let s = score_mahalanobis_baseline(&[1.0, 1.0], &t).unwrap();
        assert!((s + (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let eye = TiedGaussian::new(vec![vec![1.0, 1.0]], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((score_mahalanobis_baseline(&[4.0, 5.0], &eye).unwrap() + 5.0).abs() < 1e-12);
    }

    #[test]
    fn pcx_examples() {
        let m = PrototypeModel::from_components(
            0,
            vec![
                PrototypeComponent::isotropic(0.5, vec![0.0], 1.0).unwrap(),
                PrototypeComponent::isotropic(0.5, vec![10.0], 7.0).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(score_pcx_e(std::slice::from_ref(&m), 0, &[4.0]).unwrap(), -4.0);
        assert_eq!(score_pcx_e(std::slice::from_ref(&m), 0, &[10.0]).unwrap(), 0.0);
        assert!(matches!(score_pcx_gmm(std::slice::from_ref(&m), 1, &[0.0]), Err(PcxError::MissingClass(1))));
        let one = PrototypeModel::from_components(0, vec![PrototypeComponent::isotropic(1.0, vec![0.0], 1.0).unwrap()]).unwrap();
        assert!((score_pcx_gmm(std::slice::from_ref(&one), 0, &[0.0]).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let s = score_pcx_gmm(std::slice::from_ref(&one), 0, &[i as f64 * 0.5]).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }
}

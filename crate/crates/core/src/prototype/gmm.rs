//! Per-class Gaussian mixtures over concept vectors, fitted by EM with full
//! covariances and a trace-scaled ridge.

use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use crate::error::{PcxError, Result};
use crate::linalg::{cholesky, log_det_from_cholesky, log_sum_exp, quad_form_inv, sq_dist};

pub const DEFAULT_REG: f64 = 1e-6;
pub const DEFAULT_PROTOTYPES: usize = 8;
pub const MAX_EM_ITER: usize = 200;
pub const EM_TOL: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One Gaussian of a class mixture: a prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeComponent {
    weight: f64,
    mean: Vec<f64>,
    covariance: Vec<f64>,
    cholesky: Vec<f64>,
    log_det: f64,
}

impl PrototypeComponent {
    /// `covariance` is row-major `m x m` and must be positive definite.
    pub fn new(weight: f64, mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let m = mean.len();
        if m == 0 || covariance.len() != m * m {
            return Err(PcxError::Shape(format!(
                "covariance of length {} does not match mean dimension {m}",
                covariance.len()
            )));
        }
        if !(weight > 0.0 && weight <= 1.0 + 1e-12) {
            return Err(PcxError::InvalidArgument(format!("weight {weight} outside (0, 1]")));
        }
        for i in 0..m {
            for j in 0..i {
                let (a, b) = (covariance[i * m + j], covariance[j * m + i]);
                if (a - b).abs() > 1e-7 * (1.0 + a.abs().max(b.abs())) {
                    return Err(PcxError::Numerical(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = cholesky(&covariance, m)?;
        let log_det = log_det_from_cholesky(&chol, m);
        Ok(Self {
            weight,
            mean,
            covariance,
            cholesky: chol,
            log_det,
        })
    }

    pub fn isotropic(weight: f64, mean: Vec<f64>, variance: f64) -> Result<Self> {
        let m = mean.len();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            cov[i * m + i] = variance;
        }
        Self::new(weight, mean, cov)
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn cholesky(&self) -> &[f64] {
        &self.cholesky
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn set_weight(&mut self, w: f64) {
        self.weight = w;
    }

    /// Squared Mahalanobis distance `(v - mu)^T Sigma^{-1} (v - mu)`.
    pub fn mahalanobis_sq(&self, v: &[f64]) -> f64 {
        let d: Vec<f64> = v.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        quad_form_inv(&self.cholesky, self.dim(), &d)
    }

    /// Gaussian log-density, without the mixture weight.
    pub fn log_density(&self, v: &[f64]) -> f64 {
        -0.5 * (self.dim() as f64 * LN_2PI + self.log_det + self.mahalanobis_sq(v))
    }

    /// `log(lambda) + log p(v)`.
    pub fn weighted_log_density(&self, v: &[f64]) -> f64 {
        self.weight.ln() + self.log_density(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    Full,
    Diagonal,
}

/// Bookkeeping recorded alongside a fitted mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub seed: u64,
    pub reg: f64,
    pub iterations: usize,
    pub converged: bool,
    pub covariance_kind: CovarianceKind,
    /// All training points were identical.
    pub degenerate: bool,
    /// Total training log-likelihood after each E-step.
    pub log_likelihood_trace: Vec<f64>,
}

/// Mixture of prototypes for one class at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeModel {
    pub class_id: usize,
    pub layer_index: usize,
    pub method: String,
    pub components: Vec<PrototypeComponent>,
    /// Training sample nearest (Euclidean) to each component mean.
    pub closest_training_index: Vec<Option<usize>>,
    /// Sorted per-sample log-likelihoods of the training data.
    pub training_log_likelihoods: Vec<f64>,
    pub fit: Option<FitInfo>,
}

impl PrototypeModel {
    pub fn from_components(class_id: usize, components: Vec<PrototypeComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(PcxError::InvalidArgument("mixture needs at least one component".into()));
        }
        let m = components[0].dim();
        if components.iter().any(|c| c.dim() != m) {
            return Err(PcxError::Shape("components differ in dimension".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(PcxError::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let k = components.len();
        Ok(Self {
            class_id,
            layer_index: 0,
            method: String::new(),
            components,
            closest_training_index: vec![None; k],
            training_log_likelihoods: Vec::new(),
            fit: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(PcxError::Shape(format!(
                "vector has {} concepts, model for class {} has {}",
                v.len(),
                self.class_id,
                self.dim()
            )));
        }
        Ok(())
    }

    /// Class log-likelihood `log sum_i lambda_i p_i(v)`.
    pub fn log_likelihood(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        Ok(self.log_likelihood_unchecked(v))
    }

    fn log_likelihood_unchecked(&self, v: &[f64]) -> f64 {
        let terms: Vec<f64> = self.components.iter().map(|c| c.weighted_log_density(v)).collect();
        log_sum_exp(&terms)
    }

    /// Percentile rank (0..=100) of `score` among the training log-likelihoods.
    pub fn training_percentile(&self, score: f64) -> Option<f64> {
        let n = self.training_log_likelihoods.len();
        if n == 0 {
            return None;
        }
        let below = self.training_log_likelihoods.partition_point(|&s| s <= score);
        Some(100.0 * below as f64 / n as f64)
    }

    /// Training log-likelihood at percentile `p` (linear interpolation).
    pub fn training_threshold(&self, p: f64) -> Option<f64> {
        (!self.training_log_likelihoods.is_empty())
            .then(|| percentile(&self.training_log_likelihoods, p))
    }

    /// Mixture mean `sum_i lambda_i mu_i`.
    pub fn mixture_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for c in &self.components {
            for (o, m) in out.iter_mut().zip(&c.mean) {
                *o += c.weight * m;
            }
        }
        out
    }
}

/// Linear-interpolation percentile of an ascending slice, `p` in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (p.clamp(0.0, 100.0) / 100.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub k: usize,
    pub seed: u64,
    pub reg: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Allow the switch to diagonal covariances when samples < 2 m.
    pub diagonal_fallback: bool,
}

impl FitOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            reg: DEFAULT_REG,
            max_iter: MAX_EM_ITER,
            tol: EM_TOL,
            diagonal_fallback: true,
        }
    }

    pub fn with_reg(mut self, reg: f64) -> Self {
        self.reg = reg;
        self
    }
}

fn validate(points: &[Vec<f64>]) -> Result<usize> {
    let m = points.first().map(Vec::len).unwrap_or(0);
    if m == 0 {
        return Err(PcxError::InvalidArgument("no points to fit".into()));
    }
    if points.iter().any(|p| p.len() != m) {
        return Err(PcxError::Shape("points have differing dimensions".into()));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(PcxError::Numerical("non-finite value in points".into()));
    }
    Ok(m)
}

struct MStep<'a> {
    points: &'a [Vec<f64>],
    m: usize,
    reg: f64,
    kind: CovarianceKind,
    /// Per-dimension scale used when a component's own trace vanishes.
    global_scale: f64,
}

impl MStep<'_> {
    /// `resp[i][c]` is the responsibility of component `c` for point `i`.
    fn run(&self, resp: &[Vec<f64>], previous: Option<&[PrototypeComponent]>) -> Result<Vec<PrototypeComponent>> {
        let (n, m) = (self.points.len(), self.m);
        let k = resp[0].len();
        let mut comps = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(k);
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk < 1e-10 * n as f64 {
                // starved component keeps its previous shape with a tiny weight
                let prev = previous.ok_or_else(|| {
                    PcxError::Numerical(format!("component {c} received no points"))
                })?;
                comps.push(prev[c].clone());
                weights.push(nk.max(f64::MIN_POSITIVE));
                continue;
            }
            let mut mean = vec![0.0f64; m];
            for (r, p) in resp.iter().zip(self.points) {
                let w = r[c];
                for (mu, x) in mean.iter_mut().zip(p) {
                    *mu += w * x;
                }
            }
            mean.iter_mut().for_each(|mu| *mu /= nk);
            let mut cov = vec![0.0f64; m * m];
            for (r, p) in resp.iter().zip(self.points) {
                let w = r[c];
                if w == 0.0 {
                    continue;
                }
                let d: Vec<f64> = p.iter().zip(&mean).map(|(x, mu)| x - mu).collect();
                for i in 0..m {
                    let wi = w * d[i];
                    for j in 0..=i {
                        cov[i * m + j] += wi * d[j];
                    }
                }
            }
            for i in 0..m {
                for j in 0..=i {
                    let v = cov[i * m + j] / nk;
                    cov[i * m + j] = v;
                    cov[j * m + i] = v;
                }
            }
            if self.kind == CovarianceKind::Diagonal {
                for i in 0..m {
                    for j in 0..m {
                        if i != j {
                            cov[i * m + j] = 0.0;
                        }
                    }
                }
            }
            let trace: f64 = (0..m).map(|i| cov[i * m + i]).sum();
            let scale = if trace > 0.0 { trace / m as f64 } else { self.global_scale };
            let ridge = self.reg * scale;
            for i in 0..m {
                cov[i * m + i] += ridge;
            }
            weights.push(nk);
            comps.push(PrototypeComponent::new(1.0, mean, cov)?);
        }
        let total: f64 = weights.iter().sum();
        for (comp, w) in comps.iter_mut().zip(weights) {
            comp.set_weight(w / total);
        }
        Ok(comps)
    }
}

/// E-step: per-point responsibilities and the total log-likelihood.
fn e_step(points: &[Vec<f64>], comps: &[PrototypeComponent]) -> (Vec<Vec<f64>>, f64) {
    let mut total = 0.0;
    let resp = points
        .iter()
        .map(|p| {
            let logs: Vec<f64> = comps.iter().map(|c| c.weighted_log_density(p)).collect();
            let lse = log_sum_exp(&logs);
            total += lse;
            logs.into_iter().map(|l| (l - lse).exp()).collect()
        })
        .collect();
    (resp, total)
}

/// Fits a `k`-component mixture by EM, initialised from k-means labels.
pub fn fit_gmm(points: &[Vec<f64>], opts: &FitOptions) -> Result<PrototypeModel> {
    let m = validate(points)?;
    let n = points.len();
    if opts.k == 0 {
        return Err(PcxError::InvalidArgument("k must be >= 1".into()));
    }
    if n < opts.k {
        return Err(PcxError::InvalidArgument(format!(
            "{n} samples cannot support {} prototypes",
            opts.k
        )));
    }
    if !(opts.reg > 0.0) {
        return Err(PcxError::InvalidArgument("reg must be > 0".into()));
    }
    let kind = if opts.diagonal_fallback && n < 2 * m {
        CovarianceKind::Diagonal
    } else {
        CovarianceKind::Full
    };
    let global_scale = {
        let mean: Vec<f64> = (0..m)
            .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let var: f64 = points.iter().map(|p| sq_dist(p, &mean)).sum::<f64>() / n as f64;
        if var > 0.0 {
            var / m as f64
        } else {
            1.0
        }
    };

    if points.iter().all(|p| *p == points[0]) {
        let comp = PrototypeComponent::isotropic(1.0, points[0].clone(), opts.reg)?;
        let mut model = PrototypeModel::from_components(0, vec![comp])?;
        model.fit = Some(FitInfo {
            seed: opts.seed,
            reg: opts.reg,
            iterations: 0,
            converged: true,
            covariance_kind: kind,
            degenerate: true,
            log_likelihood_trace: Vec::new(),
        });
        finish(&mut model, points);
        return Ok(model);
    }
    if n < 2 {
        return Err(PcxError::InvalidArgument("covariance estimation needs >= 2 samples".into()));
    }

    let init = kmeans(points, opts.k, opts.seed)?;
    let mut resp: Vec<Vec<f64>> = init
        .labels
        .iter()
        .map(|&l| {
            let mut r = vec![0.0; opts.k];
            r[l] = 1.0;
            r
        })
        .collect();
    let mstep = MStep {
        points,
        m,
        reg: opts.reg,
        kind,
        global_scale,
    };
    let mut comps = mstep.run(&resp, None)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let (r, ll) = e_step(points, &comps);
        if !ll.is_finite() {
            return Err(PcxError::Numerical(format!("log-likelihood became {ll} at iteration {it}")));
        }
        resp = r;
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(p) = prev {
            if ll - p < opts.tol * p.abs() {
                converged = true;
                break;
            }
        }
        comps = mstep.run(&resp, Some(&comps))?;
    }
    let mut model = PrototypeModel::from_components(0, comps)?;
    model.fit = Some(FitInfo {
        seed: opts.seed,
        reg: opts.reg,
        iterations,
        converged,
        covariance_kind: kind,
        degenerate: false,
        log_likelihood_trace: trace,
    });
    finish(&mut model, points);
    Ok(model)
}

fn finish(model: &mut PrototypeModel, points: &[Vec<f64>]) {
    model.closest_training_index = model
        .components
        .iter()
        .map(|c| {
            let mut best: Option<(usize, f64)> = None;
            for (i, p) in points.iter().enumerate() {
                let d = sq_dist(p, c.mean());
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            best.map(|(i, _)| i)
        })
        .collect();
    let mut scores: Vec<f64> = points.iter().map(|p| model.log_likelihood_unchecked(p)).collect();
    scores.sort_by(f64::total_cmp);
    model.training_log_likelihoods = scores;
}

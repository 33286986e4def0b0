//! Concept attribution vectors for a single prediction.
//!
//! With the identity basis every channel (or neuron, for vector layers) of a
//! layer is one concept. Relevance-flavored vectors come from LRP,
//! Input x Gradient or GuidedBackprop; activation-flavored vectors pool the
//! layer's activations. Spatial maps are summed per channel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backward::{propagate, ChannelMask, Rule};
use crate::error::{PcxError, Result};
use crate::net::{ActivationTrace, Network};
use crate::tensor::Tensor;

/// Default LRP stabilizer.
pub const DEFAULT_EPSILON: f32 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LrpEps,
    LrpComposite,
    InputXGradient,
    GuidedBackprop,
    ActivationMax,
    ActivationSum,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::LrpEps,
        Method::LrpComposite,
        Method::InputXGradient,
        Method::GuidedBackprop,
        Method::ActivationMax,
        Method::ActivationSum,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::LrpEps => "lrp-eps",
            Method::LrpComposite => "lrp-composite",
            Method::InputXGradient => "input-x-gradient",
            Method::GuidedBackprop => "guided-backprop",
            Method::ActivationMax => "activation-max",
            Method::ActivationSum => "activation-sum",
        }
    }

    pub fn flavor(self) -> Flavor {
        match self {
            Method::ActivationMax | Method::ActivationSum => Flavor::Activation,
            _ => Flavor::Relevance,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Method {
    type Err = PcxError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = Method::ALL.iter().map(|m| m.id()).collect();
                PcxError::InvalidArgument(format!(
                    "unknown method '{s}', expected one of {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Relevance,
    Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Max,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptVector {
    pub values: Vec<f32>,
    pub layer_index: usize,
    pub flavor: Flavor,
    pub method: Method,
    pub normalized: bool,
}

impl ConceptVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs() as f64).sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Number of concepts (channels, or neurons for vector layers) at a layer.
pub fn concept_count(net: &Network, layer_index: usize) -> usize {
    net.output_shape(layer_index)[0]
}

/// Sums a `[c, h, w]` map per channel; vectors pass through.
pub fn aggregate_channels(t: &Tensor) -> Vec<f32> {
    let c = t.shape()[0];
    let per = t.len() / c;
    t.data()
        .chunks_exact(per)
        .map(|chunk| chunk.iter().fold(0.0f32, |acc, &v| acc + v))
        .collect()
}

fn check(net: &Network, class_index: usize, layer_index: usize) -> Result<()> {
    net.check_layer(layer_index)?;
    net.check_class(class_index)
}

fn relevance_vector(
    net: &Network,
    input: &Tensor,
    class_index: usize,
    layer_index: usize,
    rule: Rule,
    method: Method,
) -> Result<ConceptVector> {
    check(net, class_index, layer_index)?;
    let trace = net.forward(input)?;
    let mut seed = vec![0.0f32; net.class_count()];
    seed[class_index] = trace.logits()[class_index];
    let relevance = propagate(net, input, &trace, seed, Some(layer_index), rule, None);
    Ok(ConceptVector {
        values: aggregate_channels(&relevance),
        layer_index,
        flavor: Flavor::Relevance,
        method,
        normalized: false,
    })
}

/// LRP epsilon rule, `R_i = sum_j z_ij / (z_j + eps * sign(z_j)) R_j` with
/// `sign(0) = 1`. Bias terms absorb their share of relevance.
pub fn lrp_epsilon(
    net: &Network,
    input: &Tensor,
    class_index: usize,
    layer_index: usize,
    epsilon: f32,
) -> Result<ConceptVector> {
    if !(epsilon > 0.0) {
        return Err(PcxError::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    relevance_vector(
        net,
        input,
        class_index,
        layer_index,
        Rule::LrpEpsilon(epsilon),
        Method::LrpEps,
    )
}

/// z-plus rule in conv layers, epsilon rule elsewhere.
pub fn lrp_composite(
    net: &Network,
    input: &Tensor,
    class_index: usize,
    layer_index: usize,
) -> Result<ConceptVector> {
    relevance_vector(
        net,
        input,
        class_index,
        layer_index,
        Rule::LrpComposite(DEFAULT_EPSILON),
        Method::LrpComposite,
    )
}

fn gradient_times_activation(
    net: &Network,
    input: &Tensor,
    class_index: usize,
    layer_index: usize,
    rule: Rule,
    method: Method,
) -> Result<ConceptVector> {
    check(net, class_index, layer_index)?;
    let trace = net.forward(input)?;
    let mut seed = vec![0.0f32; net.class_count()];
    seed[class_index] = 1.0;
    let grad = propagate(net, input, &trace, seed, Some(layer_index), rule, None);
    let act = trace.layer(layer_index);
    let prod: Vec<f32> = act.data().iter().zip(grad.data()).map(|(a, g)| a * g).collect();
    let prod = Tensor::new(act.shape().to_vec(), prod)?;
    Ok(ConceptVector {
        values: aggregate_channels(&prod),
        layer_index,
        flavor: Flavor::Relevance,
        method,
        normalized: false,
    })
}

pub fn input_x_gradient(
    net: &Network,
    input: &Tensor,
    class_index: usize,
    layer_index: usize,
) -> Result<ConceptVector> {
    gradient_times_activation(
        net,
        input,
        class_index,
        layer_index,
        Rule::Gradient,
        Method::InputXGradient,
    )
}

pub fn guided_backprop(
    net: &Network,
    input: &Tensor,
    class_index: usize,
    layer_index: usize,
) -> Result<ConceptVector> {
    gradient_times_activation(
        net,
        input,
        class_index,
        layer_index,
        Rule::GuidedGradient,
        Method::GuidedBackprop,
    )
}

/// Max- or sum-pools each channel of a layer's activations.
pub fn activation_pool(trace: &ActivationTrace, layer_index: usize, pool: Pool) -> Result<ConceptVector> {
    if layer_index >= trace.outputs.len() {
        return Err(PcxError::IndexOutOfRange {
            what: "layer",
            index: layer_index,
            limit: trace.outputs.len(),
        });
    }
    let act = trace.layer(layer_index);
    let values = match pool {
        Pool::Sum => aggregate_channels(act),
        Pool::Max => {
            let c = act.shape()[0];
            act.data()
                .chunks_exact(act.len() / c)
                .map(|chunk| chunk.iter().copied().fold(f32::NEG_INFINITY, f32::max))
                .collect()
        }
    };
    Ok(ConceptVector {
        values,
        layer_index,
        flavor: Flavor::Activation,
        method: match pool {
            Pool::Max => Method::ActivationMax,
            Pool::Sum => Method::ActivationSum,
        },
        normalized: false,
    })
}

/// Scales to unit absolute sum.
pub fn normalize(v: &ConceptVector) -> Result<ConceptVector> {
    let total = v.abs_sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(PcxError::Degenerate(format!(
            "concept vector at layer {} has zero absolute sum",
            v.layer_index
        )));
    }
    Ok(ConceptVector {
        values: v.values.iter().map(|&x| (x as f64 / total) as f32).collect(),
        normalized: true,
        ..v.clone()
    })
}

/// Dispatches to the attribution routine for `method`.
pub fn attribute(
    net: &Network,
    input: &Tensor,
    method: Method,
    class_index: usize,
    layer_index: usize,
    epsilon: f32,
) -> Result<ConceptVector> {
    match method {
        Method::LrpEps => lrp_epsilon(net, input, class_index, layer_index, epsilon),
        Method::LrpComposite => relevance_vector(
            net,
            input,
            class_index,
            layer_index,
            Rule::LrpComposite(epsilon),
            Method::LrpComposite,
        ),
        Method::InputXGradient => input_x_gradient(net, input, class_index, layer_index),
        Method::GuidedBackprop => guided_backprop(net, input, class_index, layer_index),
        Method::ActivationMax | Method::ActivationSum => {
            check(net, class_index, layer_index)?;
            let pool = if method == Method::ActivationMax {
                Pool::Max
            } else {
                Pool::Sum
            };
            activation_pool(&net.forward(input)?, layer_index, pool)
        }
    }
}

/// Attributes many samples in parallel; output order follows `inputs`.
/// `classes[i]` is the class to explain for `inputs[i]`.
pub fn attribute_batch(
    net: &Network,
    inputs: &[Tensor],
    classes: &[usize],
    method: Method,
    layer_index: usize,
    epsilon: f32,
) -> Result<Vec<ConceptVector>> {
    if inputs.len() != classes.len() {
        return Err(PcxError::InvalidArgument("one class per input required".into()));
    }
    inputs
        .par_iter()
        .zip(classes.par_iter())
        .map(|(x, &c)| attribute(net, x, method, c, layer_index, epsilon))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConceptBasis {
    Identity,
    /// `n x m` matrix whose unit-norm columns are concept directions.
    Matrix(Tensor),
}

impl ConceptBasis {
    pub fn matrix(u: Tensor) -> Result<Self> {
        if u.shape().len() != 2 {
            return Err(PcxError::Shape(format!("basis must be rank 2, got {:?}", u.shape())));
        }
        let (n, m) = (u.shape()[0], u.shape()[1]);
        for j in 0..m {
            let norm: f64 = (0..n).map(|i| (u.data()[i * m + j] as f64).powi(2)).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-5 {
                return Err(PcxError::InvalidArgument(format!(
                    "basis column {j} has norm {norm}, expected unit norm"
                )));
            }
        }
        Ok(ConceptBasis::Matrix(u))
    }
}

/// Decomposes an activation vector onto the basis by least squares.
pub fn project_basis(v: &ConceptVector, basis: &ConceptBasis) -> Result<ConceptVector> {
    let u = match basis {
        ConceptBasis::Identity => return Ok(v.clone()),
        ConceptBasis::Matrix(u) => u,
    };
    let (n, m) = (u.shape()[0], u.shape()[1]);
    if v.len() != n {
        return Err(PcxError::Shape(format!(
            "basis has {n} rows but concept vector has {} entries",
            v.len()
        )));
    }
    // modified Gram-Schmidt, column by column
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0f64; m]; m];
    let mut deficient = Vec::new();
    for j in 0..m {
        let col: Vec<f64> = (0..n).map(|i| u.data()[i * m + j] as f64).collect();
        let orig = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut w = col;
        for (k, qk) in q.iter().enumerate() {
            if qk.is_empty() {
                continue;
            }
            let d: f64 = qk.iter().zip(&w).map(|(a, b)| a * b).sum();
            r[k][j] = d;
            for (wi, qi) in w.iter_mut().zip(qk) {
                *wi -= d * qi;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if orig == 0.0 || norm <= 1e-10 * orig.max(1.0) {
            deficient.push(j);
            q.push(Vec::new());
            continue;
        }
        r[j][j] = norm;
        q.push(w.into_iter().map(|x| x / norm).collect());
    }
    if !deficient.is_empty() {
        return Err(PcxError::RankDeficient { columns: deficient });
    }
    let a = v.to_f64();
    let qta: Vec<f64> = q.iter().map(|qk| qk.iter().zip(&a).map(|(x, y)| x * y).sum()).collect();
    let mut nu = vec![0.0f64; m];
    for j in (0..m).rev() {
        let mut s = qta[j];
        for k in j + 1..m {
            s -= r[j][k] * nu[k];
        }
        nu[j] = s / r[j][j];
    }
    Ok(ConceptVector {
        values: nu.into_iter().map(|x| x as f32).collect(),
        normalized: false,
        ..v.clone()
    })
}

/// Input-level relevance map, optionally restricted to one concept.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub values: Tensor,
    pub concept_index: Option<usize>,
}

/// Full LRP input heatmap (epsilon rule) for `class_index`.
pub fn lrp_heatmap(net: &Network, input: &Tensor, class_index: usize, epsilon: f32) -> Result<Heatmap> {
    net.check_class(class_index)?;
    let trace = net.forward(input)?;
    let mut seed = vec![0.0f32; net.class_count()];
    seed[class_index] = trace.logits()[class_index];
    Ok(Heatmap {
        values: propagate(net, input, &trace, seed, None, Rule::LrpEpsilon(epsilon), None),
        concept_index: None,
    })
}

/// LRP input heatmap where, at `layer_index`, all relevance except that of
/// `concept_index` is discarded before the pass continues to the input.
pub fn concept_heatmap(
    net: &Network,
    input: &Tensor,
    class_index: usize,
    layer_index: usize,
    concept_index: usize,
) -> Result<Heatmap> {
    check(net, class_index, layer_index)?;
    let concepts = concept_count(net, layer_index);
    if concept_index >= concepts {
        return Err(PcxError::IndexOutOfRange {
            what: "concept",
            index: concept_index,
            limit: concepts,
        });
    }
    let trace = net.forward(input)?;
    let mut seed = vec![0.0f32; net.class_count()];
    seed[class_index] = trace.logits()[class_index];
    let mask = ChannelMask {
        layer: layer_index,
        channel: concept_index,
    };
    Ok(Heatmap {
        values: propagate(
            net,
            input,
            &trace,
            seed,
            None,
            Rule::LrpEpsilon(DEFAULT_EPSILON),
            Some(mask),
        ),
        concept_index: Some(concept_index),
    })
}

/// Indices of the `k` samples with the largest relevance for `concept_index`,
/// in descending order; lower sample index wins ties.
pub fn relmax_select(relevance: &Tensor, concept_index: usize, k: usize) -> Result<Vec<usize>> {
    if relevance.shape().len() != 2 {
        return Err(PcxError::Shape(format!(
            "relevance matrix must be samples x concepts, got {:?}",
            relevance.shape()
        )));
    }
    let (rows, cols) = (relevance.shape()[0], relevance.shape()[1]);
    if concept_index >= cols {
        return Err(PcxError::IndexOutOfRange {
            what: "concept",
            index: concept_index,
            limit: cols,
        });
    }
    if k > rows {
        return Err(PcxError::InvalidArgument(format!("k = {k} exceeds sample count {rows}")));
    }
    let mut idx: Vec<usize> = (0..rows).collect();
    let col = |i: usize| relevance.data()[i * cols + concept_index];
    idx.sort_by(|&a, &b| col(b).total_cmp(&col(a)).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Layer;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn identity(n: usize) -> Layer {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        Layer::dense(t(&[n, n], &w), None)
    }

    /// a = x (identity hidden layer), y = [1, -2] . a
    fn linear_head() -> Network {
        Network::new(
            vec![identity(2), Layer::dense(t(&[1, 2], &[1.0, -2.0]), None)],
            vec![2],
            1,
        )
        .unwrap()
    }

    fn assert_close(a: &[f32], b: &[f32], tol: f32) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn lrp_single_linear_layer() {
        let net = linear_head();
        let v = lrp_epsilon(&net, &t(&[2], &[3.0, 1.0]), 0, 0, 1e-9).unwrap();
        assert_close(&v.values, &[3.0, -2.0], 1e-6);
        assert_eq!(v.flavor, Flavor::Relevance);
        assert!(!v.normalized);
        assert!(lrp_epsilon(&net, &t(&[2], &[3.0, 1.0]), 0, 0, 0.0).is_err());
    }

    #[test]
    fn zero_input_gives_zero_relevance() {
        let net = Network::new(
            vec![
                Layer::dense(t(&[3, 2], &[1.0, -1.0, 0.5, 2.0, -0.3, 0.7]), None),
                Layer::Relu,
                Layer::dense(t(&[2, 3], &[1.0, 0.5, -1.0, 0.2, 0.3, 0.4]), None),
            ],
            vec![2],
            2,
        )
        .unwrap();
        let v = lrp_epsilon(&net, &t(&[2], &[0.0, 0.0]), 1, 1, 1e-9).unwrap();
        assert_eq!(v.values, vec![0.0; 3]);
    }

    #[test]
    fn input_x_gradient_linear_head() {
        let v = input_x_gradient(&linear_head(), &t(&[2], &[3.0, 1.0]), 0, 0).unwrap();
        assert_eq!(v.values, vec![3.0, -2.0]);
    }

    #[test]
    fn dead_channel_has_zero_ixg() {
        // hidden neuron 1 is dead after the ReLU so its gradient is zero
        let net = Network::new(
            vec![
                identity(2),
                Layer::Relu,
                Layer::dense(t(&[1, 2], &[1.0, 1.0]), None),
            ],
            vec![2],
            1,
        )
        .unwrap();
        let v = input_x_gradient(&net, &t(&[2], &[2.0, -3.0]), 0, 0).unwrap();
        assert_eq!(v.values, vec![2.0, 0.0]);
    }

    /// x -> dense [[1],[ -1]] -> relu -> dense [[1, 1]] -> relu -> dense [[-1]]
    /// carries a negative top-gradient into the second ReLU.
    #[test]
    fn guided_backprop_clamps_negative_top_gradient() {
        let net = Network::new(
            vec![
                Layer::dense(t(&[2, 1], &[1.0, 2.0]), None),
                Layer::Relu,
                Layer::dense(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]), None),
                Layer::Relu,
                Layer::dense(t(&[1, 2], &[1.0, -1.0]), None),
            ],
            vec![1],
            1,
        )
        .unwrap();
        let x = t(&[1], &[1.0]);
        // hidden a0 = [1, 2]; plain gradient w.r.t. a0 is [1, -1]
        let ixg = input_x_gradient(&net, &x, 0, 0).unwrap();
        assert_eq!(ixg.values, vec![1.0, -2.0]);
        // guided: the -1 entry is clamped at the second ReLU
        let gb = guided_backprop(&net, &x, 0, 0).unwrap();
        assert_eq!(gb.values, vec![1.0, 0.0]);
    }

    #[test]
    fn guided_matches_ixg_without_relu() {
        let net = linear_head();
        let x = t(&[2], &[0.7, -1.3]);
        assert_eq!(
            guided_backprop(&net, &x, 0, 0).unwrap().values,
            input_x_gradient(&net, &x, 0, 0).unwrap().values
        );
    }

    #[test]
    fn pooling() {
        let net = Network::new(
            vec![
                Layer::AvgPool2d { kernel: 1, stride: 1 },
                Layer::Flatten,
                Layer::dense(t(&[1, 4], &[1.0; 4]), None),
            ],
            vec![1, 2, 2],
            1,
        )
        .unwrap();
        let trace = net.forward(&t(&[1, 2, 2], &[1.0, 3.0, 5.0, 7.0])).unwrap();
        assert_eq!(activation_pool(&trace, 0, Pool::Sum).unwrap().values, vec![16.0]);
        assert_eq!(activation_pool(&trace, 0, Pool::Max).unwrap().values, vec![7.0]);

        let trace = linear_head().forward(&t(&[2], &[2.0, -1.0])).unwrap();
        for pool in [Pool::Max, Pool::Sum] {
            let v = activation_pool(&trace, 0, pool).unwrap();
            assert_eq!(v.values, vec![2.0, -1.0]);
            assert_eq!(v.flavor, Flavor::Activation);
        }
    }

    #[test]
    fn normalize_examples() {
        let mk = |v: &[f32]| ConceptVector {
            values: v.to_vec(),
            layer_index: 0,
            flavor: Flavor::Relevance,
            method: Method::LrpEps,
            normalized: false,
        };
        assert_close(&normalize(&mk(&[3.0, -2.0])).unwrap().values, &[0.6, -0.4], 1e-7);
        assert_eq!(normalize(&mk(&[0.0, 5.0])).unwrap().values, vec![0.0, 1.0]);
        let once = normalize(&mk(&[0.2, -0.5, 0.3])).unwrap();
        let twice = normalize(&once).unwrap();
        assert_close(&once.values, &twice.values, 1e-7);
        assert!(twice.normalized);
        assert!(matches!(normalize(&mk(&[0.0, 0.0])), Err(PcxError::Degenerate(_))));
    }

    #[test]
    fn basis_projection() {
        let v = ConceptVector {
            values: vec![1.0, 0.0],
            layer_index: 0,
            flavor: Flavor::Activation,
            method: Method::ActivationSum,
            normalized: false,
        };
        assert_eq!(project_basis(&v, &ConceptBasis::Identity).unwrap(), v);
        // columns (0, 1) and (-1, 0): rotation by 90 degrees
        let rot = ConceptBasis::matrix(t(&[2, 2], &[0.0, -1.0, 1.0, 0.0])).unwrap();
        assert_close(&project_basis(&v, &rot).unwrap().values, &[0.0, -1.0], 1e-6);

        let dup = ConceptBasis::matrix(t(&[2, 3], &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0])).unwrap();
        match project_basis(&v, &dup) {
            Err(PcxError::RankDeficient { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("{other:?}"),
        }
        assert!(ConceptBasis::matrix(t(&[2, 1], &[1.0, 1.0])).is_err());
    }

    #[test]
    fn heatmap_single_concept_equals_full() {
        let net = Network::new(
            vec![
                Layer::dense(t(&[1, 3], &[0.5, -1.0, 2.0]), None),
                Layer::Relu,
                Layer::dense(t(&[2, 1], &[1.0, -1.0]), None),
            ],
            vec![3],
            2,
        )
        .unwrap();
        let x = t(&[3], &[1.0, 0.5, 0.25]);
        let full = lrp_heatmap(&net, &x, 0, DEFAULT_EPSILON).unwrap();
        let one = concept_heatmap(&net, &x, 0, 1, 0).unwrap();
        assert_eq!(one.values, full.values);
        assert_eq!(one.concept_index, Some(0));
        assert!(concept_heatmap(&net, &x, 0, 1, 1).is_err());
    }

    #[test]
    fn heatmap_of_irrelevant_concept_is_zero() {
        // hidden neuron 1 has zero outgoing weight
        let net = Network::new(
            vec![
                Layer::dense(t(&[2, 2], &[1.0, 0.5, 0.3, 1.0]), None),
                Layer::Relu,
                Layer::dense(t(&[1, 2], &[1.0, 0.0]), None),
            ],
            vec![2],
            1,
        )
        .unwrap();
        let h = concept_heatmap(&net, &t(&[2], &[1.0, 2.0]), 0, 1, 1).unwrap();
        assert_eq!(h.values.data(), &[0.0, 0.0]);
    }

    #[test]
    fn relmax() {
        let m = t(&[3, 1], &[0.1, 0.9, 0.5]);
        assert_eq!(relmax_select(&m, 0, 2).unwrap(), vec![1, 2]);
        let m = t(&[3, 1], &[0.4, 0.4, 0.4]);
        assert_eq!(relmax_select(&m, 0, 2).unwrap(), vec![0, 1]);
        assert!(relmax_select(&m, 0, 4).is_err());
        assert!(relmax_select(&m, 1, 1).is_err());
    }

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
        }
        assert!("gradcam".parse::<Method>().is_err());
    }
}

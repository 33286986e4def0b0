//! Backward passes shared by gradients, GuidedBackprop and LRP.

use crate::net::{linear_forward, linear_transpose, maxpool_winner, ActivationTrace, Layer, Network, WeightMap};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Gradient,
    /// Gradient with negative upstream entries clamped at every ReLU.
    GuidedGradient,
    /// LRP epsilon rule in every linear layer.
    LrpEpsilon(f32),
    /// LRP z-plus rule in conv layers, epsilon rule in all other linear layers.
    LrpComposite(f32),
}

/// Restricts the backward signal at a layer output to a single channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelMask {
    pub layer: usize,
    pub channel: usize,
}

/// Propagates `seed` (shaped like the logits) from the top of the network
/// down to the output of `stop_at`, or to the network input when `None`.
pub(crate) fn propagate(
    net: &Network,
    input: &Tensor,
    trace: &ActivationTrace,
    seed: Vec<f32>,
    stop_at: Option<usize>,
    rule: Rule,
    mask: Option<ChannelMask>,
) -> Tensor {
    let mut signal = seed;
    for j in (0..net.len()).rev() {
        if let Some(m) = mask.filter(|m| m.layer == j) {
            keep_channel(&mut signal, net.output_shape(j), m.channel);
        }
        if stop_at == Some(j) {
            return Tensor::new(net.output_shape(j).to_vec(), signal).expect("shape");
        }
        let x = if j == 0 { input } else { trace.layer(j - 1) };
        signal = layer_backward(&net.layers()[j], x, &signal, net.output_shape(j), rule);
    }
    Tensor::new(net.input_shape().to_vec(), signal).expect("shape")
}

fn keep_channel(signal: &mut [f32], shape: &[usize], channel: usize) {
    let per = shape[1..].iter().product::<usize>();
    for (i, v) in signal.iter_mut().enumerate() {
        if i / per != channel {
            *v = 0.0;
        }
    }
}

fn layer_backward(layer: &Layer, x: &Tensor, upper: &[f32], out_shape: &[usize], rule: Rule) -> Vec<f32> {
    match layer {
        Layer::Dense { .. } | Layer::Conv2d { .. } | Layer::AvgPool2d { .. } => match rule {
            Rule::Gradient | Rule::GuidedGradient => {
                linear_transpose(layer, upper, x.shape(), WeightMap::Identity)
            }
            Rule::LrpComposite(_) if matches!(layer, Layer::Conv2d { .. }) => {
                lrp_zplus(layer, x, upper)
            }
            Rule::LrpEpsilon(eps) | Rule::LrpComposite(eps) => lrp_epsilon(layer, x, upper, eps),
        },
        Layer::Relu => match rule {
            Rule::Gradient => x
                .data()
                .iter()
                .zip(upper)
                .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
                .collect(),
            Rule::GuidedGradient => x
                .data()
                .iter()
                .zip(upper)
                .map(|(&z, &g)| if z > 0.0 { g.max(0.0) } else { 0.0 })
                .collect(),
            Rule::LrpEpsilon(_) | Rule::LrpComposite(_) => upper.to_vec(),
        },
        Layer::MaxPool2d { kernel, stride } => {
            let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let (oh, ow) = (out_shape[1], out_shape[2]);
            let mut out = vec![0.0f32; x.len()];
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let winner =
                            maxpool_winner(x.data(), ch, h, w, oy * stride, ox * stride, *kernel);
                        out[winner] += upper[(ch * oh + oy) * ow + ox];
                    }
                }
            }
            out
        }
        Layer::Flatten => upper.to_vec(),
    }
}

/// sign with sign(0) = 1
#[inline]
fn stabilizer_sign(z: f32) -> f32 {
    if z >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn lrp_epsilon(layer: &Layer, x: &Tensor, relevance: &[f32], eps: f32) -> Vec<f32> {
    let z = linear_forward(layer, x.data(), x.shape(), WeightMap::Identity, false);
    let s: Vec<f32> = z
        .iter()
        .zip(relevance)
        .map(|(&zj, &rj)| rj / (zj + eps * stabilizer_sign(zj)))
        .collect();
    let c = linear_transpose(layer, &s, x.shape(), WeightMap::Identity);
    x.data().iter().zip(c).map(|(&xi, ci)| xi * ci).collect()
}

/// z-plus rule: `(w x)^+ = w^+ x^+ + w^- x^-`, so the positive contributions
/// split into two ordinary linear passes.
fn lrp_zplus(layer: &Layer, x: &Tensor, relevance: &[f32]) -> Vec<f32> {
    let xp: Vec<f32> = x.data().iter().map(|&v| v.max(0.0)).collect();
    let xn: Vec<f32> = x.data().iter().map(|&v| v.min(0.0)).collect();
    let zp = linear_forward(layer, &xp, x.shape(), WeightMap::Positive, false);
    let zn = linear_forward(layer, &xn, x.shape(), WeightMap::Negative, false);
    let s: Vec<f32> = zp
        .iter()
        .zip(&zn)
        .zip(relevance)
        .map(|((&a, &b), &r)| {
            let z = a + b;
            if z > 0.0 {
                r / z
            } else {
                0.0
            }
        })
        .collect();
    let cp = linear_transpose(layer, &s, x.shape(), WeightMap::Positive);
    let cn = linear_transpose(layer, &s, x.shape(), WeightMap::Negative);
    xp.iter()
        .zip(&xn)
        .zip(cp.iter().zip(&cn))
        .map(|((&p, &n), (&a, &b))| p * a + n * b)
        .collect()
}

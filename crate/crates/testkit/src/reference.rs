//! Straightforward float64 forward pass over a `pcx_core::Network`'s layers.

use pcx_core::{Layer, Network};

/// Per-layer outputs plus the discrete choices made along the way: the sign
/// of every ReLU input and the winner of every max-pool window.
#[derive(Debug, Clone, PartialEq)]
pub struct Pass {
    pub outputs: Vec<Vec<f64>>,
    pub pattern: Vec<Vec<usize>>,
    /// Smallest |ReLU input| or top-two gap of any max-pool window.
    pub margin: f64,
}

fn w64(t: &pcx_core::Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

fn apply(layer: &Layer, x: &[f64], shape: &[usize], pattern: &mut Vec<usize>, margin: &mut f64) -> Vec<f64> {
    match layer {
        Layer::Dense { weights, bias } => {
            let (rows, cols) = (weights.shape()[0], weights.shape()[1]);
            let w = w64(weights);
            let b = bias.as_ref().map(w64);
            (0..rows)
                .map(|r| {
                    let dot: f64 = (0..cols).map(|c| w[r * cols + c] * x[c]).sum();
                    dot + b.as_ref().map_or(0.0, |b| b[r])
                })
                .collect()
        }
        Layer::Conv2d {
            weights,
            bias,
            stride,
            padding,
        } => {
            let s = weights.shape();
            let (oc, ic, kh, kw) = (s[0], s[1], s[2], s[3]);
            let (h, wd) = (shape[1] as isize, shape[2] as isize);
            let p = *padding as isize;
            let oh = (h + 2 * p - kh as isize) / *stride as isize + 1;
            let ow = (wd + 2 * p - kw as isize) / *stride as isize + 1;
            let w = w64(weights);
            let b = bias.as_ref().map(w64);
            let mut out = Vec::new();
            for o in 0..oc {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b.as_ref().map_or(0.0, |b| b[o]);
                        for c in 0..ic {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = oy * *stride as isize + ky as isize - p;
                                    let ix = ox * *stride as isize + kx as isize - p;
                                    if (0..h).contains(&iy) && (0..wd).contains(&ix) {
                                        acc += w[((o * ic + c) * kh + ky) * kw + kx]
                                            * x[((c as isize * h + iy) * wd + ix) as usize];
                                    }
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
            out
        }
        Layer::Relu => x
            .iter()
            .map(|&v| {
                *margin = margin.min(v.abs());
                pattern.push(usize::from(v > 0.0));
                v.max(0.0)
            })
            .collect(),
        Layer::MaxPool2d { kernel, stride } | Layer::AvgPool2d { kernel, stride } => {
            let is_max = matches!(layer, Layer::MaxPool2d { .. });
            let (c, h, w) = (shape[0], shape[1], shape[2]);
            let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
            let mut out = Vec::new();
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let window: Vec<(usize, f64)> = (0..kernel * kernel)
                            .map(|t| {
                                let idx = (ch * h + oy * stride + t / kernel) * w + ox * stride + t % kernel;
                                (idx, x[idx])
                            })
                            .collect();
                        if is_max {
                            let mut sorted: Vec<f64> = window.iter().map(|p| p.1).collect();
                            sorted.sort_by(|a, b| b.total_cmp(a));
                            if sorted.len() > 1 {
                                *margin = margin.min(sorted[0] - sorted[1]);
                            }
                            let best = window.iter().copied().fold(window[0], |a, b| if b.1 > a.1 { b } else { a });
                            pattern.push(best.0);
                            out.push(best.1);
                        } else {
                            out.push(window.iter().map(|p| p.1).sum::<f64>() / (kernel * kernel) as f64);
                        }
                    }
                }
            }
            out
        }
        Layer::Flatten => x.to_vec(),
    }
}

/// Runs layers `from..` on `x`, the input of layer `from`.
pub fn forward_from(net: &Network, from: usize, x: &[f64]) -> Pass {
    let mut outputs = Vec::new();
    let mut pattern = Vec::new();
    let mut margin = f64::INFINITY;
    let mut cur = x.to_vec();
    for j in from..net.len() {
        let mut pat = Vec::new();
        cur = apply(&net.layers()[j], &cur, net.layer_input_shape(j), &mut pat, &mut margin);
        pattern.push(pat);
        outputs.push(cur.clone());
    }
    Pass {
        outputs,
        pattern,
        margin,
    }
}

pub fn forward(net: &Network, input: &[f64]) -> Pass {
    forward_from(net, 0, input)
}

/// Central finite differences of logit `class` with respect to the output
/// of layer `layer`. Coordinates whose perturbation flips a ReLU or changes
/// a max-pool winner are `None`: there the function is not differentiable
/// on the probed interval.
pub fn finite_difference(net: &Network, input: &[f64], layer: usize, class: usize, h: f64) -> Vec<Option<f64>> {
    let base = forward(net, input);
    let act = &base.outputs[layer];
    if layer + 1 == net.len() {
        // the activations are the logits themselves
        return (0..act.len()).map(|i| Some(if i == class { 1.0 } else { 0.0 })).collect();
    }
    let base_down = forward_from(net, layer + 1, act);
    (0..act.len())
        .map(|i| {
            let probe = |delta: f64| {
                let mut a = act.clone();
                a[i] += delta;
                forward_from(net, layer + 1, &a)
            };
            let (pu, pd) = (probe(h), probe(-h));
            if pu.pattern != base_down.pattern || pd.pattern != base_down.pattern {
                return None;
            }
            let logit = |p: &Pass| p.outputs.last().expect("non-empty")[class];
            Some((logit(&pu) - logit(&pd)) / (2.0 * h))
        })
        .collect()
}

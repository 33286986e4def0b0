//! Random networks and inputs.

use pcx_core::{Layer, Network, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

fn gaussian_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| (normal(rng) * scale) as f32).collect();
    Tensor::new(shape, data).expect("shape matches data")
}

/// Dense ReLU network with 1 to `max_layers` dense layers and at most
/// `max_units` units per layer.
pub fn random_dense(rng: &mut ChaCha8Rng, max_layers: usize, max_units: usize, with_bias: bool) -> Network {
    let depth = rng.random_range(1..=max_layers);
    let input = rng.random_range(2..=max_units.min(16));
    let classes = rng.random_range(2..=max_units.min(6));
    let mut widths = vec![input];
    for _ in 1..depth {
        widths.push(rng.random_range(2..=max_units));
    }
    widths.push(classes);
    let mut layers = Vec::new();
    for l in 0..depth {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let w = gaussian_tensor(rng, vec![fan_out, fan_in], 1.0 / (fan_in as f64).sqrt());
        let b = with_bias.then(|| gaussian_tensor(rng, vec![fan_out], 0.1));
        layers.push(Layer::dense(w, b));
        if l + 1 < depth {
            layers.push(Layer::Relu);
        }
    }
    Network::new(layers, vec![input], classes).expect("valid random net")
}

/// conv -> relu -> (max|avg)pool -> [conv -> relu] -> flatten -> dense.
pub fn random_conv(rng: &mut ChaCha8Rng, with_bias: bool) -> Network {
    let c_in = rng.random_range(1..=2);
    let side = rng.random_range(6..=8);
    let c1 = rng.random_range(2..=3);
    let padding = rng.random_range(0..=1);
    let conv = |rng: &mut ChaCha8Rng, oc: usize, ic: usize, padding: usize| Layer::Conv2d {
        weights: gaussian_tensor(rng, vec![oc, ic, 3, 3], 1.0 / ((ic * 9) as f64).sqrt()),
        bias: with_bias.then(|| gaussian_tensor(rng, vec![oc], 0.1)),
        stride: 1,
        padding,
    };
    let mut layers = vec![conv(rng, c1, c_in, padding), Layer::Relu];
    let mut s = side + 2 * padding - 2;
    layers.push(if rng.random_bool(0.5) {
        Layer::MaxPool2d { kernel: 2, stride: 2 }
    } else {
        Layer::AvgPool2d { kernel: 2, stride: 2 }
    });
    s = (s - 2) / 2 + 1;
    let mut c = c1;
    if s >= 3 && rng.random_bool(0.5) {
        let c2 = rng.random_range(2..=3);
        layers.push(conv(rng, c2, c1, 1));
        layers.push(Layer::Relu);
        c = c2;
    }
    layers.push(Layer::Flatten);
    let features = c * s * s;
    let classes = rng.random_range(2..=4);
    layers.push(Layer::dense(
        gaussian_tensor(rng, vec![classes, features], 1.0 / (features as f64).sqrt()),
        with_bias.then(|| gaussian_tensor(rng, vec![classes], 0.1)),
    ));
    Network::new(layers, vec![c_in, side, side], classes).expect("valid random conv net")
}

pub fn random_input(rng: &mut ChaCha8Rng, net: &Network) -> Tensor {
    gaussian_tensor(rng, net.input_shape().to_vec(), 1.0)
}

pub fn to_f64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

//! Deterministic feedforward inference engine.
//!
//! Every layer is a pure function of its input. Dot products accumulate in
//! `f32` strictly left to right so results are bitwise reproducible, and a
//! network can be re-entered at any intermediate layer with patched
//! activations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PcxError, Result};
use crate::io::{read_json, write_json};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `weights` is `[out, in]`, `bias` is `[out]`.
    Dense {
        weights: Tensor,
        bias: Option<Tensor>,
    },
    /// `weights` is `[out_ch, in_ch, kh, kw]`, `bias` is `[out_ch]`.
    Conv2d {
        weights: Tensor,
        bias: Option<Tensor>,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool2d {
        kernel: usize,
        stride: usize,
    },
    AvgPool2d {
        kernel: usize,
        stride: usize,
    },
    Flatten,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv2d { .. } => "conv2d",
            Layer::Relu => "relu",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::AvgPool2d { .. } => "avgpool2d",
            Layer::Flatten => "flatten",
        }
    }

    pub fn dense(weights: Tensor, bias: Option<Tensor>) -> Self {
        Layer::Dense { weights, bias }
    }

    fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match self {
            Layer::Dense { weights, bias } => {
                let ws = weights.shape();
                if ws.len() != 2 {
                    return Err(format!("dense weights must be rank 2, got {ws:?}"));
                }
                if input.len() != 1 || input[0] != ws[1] {
                    return Err(format!("dense layer expects input [{}], got {input:?}", ws[1]));
                }
                if let Some(b) = bias {
                    if b.shape() != [ws[0]] {
                        return Err(format!("dense bias must be [{}], got {:?}", ws[0], b.shape()));
                    }
                }
                Ok(vec![ws[0]])
            }
            Layer::Conv2d {
                weights,
                bias,
                stride,
                padding,
            } => {
                let ws = weights.shape();
                if ws.len() != 4 {
                    return Err(format!("conv2d weights must be rank 4, got {ws:?}"));
                }
                if *stride == 0 {
                    return Err("stride must be >= 1".into());
                }
                if input.len() != 3 || input[0] != ws[1] {
                    return Err(format!("conv2d expects [{}, h, w] input, got {input:?}", ws[1]));
                }
                if let Some(b) = bias {
                    if b.shape() != [ws[0]] {
                        return Err(format!("conv2d bias must be [{}], got {:?}", ws[0], b.shape()));
                    }
                }
                let (h, w) = (input[1] + 2 * padding, input[2] + 2 * padding);
                if h < ws[2] || w < ws[3] {
                    return Err(format!("kernel {:?} larger than padded input {h}x{w}", &ws[2..]));
                }
                Ok(vec![ws[0], (h - ws[2]) / stride + 1, (w - ws[3]) / stride + 1])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::MaxPool2d { kernel, stride } | Layer::AvgPool2d { kernel, stride } => {
                if *stride == 0 || *kernel == 0 {
                    return Err("pool kernel and stride must be >= 1".into());
                }
                if input.len() != 3 {
                    return Err(format!("pooling expects [c, h, w] input, got {input:?}"));
                }
                if input[1] < *kernel || input[2] < *kernel {
                    return Err(format!("pool kernel {kernel} larger than input {input:?}"));
                }
                Ok(vec![
                    input[0],
                    (input[1] - kernel) / stride + 1,
                    (input[2] - kernel) / stride + 1,
                ])
            }
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            Layer::Dense { .. } | Layer::Conv2d { .. } | Layer::AvgPool2d { .. }
        )
    }
}

/// Per-layer outputs of one forward pass; the last entry holds the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub outputs: Vec<Tensor>,
}

impl ActivationTrace {
    pub fn logits(&self) -> &[f32] {
        self.outputs.last().expect("non-empty trace").data()
    }

    pub fn layer(&self, index: usize) -> &Tensor {
        &self.outputs[index]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
    class_count: usize,
    shapes: Vec<Vec<usize>>,
}

impl Network {
    /// Validates that layer shapes compose and end in `class_count` logits.
    pub fn new(layers: Vec<Layer>, input_shape: Vec<usize>, class_count: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(PcxError::InvalidArgument("network has no layers".into()));
        }
        if class_count == 0 || input_shape.is_empty() || input_shape.contains(&0) {
            return Err(PcxError::InvalidArgument(
                "class_count and input dimensions must be positive".into(),
            ));
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = input_shape.clone();
        for (i, layer) in layers.iter().enumerate() {
            current = layer
                .output_shape(&current)
                .map_err(|message| PcxError::LayerMismatch { layer: i, message })?;
            shapes.push(current.clone());
        }
        let out: usize = current.iter().product();
        if current.len() != 1 || out != class_count {
            return Err(PcxError::LayerMismatch {
                layer: layers.len() - 1,
                message: format!("final output {current:?} does not match class_count {class_count}"),
            });
        }
        Ok(Self {
            layers,
            input_shape,
            class_count,
            shapes,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Output shape of layer `index`.
    pub fn output_shape(&self, index: usize) -> &[usize] {
        &self.shapes[index]
    }

    /// Input shape of layer `index`.
    pub fn layer_input_shape(&self, index: usize) -> &[usize] {
        if index == 0 {
            &self.input_shape
        } else {
            &self.shapes[index - 1]
        }
    }

    /// Index of the last conv2d layer, or of the last hidden layer for
    /// purely dense networks.
    pub fn last_conv_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .rposition(|l| matches!(l, Layer::Conv2d { .. }))
            .or_else(|| self.len().checked_sub(2))
    }

    pub fn check_layer(&self, index: usize) -> Result<()> {
        if index >= self.layers.len() {
            return Err(PcxError::IndexOutOfRange {
                what: "layer",
                index,
                limit: self.layers.len(),
            });
        }
        Ok(())
    }

    pub fn check_class(&self, index: usize) -> Result<()> {
        if index >= self.class_count {
            return Err(PcxError::IndexOutOfRange {
                what: "class",
                index,
                limit: self.class_count,
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<ActivationTrace> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(PcxError::LayerMismatch {
                layer: 0,
                message: format!(
                    "input shape {:?} does not match network input {:?}",
                    input.shape(),
                    self.input_shape
                ),
            });
        }
        let mut outputs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = outputs.last().unwrap_or(input);
            outputs.push(apply_layer(layer, x, &self.shapes[i]));
        }
        Ok(ActivationTrace { outputs })
    }

    /// Logits obtained by running layers `layer_index + 1 ..` on `patched`.
    pub fn forward_from(&self, layer_index: usize, patched: &Tensor) -> Result<Tensor> {
        self.check_layer(layer_index)?;
        if patched.shape() != self.shapes[layer_index].as_slice() {
            return Err(PcxError::LayerMismatch {
                layer: layer_index,
                message: format!(
                    "patched activation {:?} does not match layer output {:?}",
                    patched.shape(),
                    self.shapes[layer_index]
                ),
            });
        }
        let mut x = patched.clone();
        for i in layer_index + 1..self.layers.len() {
            x = apply_layer(&self.layers[i], &x, &self.shapes[i]);
        }
        Ok(x)
    }

    pub fn predict(&self, input: &Tensor) -> Result<usize> {
        let trace = self.forward(input)?;
        Ok(argmax(trace.logits()))
    }

    /// Exact gradient of logit `class_index` with respect to the output of
    /// layer `layer_index`.
    pub fn grad_wrt_layer(
        &self,
        input: &Tensor,
        layer_index: usize,
        class_index: usize,
    ) -> Result<Tensor> {
        self.check_layer(layer_index)?;
        self.check_class(class_index)?;
        let trace = self.forward(input)?;
        let mut seed = vec![0.0; self.class_count];
        seed[class_index] = 1.0;
        Ok(crate::backward::propagate(
            self,
            input,
            &trace,
            seed,
            Some(layer_index),
            crate::backward::Rule::Gradient,
            None,
        ))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: NetworkDoc = read_json(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let load_opt = |p: &Option<String>| -> Result<Option<Tensor>> {
            p.as_ref().map(|rel| Tensor::load(&base.join(rel))).transpose()
        };
        let mut layers = Vec::with_capacity(doc.layers.len());
        for l in &doc.layers {
            layers.push(match l {
                LayerDoc::Dense { weights, bias } => Layer::Dense {
                    weights: Tensor::load(&base.join(weights))?,
                    bias: load_opt(bias)?,
                },
                LayerDoc::Conv2d {
                    weights,
                    bias,
                    stride,
                    padding,
                } => Layer::Conv2d {
                    weights: Tensor::load(&base.join(weights))?,
                    bias: load_opt(bias)?,
                    stride: *stride,
                    padding: *padding,
                },
                LayerDoc::Relu => Layer::Relu,
                LayerDoc::Maxpool2d { kernel, stride } => Layer::MaxPool2d {
                    kernel: *kernel,
                    stride: stride.unwrap_or(*kernel),
                },
                LayerDoc::Avgpool2d { kernel, stride } => Layer::AvgPool2d {
                    kernel: *kernel,
                    stride: stride.unwrap_or(*kernel),
                },
                LayerDoc::Flatten => Layer::Flatten,
            });
        }
        Network::new(layers, doc.input_shape, doc.class_count).map_err(|e| e.with_path(path))
    }

    /// Writes the JSON spec at `path` and one PCXT file per parameter next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "net".into());
        let mut docs = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let save_param = |t: &Tensor, tag: &str| -> Result<String> {
                let rel = format!("{stem}.l{i}.{tag}.pcxt");
                t.save(&base.join(&rel))?;
                Ok(rel)
            };
            docs.push(match layer {
                Layer::Dense { weights, bias } => LayerDoc::Dense {
                    weights: save_param(weights, "w")?,
                    bias: bias.as_ref().map(|b| save_param(b, "b")).transpose()?,
                },
                Layer::Conv2d {
                    weights,
                    bias,
                    stride,
                    padding,
                } => LayerDoc::Conv2d {
                    weights: save_param(weights, "w")?,
                    bias: bias.as_ref().map(|b| save_param(b, "b")).transpose()?,
                    stride: *stride,
                    padding: *padding,
                },
                Layer::Relu => LayerDoc::Relu,
                Layer::MaxPool2d { kernel, stride } => LayerDoc::Maxpool2d {
                    kernel: *kernel,
                    stride: Some(*stride),
                },
                Layer::AvgPool2d { kernel, stride } => LayerDoc::Avgpool2d {
                    kernel: *kernel,
                    stride: Some(*stride),
                },
                Layer::Flatten => LayerDoc::Flatten,
            });
        }
        write_json(
            path,
            &NetworkDoc {
                input_shape: self.input_shape.clone(),
                class_count: self.class_count,
                layers: docs,
            },
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkDoc {
    input_shape: Vec<usize>,
    class_count: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LayerDoc {
    Dense {
        weights: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<String>,
    },
    Conv2d {
        weights: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<String>,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    Relu,
    Maxpool2d {
        kernel: usize,
        #[serde(default)]
        stride: Option<usize>,
    },
    Avgpool2d {
        kernel: usize,
        #[serde(default)]
        stride: Option<usize>,
    },
    Flatten,
}

fn one() -> usize {
    1
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn apply_layer(layer: &Layer, x: &Tensor, out_shape: &[usize]) -> Tensor {
    let data = match layer {
        Layer::Dense { .. } | Layer::Conv2d { .. } | Layer::AvgPool2d { .. } => {
            linear_forward(layer, x.data(), x.shape(), WeightMap::Identity, true)
        }
        Layer::Relu => x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        Layer::MaxPool2d { kernel, stride } => {
            let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let (oh, ow) = (out_shape[1], out_shape[2]);
            let src = x.data();
            let mut out = Vec::with_capacity(c * oh * ow);
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let idx = maxpool_winner(src, ch, h, w, oy * stride, ox * stride, *kernel);
                        out.push(src[idx]);
                    }
                }
            }
            out
        }
        Layer::Flatten => x.data().to_vec(),
    };
    Tensor::new(out_shape.to_vec(), data).expect("layer output matches precomputed shape")
}

/// Flat index of the first maximal element of a pooling window in row-major order.
pub(crate) fn maxpool_winner(
    src: &[f32],
    ch: usize,
    h: usize,
    w: usize,
    y0: usize,
    x0: usize,
    kernel: usize,
) -> usize {
    let mut best = ch * h * w + y0 * w + x0;
    for ky in 0..kernel {
        for kx in 0..kernel {
            let idx = ch * h * w + (y0 + ky) * w + (x0 + kx);
            if src[idx] > src[best] {
                best = idx;
            }
        }
    }
    best
}

/// Transformation applied to weights before a linear pass; used to split a
/// layer into its positive and negative parts for the z-plus rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum WeightMap {
    Identity,
    Positive,
    Negative,
}

impl WeightMap {
    #[inline]
    fn apply(self, w: f32) -> f32 {
        match self {
            WeightMap::Identity => w,
            WeightMap::Positive => w.max(0.0),
            WeightMap::Negative => w.min(0.0),
        }
    }
}

/// Applies the linear part of a dense, conv or average-pool layer.
pub(crate) fn linear_forward(
    layer: &Layer,
    x: &[f32],
    in_shape: &[usize],
    map: WeightMap,
    with_bias: bool,
) -> Vec<f32> {
    match layer {
        Layer::Dense { weights, bias } => {
            let (rows, cols) = (weights.shape()[0], weights.shape()[1]);
            let w = weights.data();
            (0..rows)
                .map(|j| {
                    let mut acc = 0.0f32;
                    for i in 0..cols {
                        acc += map.apply(w[j * cols + i]) * x[i];
                    }
                    match bias {
                        Some(b) if with_bias => acc + b.data()[j],
                        _ => acc,
                    }
                })
                .collect()
        }
        Layer::Conv2d {
            weights,
            bias,
            stride,
            padding,
        } => {
            let ws = weights.shape();
            let (oc, ic, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
            let (h, w) = (in_shape[1], in_shape[2]);
            let oh = (h + 2 * padding - kh) / stride + 1;
            let ow = (w + 2 * padding - kw) / stride + 1;
            let wd = weights.data();
            let mut out = Vec::with_capacity(oc * oh * ow);
            for o in 0..oc {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0f32;
                        for c in 0..ic {
                            for ky in 0..kh {
                                let iy = (oy * stride + ky) as isize - *padding as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = (ox * stride + kx) as isize - *padding as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let wv = map.apply(wd[((o * ic + c) * kh + ky) * kw + kx]);
                                    acc += wv * x[(c * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                        if with_bias {
                            if let Some(b) = bias {
                                acc += b.data()[o];
                            }
                        }
                        out.push(acc);
                    }
                }
            }
            out
        }
        Layer::AvgPool2d { kernel, stride } => {
            let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
            let oh = (h - kernel) / stride + 1;
            let ow = (w - kernel) / stride + 1;
            let scale = map.apply(1.0 / (kernel * kernel) as f32);
            let mut out = Vec::with_capacity(c * oh * ow);
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0f32;
                        for ky in 0..*kernel {
                            for kx in 0..*kernel {
                                acc += x[(ch * h + oy * stride + ky) * w + ox * stride + kx];
                            }
                        }
                        out.push(acc * scale);
                    }
                }
            }
            out
        }
        _ => unreachable!("linear_forward on non-linear layer"),
    }
}

/// Multiplies `g` (shaped like the layer output) by the transposed linear map.
pub(crate) fn linear_transpose(
    layer: &Layer,
    g: &[f32],
    in_shape: &[usize],
    map: WeightMap,
) -> Vec<f32> {
    let n_in: usize = in_shape.iter().product();
    let mut out = vec![0.0f32; n_in];
    match layer {
        Layer::Dense { weights, .. } => {
            let (rows, cols) = (weights.shape()[0], weights.shape()[1]);
            let w = weights.data();
            for j in 0..rows {
                let gj = g[j];
                if gj == 0.0 {
                    continue;
                }
                for i in 0..cols {
                    out[i] += map.apply(w[j * cols + i]) * gj;
                }
            }
        }
        Layer::Conv2d {
            weights,
            stride,
            padding,
            ..
        } => {
            let ws = weights.shape();
            let (oc, ic, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
            let (h, w) = (in_shape[1], in_shape[2]);
            let oh = (h + 2 * padding - kh) / stride + 1;
            let ow = (w + 2 * padding - kw) / stride + 1;
            let wd = weights.data();
            for o in 0..oc {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let gv = g[(o * oh + oy) * ow + ox];
                        if gv == 0.0 {
                            continue;
                        }
                        for c in 0..ic {
                            for ky in 0..kh {
                                let iy = (oy * stride + ky) as isize - *padding as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = (ox * stride + kx) as isize - *padding as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let wv = map.apply(wd[((o * ic + c) * kh + ky) * kw + kx]);
                                    out[(c * h + iy as usize) * w + ix as usize] += wv * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
        Layer::AvgPool2d { kernel, stride } => {
            let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
            let oh = (h - kernel) / stride + 1;
            let ow = (w - kernel) / stride + 1;
            let scale = map.apply(1.0 / (kernel * kernel) as f32);
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let gv = g[(ch * oh + oy) * ow + ox] * scale;
                        for ky in 0..*kernel {
                            for kx in 0..*kernel {
                                out[(ch * h + oy * stride + ky) * w + ox * stride + kx] += gv;
                            }
                        }
                    }
                }
            }
        }
        _ => unreachable!("linear_transpose on non-linear layer"),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn identity2() -> Layer {
        Layer::dense(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]), Some(t(&[2], &[0.0, 0.0])))
    }

    #[test]
    fn identity_dense_passes_through() {
        let net = Network::new(vec![identity2()], vec![2], 2).unwrap();
        let trace = net.forward(&t(&[2], &[1.0, 2.0])).unwrap();
        assert_eq!(trace.logits(), &[1.0, 2.0]);
    }

    #[test]
    fn relu_zeroes_negatives() {
        let net = Network::new(vec![identity2(), Layer::Relu], vec![2], 2).unwrap();
        let trace = net.forward(&t(&[2], &[-1.0, 2.0])).unwrap();
        assert_eq!(trace.logits(), &[0.0, 2.0]);
    }

    #[test]
    fn avgpool_takes_mean() {
        let net = Network::new(
            vec![Layer::AvgPool2d { kernel: 2, stride: 2 }, Layer::Flatten],
            vec![1, 2, 2],
            1,
        )
        .unwrap();
        let trace = net.forward(&t(&[1, 2, 2], &[1.0, 3.0, 5.0, 7.0])).unwrap();
        assert_eq!(trace.logits(), &[4.0]);
    }

    #[test]
    fn maxpool_and_conv_shapes() {
        let conv = Layer::Conv2d {
            weights: t(&[2, 1, 2, 2], &[1.0; 8]),
            bias: None,
            stride: 1,
            padding: 1,
        };
        let net = Network::new(
            vec![
                conv,
                Layer::MaxPool2d { kernel: 2, stride: 2 },
                Layer::Flatten,
                Layer::dense(t(&[1, 8], &[1.0; 8]), None),
            ],
            vec![1, 3, 3],
            1,
        )
        .unwrap();
        assert_eq!(net.output_shape(0), &[2, 4, 4]);
        assert_eq!(net.output_shape(1), &[2, 2, 2]);
        let x = t(&[1, 3, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let trace = net.forward(&x).unwrap();
        // padded 2x2 box sums; top-left output sees only x[0,0]
        assert_eq!(trace.layer(0).data()[0], 1.0);
        assert_eq!(trace.layer(0).data()[5], 12.0);
    }

    #[test]
    fn rejects_mismatched_input() {
        let net = Network::new(vec![identity2()], vec![2], 2).unwrap();
        match net.forward(&t(&[3], &[1.0, 2.0, 3.0])) {
            Err(PcxError::LayerMismatch { layer, .. }) => assert_eq!(layer, 0),
            other => panic!("{other:?}"),
        }
        let err = Network::new(
            vec![identity2(), Layer::dense(t(&[1, 3], &[1.0; 3]), None)],
            vec![2],
            1,
        )
        .unwrap_err();
        match err {
            PcxError::LayerMismatch { layer, .. } => assert_eq!(layer, 1),
            other => panic!("{other:?}"),
        }
        assert!(Network::new(vec![identity2()], vec![2], 3).is_err());
    }

    #[test]
    fn forward_from_patched_channel() {
        // hidden activations [3, 4] feed a head with weights [1, 1]
        let net = Network::new(
            vec![identity2(), Layer::dense(t(&[1, 2], &[1.0, 1.0]), None)],
            vec![2],
            1,
        )
        .unwrap();
        let out = net.forward_from(0, &t(&[2], &[0.0, 4.0])).unwrap();
        assert_eq!(out.data(), &[4.0]);
        let full = net.forward(&t(&[2], &[3.0, 4.0])).unwrap();
        assert_eq!(full.logits(), &[7.0]);
        assert!(net.forward_from(2, &t(&[2], &[0.0, 4.0])).is_err());
        assert!(net.forward_from(0, &t(&[3], &[0.0; 3])).is_err());
    }

    #[test]
    fn zero_patch_into_bias_free_net() {
        let net = Network::new(
            vec![
                Layer::dense(t(&[3, 2], &[1.0, -2.0, 0.5, 0.3, -1.0, 2.0]), None),
                Layer::Relu,
                Layer::dense(t(&[2, 3], &[1.0, 2.0, -1.0, 0.5, 0.1, 0.2]), None),
            ],
            vec![2],
            2,
        )
        .unwrap();
        let out = net.forward_from(1, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn linear_gradient() {
        let net = Network::new(
            vec![identity2(), Layer::dense(t(&[1, 2], &[1.0, -2.0]), None)],
            vec![2],
            1,
        )
        .unwrap();
        for x in [[3.0, 1.0], [-5.0, 0.25]] {
            let g = net.grad_wrt_layer(&t(&[2], &x), 0, 0).unwrap();
            assert_eq!(g.data(), &[1.0, -2.0]);
        }
        assert!(net.grad_wrt_layer(&t(&[2], &[0.0, 0.0]), 0, 1).is_err());
        assert!(net.grad_wrt_layer(&t(&[2], &[0.0, 0.0]), 5, 0).is_err());
    }

    #[test]
    fn relu_dead_zone_has_zero_gradient() {
        let net = Network::new(
            vec![identity2(), Layer::Relu, Layer::dense(t(&[1, 2], &[1.0, 1.0]), None)],
            vec![2],
            1,
        )
        .unwrap();
        let g = net.grad_wrt_layer(&t(&[2], &[-1.0, 2.0]), 0, 0).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0]);
    }

    #[test]
    fn maxpool_gradient_goes_to_first_max() {
        let net = Network::new(
            vec![Layer::MaxPool2d { kernel: 2, stride: 2 }, Layer::Flatten],
            vec![1, 2, 2],
            1,
        )
        .unwrap();
        let net = Network::new(
            {
                let mut l = net.layers().to_vec();
                l.push(Layer::dense(t(&[1, 1], &[1.0]), None));
                l
            },
            vec![1, 2, 2],
            1,
        )
        .unwrap();
        // gradient w.r.t. the flattened output is trivial; check routing via
        // the input-level backward pass used by heatmaps
        let x = t(&[1, 2, 2], &[5.0, 1.0, 5.0, 0.0]);
        let trace = net.forward(&x).unwrap();
        let g = crate::backward::propagate(
            &net,
            &x,
            &trace,
            vec![1.0],
            None,
            crate::backward::Rule::Gradient,
            None,
        );
        assert_eq!(g.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let net = Network::new(
            vec![
                Layer::Conv2d {
                    weights: t(&[1, 1, 2, 2], &[1.0, -1.0, 0.5, 2.0]),
                    bias: Some(t(&[1], &[0.1])),
                    stride: 1,
                    padding: 0,
                },
                Layer::Relu,
                Layer::AvgPool2d { kernel: 2, stride: 1 },
                Layer::Flatten,
                Layer::dense(t(&[2, 1], &[1.0, -1.0]), None),
            ],
            vec![1, 3, 3],
            2,
        )
        .unwrap();
        let p = dir.path().join("net.json");
        net.save(&p).unwrap();
        assert_eq!(Network::load(&p).unwrap(), net);
    }
}

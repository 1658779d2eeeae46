//! Real-valued model: the form weights are trained and stored in, and the float oracle.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::tensor::Shape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FloatLayer {
    /// Weights laid out `[out_ch][in_ch][kh][kw]`.
    Conv2d { out_ch: usize, in_ch: usize, kh: usize, kw: usize, stride: usize, weights: Vec<f64>, bias: Vec<f64> },
    /// Per-channel (or per-feature) normalization, folded away before quantization.
    BatchNorm { gamma: Vec<f64>, beta: Vec<f64>, mean: Vec<f64>, var: Vec<f64>, eps: f64 },
    /// True average over non-overlapping `window`×`window` blocks.
    AvgPool { window: usize },
    /// Elementwise polynomial, coefficients lowest degree first.
    Activation { coeffs: Vec<f64> },
    /// Weights laid out `[out][in]`; feature-map inputs are flattened channel-major.
    Dense {
        out: usize,
        #[serde(rename = "in")]
        inputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Flatten,
}

impl FloatLayer {
    pub fn kind(&self) -> &'static str {
        match self {
            FloatLayer::Conv2d { .. } => "conv2d",
            FloatLayer::BatchNorm { .. } => "batch_norm",
            FloatLayer::AvgPool { .. } => "avg_pool",
            FloatLayer::Activation { .. } => "activation",
            FloatLayer::Dense { .. } => "dense",
            FloatLayer::Flatten => "flatten",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatModel {
    pub input_shape: Shape,
    pub classes: usize,
    pub layers: Vec<FloatLayer>,
}

pub(crate) fn conv_out(h: usize, k: usize, s: usize) -> Option<usize> {
    (k >= 1 && s >= 1 && h >= k).then(|| (h - k) / s + 1)
}

/// Output shape of one layer, checking weight counts on the way.
pub(crate) fn float_layer_shape(layer: &FloatLayer, input: &Shape, index: usize) -> Result<Shape, ModelError> {
    let bad = |m: String| ModelError::Shape { index, message: m };
    match layer {
        FloatLayer::Conv2d { out_ch, in_ch, kh, kw, stride, weights, bias } => {
            let (c, h, w) = input.chw().ok_or_else(|| bad(format!("conv2d needs a feature map, got {input}")))?;
            if c != *in_ch {
                return Err(bad(format!("conv2d expects {in_ch} channels, got {c}")));
            }
            if weights.len() != out_ch * in_ch * kh * kw || bias.len() != *out_ch {
                return Err(bad("conv2d weight/bias length does not match its dimensions".into()));
            }
            let oh = conv_out(h, *kh, *stride).ok_or_else(|| bad(format!("kernel {kh}×{kw} / stride {stride} do not fit {input}")))?;
            let ow = conv_out(w, *kw, *stride).ok_or_else(|| bad(format!("kernel {kh}×{kw} / stride {stride} do not fit {input}")))?;
            Ok(Shape::image(*out_ch, oh, ow))
        }
        FloatLayer::BatchNorm { gamma, beta, mean, var, eps } => {
            let ch = input.chw().map(|(c, _, _)| c).unwrap_or(input.len());
            if [gamma.len(), beta.len(), mean.len(), var.len()].iter().any(|&l| l != ch) {
                return Err(bad(format!("batch_norm parameters must have {ch} entries")));
            }
            if var.iter().any(|&v| v < 0.0) || *eps < 0.0 {
                return Err(bad("batch_norm variance and eps must be non-negative".into()));
            }
            Ok(input.clone())
        }
        FloatLayer::AvgPool { window } => {
            let (c, h, w) = input.chw().ok_or_else(|| bad(format!("avg_pool needs a feature map, got {input}")))?;
            if *window == 0 || h < *window || w < *window {
                return Err(bad(format!("window {window} does not fit {input}")));
            }
            Ok(Shape::image(c, h / window, w / window))
        }
        FloatLayer::Activation { coeffs } => {
            if coeffs.is_empty() {
                return Err(bad("activation needs at least one coefficient".into()));
            }
            Ok(input.clone())
        }
        FloatLayer::Dense { out, inputs, weights, bias } => {
            if input.len() != *inputs {
                return Err(bad(format!("dense expects {inputs} inputs, got {input}")));
            }
            if weights.len() != out * inputs || bias.len() != *out {
                return Err(bad("dense weight/bias length does not match its dimensions".into()));
            }
            Ok(Shape::flat(*out))
        }
        FloatLayer::Flatten => Ok(Shape::flat(input.len())),
    }
}

pub(crate) fn conv_forward<T: Copy, R>(
    input: &[T],
    (c, h, w): (usize, usize, usize),
    (out_ch, kh, kw, stride): (usize, usize, usize, usize),
    mut cell: impl FnMut(usize, &[T]) -> R,
) -> Vec<R> {
    let oh = (h - kh) / stride + 1;
    let ow = (w - kw) / stride + 1;
    let mut patch = Vec::with_capacity(c * kh * kw);
    let mut out = Vec::with_capacity(out_ch * oh * ow);
    for o in 0..out_ch {
        for i in 0..oh {
            for j in 0..ow {
                patch.clear();
                for ch in 0..c {
                    for u in 0..kh {
                        let row = (ch * h + i * stride + u) * w + j * stride;
                        patch.extend_from_slice(&input[row..row + kw]);
                    }
                }
                out.push(cell(o, &patch));
            }
        }
    }
    out
}

/// Indices of each pooling window, output-major.
pub(crate) fn pool_windows(c: usize, h: usize, w: usize, k: usize) -> Vec<Vec<usize>> {
    let (oh, ow) = (h / k, w / k);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut idx = Vec::with_capacity(k * k);
                for u in 0..k {
                    for v in 0..k {
                        idx.push((ch * h + i * k + u) * w + j * k + v);
                    }
                }
                out.push(idx);
            }
        }
    }
    out
}

impl FloatModel {
    /// Shapes after each layer, validating the whole chain.
    pub fn layer_shapes(&self) -> Result<Vec<Shape>, ModelError> {
        if !self.input_shape.is_valid() {
            return Err(ModelError::Invalid(format!("bad input shape {}", self.input_shape)));
        }
        let mut shape = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            shape = float_layer_shape(l, &shape, i)?;
            out.push(shape.clone());
        }
        if shape.len() != self.classes {
            return Err(ModelError::Invalid(format!("model emits {} values for {} classes", shape.len(), self.classes)));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.layer_shapes().map(|_| ())
    }

    /// Float forward pass of one instance.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut shape = self.input_shape.clone();
        let mut v = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let next = float_layer_shape(layer, &shape, i).expect("validated model");
            v = float_layer_forward(layer, &shape, &v);
            shape = next;
        }
        v
    }

    /// Fold every BatchNorm into the nearest preceding conv/dense layer. Only average pooling may
    /// sit in between, since it commutes with a per-channel affine map.
    pub fn fold_batchnorm(&self) -> Result<FloatModel, ModelError> {
        self.validate()?;
        let mut layers: Vec<FloatLayer> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let FloatLayer::BatchNorm { gamma, beta, mean, var, eps } = layer else {
                layers.push(layer.clone());
                continue;
            };
            let target = layers
                .iter()
                .rposition(|l| !matches!(l, FloatLayer::AvgPool { .. }))
                .filter(|&t| matches!(layers[t], FloatLayer::Conv2d { .. } | FloatLayer::Dense { .. }))
                .ok_or(ModelError::Unfoldable { index: i })?;
            let scale: Vec<f64> = gamma.iter().zip(var).map(|(g, v)| g / (v + eps).sqrt()).collect();
            let shift: Vec<f64> = (0..scale.len()).map(|c| beta[c] - mean[c] * scale[c]).collect();
            fold_into(&mut layers[target], &scale, &shift).map_err(|_| ModelError::Unfoldable { index: i })?;
        }
        let out = FloatModel { input_shape: self.input_shape.clone(), classes: self.classes, layers };
        out.validate()?;
        Ok(out)
    }
}

/// w' = w·scale, b' = b·scale + shift, per output channel.
fn fold_into(layer: &mut FloatLayer, scale: &[f64], shift: &[f64]) -> Result<(), ()> {
    let (outs, weights, bias) = match layer {
        FloatLayer::Conv2d { out_ch, weights, bias, .. } => (*out_ch, weights, bias),
        FloatLayer::Dense { out, weights, bias, .. } => (*out, weights, bias),
        _ => return Err(()),
    };
    if scale.len() != outs {
        return Err(());
    }
    let per = weights.len() / outs;
    for o in 0..outs {
        for w in &mut weights[o * per..(o + 1) * per] {
            *w *= scale[o];
        }
        bias[o] = bias[o] * scale[o] + shift[o];
    }
    Ok(())
}

/// One float layer applied to one instance (BatchNorm evaluated explicitly).
pub fn float_layer_forward(layer: &FloatLayer, shape: &Shape, x: &[f64]) -> Vec<f64> {
    match layer {
        FloatLayer::Conv2d { out_ch, kh, kw, stride, weights, bias, .. } => {
            let chw = shape.chw().expect("feature map");
            let per = weights.len() / out_ch;
            conv_forward(x, chw, (*out_ch, *kh, *kw, *stride), |o, patch| {
                bias[o] + weights[o * per..(o + 1) * per].iter().zip(patch).map(|(w, v)| w * v).sum::<f64>()
            })
        }
        FloatLayer::BatchNorm { gamma, beta, mean, var, eps } => {
            let per = x.len() / gamma.len();
            x.iter()
                .enumerate()
                .map(|(i, &v)| {
                    let c = i / per;
                    (v - mean[c]) / (var[c] + eps).sqrt() * gamma[c] + beta[c]
                })
                .collect()
        }
        FloatLayer::AvgPool { window } => {
            let (c, h, w) = shape.chw().expect("feature map");
            let n = (window * window) as f64;
            pool_windows(c, h, w, *window).iter().map(|idx| idx.iter().map(|&i| x[i]).sum::<f64>() / n).collect()
        }
        FloatLayer::Activation { coeffs } => {
            x.iter().map(|&v| coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c)).collect()
        }
        FloatLayer::Dense { out, inputs, weights, bias } => (0..*out)
            .map(|o| bias[o] + weights[o * inputs..(o + 1) * inputs].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect(),
        FloatLayer::Flatten => x.to_vec(),
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_f64(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

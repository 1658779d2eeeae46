//! Quantized model: integer weights in Z_p plus the scale bookkeeping that produced them.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::conv_out;
use crate::tensor::Shape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `scale` is the fixed-point scale of the output.
    Conv2d {
        out_ch: usize,
        in_ch: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        weights: Vec<u64>,
        bias: Vec<u64>,
        scale: f64,
    },
    /// Window sum without division; the output scale absorbs window².
    AvgPoolScaled { window: usize, scale: f64 },
    PolyActivation { coeffs: Vec<u64>, scale_in: f64, scale_out: f64 },
    Dense {
        out: usize,
        #[serde(rename = "in")]
        inputs: usize,
        weights: Vec<u64>,
        bias: Vec<u64>,
        scale: f64,
    },
    Flatten,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::AvgPoolScaled { .. } => "avg_pool_scaled",
            LayerSpec::PolyActivation { .. } => "poly_activation",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// Output shape for a given input shape, validating dimensions and value ranges.
    pub fn output_shape(&self, input: &Shape, p: u64, index: usize) -> Result<Shape, ModelError> {
        let bad = |m: String| ModelError::Shape { index, message: m };
        let reduced = |v: &[u64]| v.iter().all(|&x| x < p);
        match self {
            LayerSpec::Conv2d { out_ch, in_ch, kh, kw, stride, weights, bias, .. } => {
                let (c, h, w) = input.chw().ok_or_else(|| bad(format!("conv2d needs a feature map, got {input}")))?;
                if c != *in_ch {
                    return Err(bad(format!("conv2d expects {in_ch} channels, got {c}")));
                }
                if weights.len() != out_ch * in_ch * kh * kw || bias.len() != *out_ch {
                    return Err(bad("conv2d weight/bias length does not match its dimensions".into()));
                }
                if !reduced(weights) || !reduced(bias) {
                    return Err(bad(format!("conv2d values must lie in [0, {p})")));
                }
                let fit = || bad(format!("kernel {kh}×{kw} / stride {stride} do not fit {input}"));
                Ok(Shape::image(*out_ch, conv_out(h, *kh, *stride).ok_or_else(fit)?, conv_out(w, *kw, *stride).ok_or_else(fit)?))
            }
            LayerSpec::AvgPoolScaled { window, .. } => {
                let (c, h, w) = input.chw().ok_or_else(|| bad(format!("pooling needs a feature map, got {input}")))?;
                if *window == 0 || h < *window || w < *window {
                    return Err(bad(format!("window {window} does not fit {input}")));
                }
                Ok(Shape::image(c, h / window, w / window))
            }
            LayerSpec::PolyActivation { coeffs, .. } => {
                if coeffs.is_empty() || !reduced(coeffs) {
                    return Err(bad(format!("activation needs coefficients in [0, {p})")));
                }
                Ok(input.clone())
            }
            LayerSpec::Dense { out, inputs, weights, bias, .. } => {
                if input.len() != *inputs {
                    return Err(bad(format!("dense expects {inputs} inputs, got {input}")));
                }
                if weights.len() != out * inputs || bias.len() != *out {
                    return Err(bad("dense weight/bias length does not match its dimensions".into()));
                }
                if !reduced(weights) || !reduced(bias) {
                    return Err(bad(format!("dense values must lie in [0, {p})")));
                }
                Ok(Shape::flat(*out))
            }
            LayerSpec::Flatten => Ok(Shape::flat(input.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_shape: Shape,
    pub classes: usize,
    pub p: u64,
    pub input_scale: f64,
    pub layers: Vec<LayerSpec>,
    /// Where the activation polynomial came from (e.g. an approximation report path).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_report: Option<String>,
}

impl ModelSpec {
    pub fn layer_shapes(&self) -> Result<Vec<Shape>, ModelError> {
        if !self.input_shape.is_valid() {
            return Err(ModelError::Invalid(format!("bad input shape {}", self.input_shape)));
        }
        let mut shape = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            shape = l.output_shape(&shape, self.p, i)?;
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

    /// Fixed-point scale of the logits.
    pub fn output_scale(&self) -> f64 {
        self.layers.iter().fold(self.input_scale, |s, l| match l {
            LayerSpec::Conv2d { scale, .. } | LayerSpec::AvgPoolScaled { scale, .. } | LayerSpec::Dense { scale, .. } => *scale,
            LayerSpec::PolyActivation { scale_out, .. } => *scale_out,
            LayerSpec::Flatten => s,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

//! Fixed-point conversion of a float model into Z_p, and worst-case magnitude analysis.
//!
//! Signed integers use the balanced representation: `v` is stored as `v mod p`, and residues
//! above `p/2` read back as negative. Every tensor carries the scale it was rounded at; biases
//! are rounded at the accumulated scale of the layer they are added in, so sums stay consistent.

use serde::{Deserialize, Serialize};

use crate::error::QuantError;
use crate::layers::{LayerSpec, ModelSpec};
use crate::model::{FloatLayer, FloatModel};
use crate::nn::signed;
use crate::tensor::Shape;

pub const DEFAULT_INPUT_SCALE: f64 = 1.0;
pub const DEFAULT_WEIGHT_SCALE: f64 = 128.0;

/// What a tensor's scale applies to; only used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorRole {
    Input,
    Weight,
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointScale {
    pub scale: f64,
    pub role: TensorRole,
}

impl FixedPointScale {
    pub fn new(scale: f64, role: TensorRole) -> Result<Self, QuantError> {
        check_scale(scale)?;
        Ok(Self { scale, role })
    }
}

fn check_scale(scale: f64) -> Result<(), QuantError> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(QuantError::BadScale(scale))
    }
}

/// Residue of an integer-valued f64 in [0, p). `rem_euclid` on f64 is exact.
fn to_residue(r: f64, p: u64) -> u64 {
    if r.abs() < 9.0e18 {
        (r as i64 as i128).rem_euclid(p as i128) as u64
    } else {
        r.rem_euclid(p as f64) as u64
    }
}

/// `round_half_even(v·scale)` in balanced form; rejects |rounded| ≥ p/2.
pub fn quantize_value(v: f64, scale: f64, p: u64) -> Result<u64, QuantError> {
    let (q, overflow) = quantize_wrapping(v, scale, p)?;
    match overflow {
        None => Ok(q),
        Some(rounded) => Err(QuantError::Overflow { value: v, scale, rounded, p }),
    }
}

/// Like [`quantize_value`] but wraps out-of-range values mod p, returning the rounded value when it
/// did not fit.
pub fn quantize_wrapping(v: f64, scale: f64, p: u64) -> Result<(u64, Option<f64>), QuantError> {
    check_scale(scale)?;
    if !v.is_finite() {
        return Err(QuantError::NotFinite(v));
    }
    let rounded = (v * scale).round_ties_even();
    if !rounded.is_finite() {
        return Err(QuantError::NotFinite(rounded));
    }
    let overflow = (rounded.abs() >= p as f64 / 2.0).then_some(rounded);
    Ok((to_residue(rounded, p), overflow))
}

pub fn quantize_tensor(values: &[f64], scale: FixedPointScale, p: u64) -> Result<Vec<u64>, QuantError> {
    values.iter().map(|&v| quantize_value(v, scale.scale, p)).collect()
}

/// Balanced residue divided by the scale.
pub fn dequantize(q: u64, scale: f64, p: u64) -> f64 {
    signed(q % p, p) as f64 / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantConfig {
    pub p: u64,
    pub input_scale: f64,
    pub weight_scale: f64,
}

impl QuantConfig {
    pub fn new(p: u64) -> Self {
        Self { p, input_scale: DEFAULT_INPUT_SCALE, weight_scale: DEFAULT_WEIGHT_SCALE }
    }
}

/// A quantized value that did not fit in ±p/2 and was wrapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrappedValues {
    pub layer: usize,
    pub count: usize,
    /// Largest |rounded| among the wrapped values.
    pub worst: f64,
}

#[derive(Debug, Default)]
struct Rounder {
    wrapped: Vec<WrappedValues>,
}

impl Rounder {
    fn round(&mut self, layer: usize, values: &[f64], scale: f64, p: u64) -> Result<Vec<u64>, QuantError> {
        let mut count = 0;
        let mut worst: f64 = 0.0;
        let out = values
            .iter()
            .map(|&v| {
                let (q, over) = quantize_wrapping(v, scale, p)?;
                if let Some(r) = over {
                    count += 1;
                    worst = worst.max(r.abs());
                }
                Ok(q)
            })
            .collect::<Result<Vec<_>, QuantError>>()?;
        if count > 0 {
            self.wrapped.push(WrappedValues { layer, count, worst });
        }
        Ok(out)
    }
}

/// Coefficients at or below this fraction of the largest one count as zero.
pub const NEGLIGIBLE_COEFF: f64 = 1e-12;

/// Highest degree with a non-negligible coefficient (0 for constants and the zero polynomial).
pub fn effective_degree(coeffs: &[f64]) -> usize {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    coeffs.iter().rposition(|&c| c.abs() > NEGLIGIBLE_COEFF * max).unwrap_or(0)
}

/// Quantize a float model. BatchNorm layers are folded first. Values that do not fit in ±p/2
/// are wrapped mod p and listed in the second return value; run [`capacity_check`] to decide
/// whether the result is usable.
pub fn quantize_model(model: &FloatModel, cfg: &QuantConfig) -> Result<(ModelSpec, Vec<WrappedValues>), QuantError> {
    check_scale(cfg.input_scale)?;
    check_scale(cfg.weight_scale)?;
    let folded = model.fold_batchnorm()?;
    let p = cfg.p;
    let ws = cfg.weight_scale;
    let mut r = Rounder::default();
    let mut s = cfg.input_scale;
    let mut layers = Vec::with_capacity(folded.layers.len());
    for (i, layer) in folded.layers.iter().enumerate() {
        let spec = match layer {
            FloatLayer::Conv2d { out_ch, in_ch, kh, kw, stride, weights, bias } => {
                let w = r.round(i, weights, ws, p)?;
                s *= ws;
                let b = r.round(i, bias, s, p)?;
                LayerSpec::Conv2d { out_ch: *out_ch, in_ch: *in_ch, kh: *kh, kw: *kw, stride: *stride, weights: w, bias: b, scale: s }
            }
            FloatLayer::Dense { out, inputs, weights, bias } => {
                let w = r.round(i, weights, ws, p)?;
                s *= ws;
                let b = r.round(i, bias, s, p)?;
                LayerSpec::Dense { out: *out, inputs: *inputs, weights: w, bias: b, scale: s }
            }
            FloatLayer::AvgPool { window } => {
                s *= (window * window) as f64;
                LayerSpec::AvgPoolScaled { window: *window, scale: s }
            }
            FloatLayer::Activation { coeffs } => {
                let d = effective_degree(coeffs);
                let s_in = s;
                let s_out = ws * s_in.powi(d as i32);
                let scaled: Vec<f64> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| if k > d { 0.0 } else { c * s_out / s_in.powi(k as i32) })
                    .collect();
                let q = r.round(i, &scaled, 1.0, p)?;
                s = s_out;
                LayerSpec::PolyActivation { coeffs: q, scale_in: s_in, scale_out: s_out }
            }
            FloatLayer::Flatten => LayerSpec::Flatten,
            FloatLayer::BatchNorm { .. } => return Err(QuantError::UnfoldedBatchNorm(i)),
        };
        layers.push(spec);
    }
    let spec = ModelSpec {
        input_shape: folded.input_shape.clone(),
        classes: folded.classes,
        p,
        input_scale: cfg.input_scale,
        layers,
        activation_report: None,
    };
    spec.validate()?;
    Ok((spec, r.wrapped))
}

/// Quantize one input instance at the model's input scale.
pub fn quantize_input(values: &[f64], model: &ModelSpec) -> Result<Vec<u64>, QuantError> {
    quantize_tensor(values, FixedPointScale::new(model.input_scale, TensorRole::Input)?, model.p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBound {
    pub index: usize,
    pub kind: String,
    /// Worst-case |value| over every output of the layer.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub p: u64,
    pub input_range: (f64, f64),
    /// Bound on the quantized input itself.
    pub input_bound: f64,
    pub layers: Vec<LayerBound>,
    pub pass: bool,
}

impl CapacityReport {
    pub fn worst(&self) -> f64 {
        self.layers.iter().map(|l| l.bound).fold(self.input_bound, f64::max)
    }

    /// First layer whose bound reaches p/2.
    pub fn first_failure(&self) -> Option<&LayerBound> {
        let half = self.p as f64 / 2.0;
        self.layers.iter().find(|l| l.bound >= half)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Iv {
    lo: f64,
    hi: f64,
}

impl Iv {
    fn point(v: f64) -> Self {
        Iv { lo: v, hi: v }
    }

    fn scale(self, c: f64) -> Self {
        if c >= 0.0 {
            Iv { lo: self.lo * c, hi: self.hi * c }
        } else {
            Iv { lo: self.hi * c, hi: self.lo * c }
        }
    }

    fn add(self, o: Iv) -> Self {
        Iv { lo: self.lo + o.lo, hi: self.hi + o.hi }
    }

    fn pow(self, k: usize) -> Self {
        let (a, b) = (self.lo.powi(k as i32), self.hi.powi(k as i32));
        if k == 0 {
            Iv::point(1.0)
        } else if k % 2 == 0 && self.lo <= 0.0 && self.hi >= 0.0 {
            Iv { lo: 0.0, hi: a.max(b) }
        } else {
            Iv { lo: a.min(b), hi: a.max(b) }
        }
    }

    fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

fn affine(x: &[Iv], ws: &[u64], bias: u64, p: u64) -> Iv {
    ws.iter().zip(x).fold(Iv::point(signed(bias, p) as f64), |acc, (&w, &v)| acc.add(v.scale(signed(w, p) as f64)))
}

/// Interval propagation of the integer values through every layer. `input_range` is in real
/// (unscaled) units. Passes iff every bound is below p/2.
pub fn capacity_check(model: &ModelSpec, input_range: (f64, f64)) -> Result<CapacityReport, QuantError> {
    let shapes = model.layer_shapes()?;
    let p = model.p;
    let s = model.input_scale;
    let (lo, hi) = (input_range.0.min(input_range.1), input_range.0.max(input_range.1));
    let input = Iv { lo: (lo * s).round_ties_even(), hi: (hi * s).round_ties_even() };
    let mut shape: Shape = model.input_shape.clone();
    let mut x = vec![input; shape.len()];
    let mut layers = Vec::with_capacity(model.layers.len());
    for (index, (layer, out_shape)) in model.layers.iter().zip(shapes).enumerate() {
        x = match layer {
            LayerSpec::Conv2d { out_ch, kh, kw, stride, weights, bias, .. } => {
                let per = weights.len() / out_ch;
                crate::model::conv_forward(&x, shape.chw().expect("validated"), (*out_ch, *kh, *kw, *stride), |o, patch| {
                    affine(patch, &weights[o * per..(o + 1) * per], bias[o], p)
                })
            }
            LayerSpec::Dense { out, inputs, weights, bias, .. } => {
                (0..*out).map(|o| affine(&x, &weights[o * inputs..(o + 1) * inputs], bias[o], p)).collect()
            }
            LayerSpec::AvgPoolScaled { window, .. } => {
                let (c, h, w) = shape.chw().expect("validated");
                crate::model::pool_windows(c, h, w, *window)
                    .iter()
                    .map(|idx| idx.iter().fold(Iv::point(0.0), |acc, &i| acc.add(x[i])))
                    .collect()
            }
            LayerSpec::PolyActivation { coeffs, .. } => x
                .iter()
                .map(|&v| {
                    coeffs
                        .iter()
                        .enumerate()
                        .fold(Iv::point(0.0), |acc, (k, &c)| acc.add(v.pow(k).scale(signed(c, p) as f64)))
                })
                .collect(),
            LayerSpec::Flatten => x,
        };
        let bound = x.iter().map(|v| v.mag()).fold(0.0, f64::max);
        layers.push(LayerBound { index, kind: layer.kind().to_string(), bound });
        shape = out_shape;
    }
    let half = p as f64 / 2.0;
    let input_bound = input.mag();
    let pass = input_bound < half && layers.iter().all(|l| l.bound < half);
    Ok(CapacityReport { p, input_range: (lo, hi), input_bound, layers, pass })
}

//! Layer evaluation generic over [`Engine`], depth accounting and class prediction.

use std::time::{Duration, Instant};

use hecnn_he::{poly_depth, HeError};
use serde::Serialize;

use crate::engine::Engine;
use crate::error::NnError;
use crate::layers::{LayerSpec, ModelSpec};
use crate::model::{conv_forward, pool_windows};
use crate::tensor::{Shape, Tensor};

/// Per-layer record emitted during inference.
#[derive(Debug, Clone, Serialize)]
pub struct LayerTrace {
    pub index: usize,
    pub kind: &'static str,
    pub output_shape: Shape,
    pub elapsed: Duration,
    /// Smallest remaining noise budget among the outputs, if the engine tracks noise.
    pub min_budget: Option<f64>,
}

fn apply<E: Engine>(engine: &E, layer: &LayerSpec, x: &Tensor<E::Elem>) -> Result<Vec<E::Elem>, HeError> {
    match layer {
        LayerSpec::Conv2d { out_ch, kh, kw, stride, weights, bias, .. } => {
            let chw = x.shape.chw().expect("validated");
            let per = weights.len() / out_ch;
            let refs: Vec<&E::Elem> = x.data.iter().collect();
            conv_forward(&refs, chw, (*out_ch, *kh, *kw, *stride), |o, patch| {
                engine.dot(patch, &weights[o * per..(o + 1) * per], bias[o])
            })
            .into_iter()
            .collect()
        }
        LayerSpec::AvgPoolScaled { window, .. } => {
            let (c, h, w) = x.shape.chw().expect("validated");
            pool_windows(c, h, w, *window)
                .iter()
                .map(|idx| {
                    let refs: Vec<&E::Elem> = idx.iter().map(|&i| &x.data[i]).collect();
                    engine.sum(&refs)
                })
                .collect()
        }
        LayerSpec::PolyActivation { coeffs, .. } => x.data.iter().map(|v| engine.poly(v, coeffs)).collect(),
        LayerSpec::Dense { out, inputs, weights, bias, .. } => {
            let refs: Vec<&E::Elem> = x.data.iter().collect();
            (0..*out).map(|o| engine.dot(&refs, &weights[o * inputs..(o + 1) * inputs], bias[o])).collect()
        }
        LayerSpec::Flatten => Ok(x.data.clone()),
    }
}

/// Run the model; `on_layer` observes each layer's output as it is produced.
pub fn infer_traced<E: Engine>(
    model: &ModelSpec,
    engine: &E,
    input: Tensor<E::Elem>,
    mut on_layer: impl FnMut(&LayerTrace, &Tensor<E::Elem>),
) -> Result<Tensor<E::Elem>, NnError> {
    let shapes = model.layer_shapes()?;
    if input.shape != model.input_shape {
        return Err(NnError::InputShape { got: input.shape.to_string(), expected: model.input_shape.to_string() });
    }
    let mut x = input;
    for (index, (layer, shape)) in model.layers.iter().zip(shapes).enumerate() {
        let kind = layer.kind();
        let start = Instant::now();
        let wrap = |source| NnError::Layer { index, kind, source };
        let data = apply(engine, layer, &x).map_err(wrap)?;
        for v in &data {
            engine.check(v).map_err(wrap)?;
        }
        let min_budget = data.iter().filter_map(|v| engine.budget(v)).reduce(f64::min);
        x = Tensor::new(shape.clone(), data);
        let trace = LayerTrace { index, kind, output_shape: shape, elapsed: start.elapsed(), min_budget };
        on_layer(&trace, &x);
    }
    Ok(x)
}

pub fn infer<E: Engine>(model: &ModelSpec, engine: &E, input: Tensor<E::Elem>) -> Result<Tensor<E::Elem>, NnError> {
    infer_traced(model, engine, input, |_, _| {})
}

/// Centered reading of a residue: values above p/2 are negative.
pub fn signed(v: u64, p: u64) -> i128 {
    if v > p / 2 {
        v as i128 - p as i128
    } else {
        v as i128
    }
}

/// Argmax of signed logits; ties go to the lowest index.
pub fn predict(logits: &[u64], p: u64) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if signed(v, p) > signed(logits[best], p) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerDepth {
    pub index: usize,
    pub kind: &'static str,
    pub ct_depth: u32,
    pub plain_mults: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DepthReport {
    pub ct_depth: u32,
    pub plain_mults: u64,
    pub per_layer: Vec<LayerDepth>,
    pub minimal_l: u32,
    pub recommended_l: u32,
}

/// Safety margin added to the computed depth when recommending L.
pub const DEPTH_MARGIN: u32 = 2;

/// ct×ct depth is Σ ceil(log2 declared degree) over activations; linear layers only multiply by
/// plaintext weights and add nothing.
pub fn depth_report(model: &ModelSpec) -> Result<DepthReport, NnError> {
    let shapes = model.layer_shapes()?;
    let mut per_layer = Vec::with_capacity(model.layers.len());
    for (index, (layer, shape)) in model.layers.iter().zip(&shapes).enumerate() {
        let (ct_depth, plain_mults) = match layer {
            LayerSpec::Conv2d { in_ch, kh, kw, .. } => (0, (shape.len() * in_ch * kh * kw) as u64),
            LayerSpec::Dense { out, inputs, .. } => (0, (out * inputs) as u64),
            LayerSpec::PolyActivation { coeffs, .. } => {
                let degree = coeffs.len() - 1;
                let scalars = coeffs.iter().skip(1).filter(|&&c| c != 0).count();
                (poly_depth(degree), (shape.len() * scalars) as u64)
            }
            LayerSpec::AvgPoolScaled { .. } | LayerSpec::Flatten => (0, 0),
        };
        per_layer.push(LayerDepth { index, kind: layer.kind(), ct_depth, plain_mults });
    }
    let ct_depth = per_layer.iter().map(|l| l.ct_depth).sum();
    Ok(DepthReport {
        ct_depth,
        plain_mults: per_layer.iter().map(|l| l.plain_mults).sum(),
        per_layer,
        minimal_l: ct_depth,
        recommended_l: ct_depth + DEPTH_MARGIN,
    })
}

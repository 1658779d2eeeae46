//! Deterministic models and inputs for tests, benches and the CLI.

use hecnn_approx::{relu_via_derivative, Measure};
use hecnn_he::arith::smallest_prime_congruent_one;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::layers::{LayerSpec, ModelSpec};
use crate::model::{FloatLayer, FloatModel};
use crate::tensor::Shape;

/// ~49-bit NTT-friendly prime (≡ 1 mod 2^15), large enough for the small fixture model.
pub fn p49() -> u64 {
    smallest_prime_congruent_one(1 << 48, 1 << 15)
}

/// 17-bit plaintext modulus.
pub const P17: u64 = 65537;

/// Interval the ReLU replacement is fitted on.
pub const ACTIVATION_HALF_WIDTH: f64 = 8.0;

/// Degree-3 ReLU replacement: a degree-2 Sigmoid fit under the stretched Chebyshev measure on
/// [−8, 8], integrated.
pub fn method5_activation() -> Vec<f64> {
    let measure = Measure::chebyshev(ACTIVATION_HALF_WIDTH).expect("valid interval");
    let (report, _) = relu_via_derivative(&measure, 2).expect("basis is well conditioned");
    report.poly.coeffs
}

fn rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform in [−a, a], rounded to f32 so blob round trips are exact.
fn uniform(r: &mut impl Rng, n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-a..=a) as f32 as f64).collect()
}

fn batch_norm(r: &mut impl Rng, ch: usize) -> FloatLayer {
    FloatLayer::BatchNorm {
        gamma: (0..ch).map(|_| r.random_range(0.5..1.5f32) as f64).collect(),
        beta: uniform(r, ch, 0.1),
        mean: uniform(r, ch, 0.1),
        var: (0..ch).map(|_| r.random_range(0.5..2.0f32) as f64).collect(),
        eps: 1e-5,
    }
}

/// Small CNN on 1×8×8 images that passes the capacity check at [`p49`] with default scales:
/// conv 2@3×3 → pool 2 → ReLU replacement → dense 10.
pub fn gen_fixture_model(seed: u64) -> FloatModel {
    let mut r = rng(seed, 1);
    FloatModel {
        input_shape: Shape::image(1, 8, 8),
        classes: 10,
        layers: vec![
            FloatLayer::Conv2d { out_ch: 2, in_ch: 1, kh: 3, kw: 3, stride: 1, weights: uniform(&mut r, 18, 0.1), bias: uniform(&mut r, 2, 1.0) },
            FloatLayer::AvgPool { window: 2 },
            FloatLayer::Activation { coeffs: method5_activation() },
            FloatLayer::Dense { out: 10, inputs: 18, weights: uniform(&mut r, 180, 0.25), bias: uniform(&mut r, 10, 1.0) },
        ],
    }
}

/// CNN Model 1 as a trainer exports it, BatchNorm unfolded: conv 20@5×5 → pool 2 → BN →
/// conv 50@5×5 → pool 2 → BN → activation → dense 256 → BN → dense 10. Folds to 7 layers.
pub fn model1_fixture(seed: u64) -> FloatModel {
    let mut r = rng(seed, 2);
    FloatModel {
        input_shape: Shape::image(1, 28, 28),
        classes: 10,
        layers: vec![
            FloatLayer::Conv2d { out_ch: 20, in_ch: 1, kh: 5, kw: 5, stride: 1, weights: uniform(&mut r, 500, 0.02), bias: uniform(&mut r, 20, 0.1) },
            FloatLayer::AvgPool { window: 2 },
            batch_norm(&mut r, 20),
            FloatLayer::Conv2d { out_ch: 50, in_ch: 20, kh: 5, kw: 5, stride: 1, weights: uniform(&mut r, 25_000, 0.05), bias: uniform(&mut r, 50, 0.1) },
            FloatLayer::AvgPool { window: 2 },
            batch_norm(&mut r, 50),
            FloatLayer::Activation { coeffs: method5_activation() },
            FloatLayer::Dense { out: 256, inputs: 800, weights: uniform(&mut r, 204_800, 0.05), bias: uniform(&mut r, 256, 0.1) },
            batch_norm(&mut r, 256),
            FloatLayer::Dense { out: 10, inputs: 256, weights: uniform(&mut r, 2560, 0.1), bias: uniform(&mut r, 10, 0.1) },
        ],
    }
}

/// Model 1's shape at reduced width: conv 4@5×5 → pool 2 → conv 6@5×5 → pool 2 → activation →
/// dense 16 → dense 10, on 1×28×28 inputs.
pub fn model1_small_fixture(seed: u64) -> FloatModel {
    let mut r = rng(seed, 3);
    FloatModel {
        input_shape: Shape::image(1, 28, 28),
        classes: 10,
        layers: vec![
            FloatLayer::Conv2d { out_ch: 4, in_ch: 1, kh: 5, kw: 5, stride: 1, weights: uniform(&mut r, 100, 0.02), bias: uniform(&mut r, 4, 0.1) },
            FloatLayer::AvgPool { window: 2 },
            FloatLayer::Conv2d { out_ch: 6, in_ch: 4, kh: 5, kw: 5, stride: 1, weights: uniform(&mut r, 600, 0.05), bias: uniform(&mut r, 6, 0.1) },
            FloatLayer::AvgPool { window: 2 },
            FloatLayer::Activation { coeffs: method5_activation() },
            FloatLayer::Dense { out: 16, inputs: 96, weights: uniform(&mut r, 1536, 0.1), bias: uniform(&mut r, 16, 0.1) },
            FloatLayer::Dense { out: 10, inputs: 16, weights: uniform(&mut r, 160, 0.25), bias: uniform(&mut r, 10, 0.1) },
        ],
    }
}

/// Images with integer pixels in 0..=255: a sparse mix of background zeros and random strokes.
pub fn synthetic_images(seed: u64, count: usize, shape: &Shape) -> Vec<Vec<f64>> {
    let mut r = rng(seed, 4);
    (0..count)
        .map(|_| {
            let density = r.random_range(0.2..0.6);
            (0..shape.len()).map(|_| if r.random_bool(density) { r.random_range(0..=255u32) as f64 } else { 0.0 }).collect()
        })
        .collect()
}

/// Random integer inputs in [0, bound) for a model.
pub fn random_inputs(r: &mut impl Rng, model: &ModelSpec, count: usize, bound: u64) -> Vec<Vec<u64>> {
    let bound = bound.min(model.p);
    (0..count).map(|_| (0..model.input_shape.len()).map(|_| r.random_range(0..bound)).collect()).collect()
}

fn residue(v: i64, p: u64) -> u64 {
    v.rem_euclid(p as i64) as u64
}

fn small_weights(r: &mut impl Rng, n: usize, p: u64) -> Vec<u64> {
    (0..n).map(|_| residue(r.random_range(-16..=16), p)).collect()
}

/// Random integer CNN: at most 4 layers, channels and spatial dims ≤ 8, |weights| ≤ 16, at most
/// two activations of degree ≤ 3, ending in a dense layer.
pub fn random_small_cnn(r: &mut impl Rng, p: u64) -> ModelSpec {
    let classes = r.random_range(2..=8);
    let c = r.random_range(1..=2);
    let h = r.random_range(3..=8);
    let w = r.random_range(3..=8);
    let input_shape = Shape::image(c, h, w);
    let hidden = r.random_range(0..=3);
    let mut layers = Vec::new();
    let mut shape = input_shape.clone();
    let mut activations = 0;
    for _ in 0..hidden {
        let choice = r.random_range(0..4);
        match (choice, shape.chw()) {
            (0, Some((c, h, w))) => {
                let k = r.random_range(1..=h.min(w).min(3));
                let stride = r.random_range(1..=2);
                let out_ch = r.random_range(1..=3);
                layers.push(LayerSpec::Conv2d {
                    out_ch,
                    in_ch: c,
                    kh: k,
                    kw: k,
                    stride,
                    weights: small_weights(r, out_ch * c * k * k, p),
                    bias: small_weights(r, out_ch, p),
                    scale: 1.0,
                });
            }
            (1, Some((_, h, w))) if h.min(w) >= 2 => layers.push(LayerSpec::AvgPoolScaled { window: 2, scale: 1.0 }),
            (2, _) if activations < 2 => {
                activations += 1;
                let degree = r.random_range(1..=3);
                layers.push(LayerSpec::PolyActivation { coeffs: small_weights(r, degree + 1, p), scale_in: 1.0, scale_out: 1.0 });
            }
            (3, _) if shape.len() <= 64 => {
                let out = r.random_range(1..=8);
                let inputs = shape.len();
                layers.push(LayerSpec::Dense { out, inputs, weights: small_weights(r, out * inputs, p), bias: small_weights(r, out, p), scale: 1.0 });
            }
            _ => layers.push(LayerSpec::Flatten),
        }
        shape = layers.last().unwrap().output_shape(&shape, p, layers.len() - 1).expect("generator composes shapes");
    }
    let inputs = shape.len();
    layers.push(LayerSpec::Dense {
        out: classes,
        inputs,
        weights: small_weights(r, classes * inputs, p),
        bias: small_weights(r, classes, p),
        scale: 1.0,
    });
    let model = ModelSpec { input_shape, classes, p, input_scale: 1.0, layers, activation_report: None };
    model.validate().expect("generator emits valid models");
    model
}

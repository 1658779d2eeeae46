use hecnn_core::fixtures::{gen_fixture_model, model1_fixture, p49, synthetic_images, P17};
use hecnn_core::quantize::{quantize_input, quantize_value, TensorRole};
use hecnn_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const P: u64 = 65537;

fn scale(s: f64) -> FixedPointScale {
    FixedPointScale::new(s, TensorRole::Weight).unwrap()
}

#[test]
fn quantize_examples() {
    assert_eq!(quantize_tensor(&[0.123, -1.0, 0.125], scale(100.0), P).unwrap(), vec![12, 65437, 12]);
    assert_eq!(quantize_tensor(&[0.135], scale(100.0), P).unwrap(), vec![14]);
}

#[test]
fn overflow_and_bad_scales_are_rejected() {
    // Balanced range for p = 65537 is ±32768.
    assert_eq!(quantize_value(327.68, 100.0, P).unwrap(), 32768);
    assert_eq!(quantize_value(-327.68, 100.0, P).unwrap(), 32769);
    assert!(matches!(quantize_value(327.69, 100.0, P), Err(QuantError::Overflow { .. })));
    assert!(matches!(quantize_value(-327.69, 100.0, P), Err(QuantError::Overflow { .. })));
    assert!(FixedPointScale::new(0.0, TensorRole::Input).is_err());
    assert!(FixedPointScale::new(f64::NAN, TensorRole::Bias).is_err());
    assert!(matches!(quantize_value(f64::INFINITY, 1.0, P), Err(QuantError::NotFinite(_))));
}

fn conv_bn(bn: FloatLayer, weights: Vec<f64>, bias: Vec<f64>) -> FloatModel {
    FloatModel {
        input_shape: Shape::image(1, 3, 3),
        classes: 8,
        layers: vec![FloatLayer::Conv2d { out_ch: 2, in_ch: 1, kh: 2, kw: 2, stride: 1, weights, bias }, bn],
    }
}

fn bn(gamma: f64, beta: f64, mean: f64, var: f64, eps: f64) -> FloatLayer {
    FloatLayer::BatchNorm { gamma: vec![gamma; 2], beta: vec![beta; 2], mean: vec![mean; 2], var: vec![var; 2], eps }
}

fn folded_conv(m: &FloatModel) -> (Vec<f64>, Vec<f64>) {
    let f = m.fold_batchnorm().unwrap();
    assert_eq!(f.layers.len(), 1);
    match &f.layers[0] {
        FloatLayer::Conv2d { weights, bias, .. } => (weights.clone(), bias.clone()),
        l => panic!("{l:?}"),
    }
}

#[test]
fn identity_batchnorm_leaves_the_layer() {
    let w: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
    let b = vec![0.25, -2.0];
    assert_eq!(folded_conv(&conv_bn(bn(1.0, 0.0, 0.0, 1.0, 0.0), w.clone(), b.clone())), (w, b));
}

#[test]
fn gamma_two_doubles_weights_and_bias() {
    let w: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
    let b = vec![0.25, -2.0];
    let (fw, fb) = folded_conv(&conv_bn(bn(2.0, 0.0, 0.0, 1.0, 0.0), w.clone(), b.clone()));
    assert_eq!(fw, w.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
    assert_eq!(fb, b.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
}

#[test]
fn batchnorm_without_linear_layer_is_unfoldable() {
    let m = FloatModel { input_shape: Shape::flat(2), classes: 2, layers: vec![bn(1.0, 0.0, 0.0, 1.0, 0.0)] };
    assert!(matches!(m.fold_batchnorm(), Err(ModelError::Unfoldable { index: 0 })));
    let m = FloatModel {
        input_shape: Shape::flat(2),
        classes: 2,
        layers: vec![
            FloatLayer::Dense { out: 2, inputs: 2, weights: vec![1.0; 4], bias: vec![0.0; 2] },
            FloatLayer::Activation { coeffs: vec![0.0, 1.0] },
            bn(1.0, 0.0, 0.0, 1.0, 0.0),
        ],
    };
    assert!(matches!(m.fold_batchnorm(), Err(ModelError::Unfoldable { index: 2 })));
}

/// ‖a − b‖∞ / ‖b‖∞
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    num / b.iter().fold(f64::MIN_POSITIVE, |m, y| m.max(y.abs()))
}

fn random_bn(rng: &mut ChaCha20Rng, ch: usize) -> FloatLayer {
    FloatLayer::BatchNorm {
        gamma: (0..ch).map(|_| rng.random_range(-2.0..2.0)).collect(),
        beta: (0..ch).map(|_| rng.random_range(-1.0..1.0)).collect(),
        mean: (0..ch).map(|_| rng.random_range(-1.0..1.0)).collect(),
        var: (0..ch).map(|_| rng.random_range(0.0..3.0)).collect(),
        eps: 1e-5,
    }
}

#[test]
fn folded_batchnorm_matches_explicit_batchnorm() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for trial in 0..100 {
        let dense = trial % 2 == 0;
        let mut w = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (input_shape, linear, ch, classes) = if dense {
            (Shape::flat(6), FloatLayer::Dense { out: 4, inputs: 6, weights: w(24), bias: w(4) }, 4, 4)
        } else {
            (
                Shape::image(2, 6, 6),
                FloatLayer::Conv2d { out_ch: 3, in_ch: 2, kh: 3, kw: 3, stride: 1, weights: w(54), bias: w(3) },
                3,
                12,
            )
        };
        let bn = random_bn(&mut rng, ch);
        let mut layers = vec![linear];
        if !dense {
            layers.push(FloatLayer::AvgPool { window: 2 });
        }
        layers.push(bn);
        let m = FloatModel { input_shape, classes, layers };
        let f = m.fold_batchnorm().unwrap();
        let x: Vec<f64> = (0..m.input_shape.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let e = rel_err(&f.forward(&x), &m.forward(&x));
        assert!(e <= 1e-6, "trial {trial}: relative error {e}");
    }
}

fn zero_dense(p: u64) -> ModelSpec {
    ModelSpec {
        input_shape: Shape::flat(4),
        classes: 3,
        p,
        input_scale: 1.0,
        layers: vec![LayerSpec::Dense { out: 3, inputs: 4, weights: vec![0; 12], bias: vec![0; 3], scale: 1.0 }],
        activation_report: None,
    }
}

#[test]
fn zero_weights_pass_for_any_p() {
    for p in [3, 5, 97, P] {
        let r = capacity_check(&zero_dense(p), (0.0, 1.0)).unwrap();
        assert!(r.pass, "p = {p}");
        assert_eq!(r.layers[0].bound, 0.0);
    }
}

#[test]
fn capacity_report_serializes() {
    let r = capacity_check(&zero_dense(P), (0.0, 1.0)).unwrap();
    let back: CapacityReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
}

/// Frozen outcomes of the interval analysis on the Model 1 fixture (seed 1), pixels in [0, 255].
/// With the default weight scale 2^7 the logits sit at scale 2^57, which no prime below 2^58 can
/// hold; at weight scale 2^4 the 49-bit prime suffices.
#[test]
fn model1_capacity_outcomes() {
    let m = model1_fixture(1);
    let check = |p: u64, ws: f64| {
        let (spec, _) = quantize_model(&m, &QuantConfig { p, input_scale: 1.0, weight_scale: ws }).unwrap();
        capacity_check(&spec, (0.0, 255.0)).unwrap()
    };
    let r17 = check(P17, 128.0);
    assert!(!r17.pass);
    assert_eq!(r17.first_failure().unwrap().kind, "conv2d");
    assert_eq!(r17.layers[0].bound, 7672.0);
    assert_eq!(r17.layers[2].bound, 45408317.0);
    let r49 = check(p49(), 128.0);
    assert!(!r49.pass);
    assert_eq!(r49.first_failure().unwrap().kind, "poly_activation");
    let r49_ws16 = check(p49(), 16.0);
    assert!(r49_ws16.pass);
    assert!(r49_ws16.worst() < 2f64.powi(38));
}

#[test]
fn fixture_model_capacity_outcomes() {
    let f = gen_fixture_model(1);
    for (p, pass) in [(P17, false), (p49(), true)] {
        let (spec, _) = quantize_model(&f, &QuantConfig::new(p)).unwrap();
        assert_eq!(capacity_check(&spec, (0.0, 255.0)).unwrap().pass, pass, "p = {p}");
    }
}

fn logits(spec: &ModelSpec, inputs: &[Vec<f64>]) -> Vec<Vec<u64>> {
    let q: Vec<Vec<u64>> = inputs.iter().map(|x| quantize_input(x, spec).unwrap()).collect();
    let t = pack_batch(&q, &spec.input_shape, q.len());
    unpack_batch(&infer(spec, &PlainEngine::new(spec.p), t).unwrap(), q.len())
}

/// Dense → activation → dense with weights on a 1/4 grid and integer inputs: at weight scales 4
/// and 16 every rounding is exact, so the two runs differ by a pure power of 4.
fn dyadic_model(rng: &mut ChaCha20Rng) -> FloatModel {
    let mut q = |n: usize, r: i32| (0..n).map(|_| rng.random_range(-r..=r) as f64 / 4.0).collect::<Vec<f64>>();
    FloatModel {
        input_shape: Shape::flat(4),
        classes: 3,
        layers: vec![
            FloatLayer::Dense { out: 5, inputs: 4, weights: q(20, 8), bias: q(5, 8) },
            FloatLayer::Activation { coeffs: q(3, 8) },
            FloatLayer::Dense { out: 3, inputs: 5, weights: q(15, 8), bias: q(3, 8) },
        ],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dequantize_is_within_half_a_step(v in -1000.0f64..1000.0, s in 0.01f64..1000.0) {
        let q = quantize_value(v, s, (1 << 61) - 1).unwrap();
        prop_assert!((dequantize(q, s, (1 << 61) - 1) - v).abs() <= 0.5 / s);
    }

    #[test]
    fn argmax_is_invariant_under_pure_rescaling(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let m = dyadic_model(&mut rng);
        let p = p49();
        let (a, wa) = quantize_model(&m, &QuantConfig { p, input_scale: 1.0, weight_scale: 4.0 }).unwrap();
        let (b, wb) = quantize_model(&m, &QuantConfig { p, input_scale: 1.0, weight_scale: 16.0 }).unwrap();
        prop_assert!(wa.is_empty() && wb.is_empty());
        prop_assert!(capacity_check(&b, (-8.0, 8.0)).unwrap().pass);
        let factor = (b.output_scale() / a.output_scale()) as i128;
        prop_assert!(factor >= 16);
        let xs: Vec<Vec<f64>> = (0..16).map(|_| (0..4).map(|_| rng.random_range(-8..=8) as f64).collect()).collect();
        for (la, lb) in logits(&a, &xs).iter().zip(logits(&b, &xs)) {
            let sa: Vec<i128> = la.iter().map(|&v| signed(v, p)).collect();
            let sb: Vec<i128> = lb.iter().map(|&v| signed(v, p)).collect();
            prop_assert_eq!(sa.iter().map(|v| v * factor).collect::<Vec<_>>(), sb);
            prop_assert_eq!(predict(la, p), predict(&lb, p));
        }
    }

    #[test]
    fn widening_the_input_range_never_passes_more(seed in any::<u64>(), lo in -100.0f64..0.0, hi in 0.0f64..100.0, grow in 1.0f64..10.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let m = dyadic_model(&mut rng);
        let (spec, _) = quantize_model(&m, &QuantConfig { p: 1 << 20 | 7, input_scale: 1.0, weight_scale: 4.0 }).unwrap();
        let narrow = capacity_check(&spec, (lo, hi)).unwrap();
        let wide = capacity_check(&spec, (lo * grow, hi * grow)).unwrap();
        prop_assert!(narrow.pass || !wide.pass);
        for (n, w) in narrow.layers.iter().zip(&wide.layers) {
            prop_assert!(w.bound >= n.bound);
        }
    }
}

#[test]
fn fixture_argmax_agrees_with_float_model() {
    let f = gen_fixture_model(1);
    let (spec, _) = quantize_model(&f, &QuantConfig::new(p49())).unwrap();
    let imgs = synthetic_images(7, 500, &f.input_shape);
    let agree = logits(&spec, &imgs).iter().zip(&imgs).filter(|(l, x)| predict(l, spec.p) == argmax_f64(&f.forward(x))).count();
    assert!(agree * 100 >= 95 * imgs.len(), "{agree}/{}", imgs.len());
}

#[test]
fn activation_coefficients_absorb_the_incoming_scale() {
    let m = FloatModel {
        input_shape: Shape::flat(1),
        classes: 1,
        layers: vec![FloatLayer::Activation { coeffs: vec![0.5, 0.25, 0.125] }],
    };
    let (spec, _) = quantize_model(&m, &QuantConfig { p: P, input_scale: 4.0, weight_scale: 8.0 }).unwrap();
    // s_out = 8·4² = 128; c_k·128/4^k
    assert_eq!(
        spec.layers[0],
        LayerSpec::PolyActivation { coeffs: vec![64, 8, 1], scale_in: 4.0, scale_out: 128.0 }
    );
    assert_eq!(spec.output_scale(), 128.0);
}

#[test]
fn model1_folds_to_seven_layers_at_the_expected_scales() {
    let (spec, _) = quantize_model(&model1_fixture(1), &QuantConfig::new(P17)).unwrap();
    let kinds: Vec<&str> = spec.layers.iter().map(LayerSpec::kind).collect();
    assert_eq!(kinds, ["conv2d", "avg_pool_scaled", "conv2d", "avg_pool_scaled", "poly_activation", "dense", "dense"]);
    assert_eq!(spec.output_scale(), 2f64.powi(57));
}

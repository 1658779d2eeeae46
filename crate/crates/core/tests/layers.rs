use hecnn_core::fixtures::{gen_fixture_model, method5_activation, p49, random_small_cnn, synthetic_images};
use hecnn_core::quantize::quantize_input;
use hecnn_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const P: u64 = 97;

fn run(layers: Vec<LayerSpec>, shape: Shape, classes: usize, p: u64, x: &[u64]) -> Vec<u64> {
    let model = ModelSpec { input_shape: shape.clone(), classes, p, input_scale: 1.0, layers, activation_report: None };
    let t = Tensor::new(shape, x.iter().map(|&v| vec![v]).collect());
    infer(&model, &PlainEngine::new(p), t).unwrap().data.into_iter().map(|v| v[0]).collect()
}

fn conv(out_ch: usize, in_ch: usize, k: usize, stride: usize, weights: Vec<u64>, bias: Vec<u64>) -> LayerSpec {
    LayerSpec::Conv2d { out_ch, in_ch, kh: k, kw: k, stride, weights, bias, scale: 1.0 }
}

fn dense(out: usize, inputs: usize, weights: Vec<u64>, bias: Vec<u64>) -> LayerSpec {
    LayerSpec::Dense { out, inputs, weights, bias, scale: 1.0 }
}

fn rand_vec(rng: &mut ChaCha20Rng, n: usize, p: u64) -> Vec<u64> {
    (0..n).map(|_| rng.random_range(0..p)).collect()
}

#[test]
fn conv_of_ones_sums_the_window() {
    let out = run(vec![conv(1, 1, 2, 1, vec![1; 4], vec![0])], Shape::image(1, 3, 3), 4, P, &[1; 9]);
    assert_eq!(out, vec![4; 4]);
}

#[test]
fn unit_kernel_is_identity() {
    let x: Vec<u64> = (0..16).collect();
    let out = run(vec![conv(1, 1, 1, 1, vec![1], vec![0])], Shape::image(1, 4, 4), 16, P, &x);
    assert_eq!(out, x);
}

#[test]
fn strided_conv_matches_direct_loops() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let p = 65537;
    let x = rand_vec(&mut rng, 2 * 8 * 8, p);
    let w = rand_vec(&mut rng, 3 * 2 * 3 * 3, p);
    let b = rand_vec(&mut rng, 3, p);
    let out = run(vec![conv(3, 2, 3, 2, w.clone(), b.clone())], Shape::image(2, 8, 8), 3 * 3 * 3, p, &x);
    let mut want = Vec::new();
    for o in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = b[o] as u128;
                for c in 0..2 {
                    for u in 0..3 {
                        for v in 0..3 {
                            acc += w[((o * 2 + c) * 3 + u) * 3 + v] as u128 * x[(c * 8 + 2 * i + u) * 8 + 2 * j + v] as u128;
                        }
                    }
                }
                want.push((acc % p as u128) as u64);
            }
        }
    }
    assert_eq!(out, want);
}

#[test]
fn pooling_sums_without_dividing() {
    let pool = || vec![LayerSpec::AvgPoolScaled { window: 2, scale: 1.0 }];
    assert_eq!(run(pool(), Shape::image(1, 2, 2), 1, P, &[1, 2, 3, 4]), vec![10]);
    assert_eq!(run(pool(), Shape::image(1, 4, 4), 4, P, &[0; 16]), vec![0; 4]);
}

#[test]
fn pooling_matches_direct_sums() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let x = rand_vec(&mut rng, 36, P);
    let out = run(vec![LayerSpec::AvgPoolScaled { window: 3, scale: 1.0 }], Shape::image(1, 6, 6), 4, P, &x);
    let want: Vec<u64> = (0..4)
        .map(|o| {
            let (bi, bj) = (o / 2 * 3, o % 2 * 3);
            (0..9).map(|t| x[(bi + t / 3) * 6 + bj + t % 3]).sum::<u64>() % P
        })
        .collect();
    assert_eq!(out, want);
}

#[test]
fn activation_examples() {
    let act = |coeffs: Vec<u64>, x: &[u64]| {
        run(vec![LayerSpec::PolyActivation { coeffs, scale_in: 1.0, scale_out: 1.0 }], Shape::flat(x.len()), x.len(), P, x)
    };
    assert_eq!(act(vec![0, 0, 1], &[5]), vec![25]);
    assert_eq!(act(vec![42], &[0, 7, 96]), vec![42; 3]);
}

#[test]
fn quantized_activation_tracks_the_real_polynomial() {
    let coeffs = method5_activation();
    let model = FloatModel {
        input_shape: Shape::flat(1),
        classes: 1,
        layers: vec![FloatLayer::Activation { coeffs: coeffs.clone() }],
    };
    let p = p49();
    let s_in = 512.0;
    let (spec, wrapped) = quantize_model(&model, &QuantConfig { p, input_scale: s_in, weight_scale: 128.0 }).unwrap();
    assert!(wrapped.is_empty());
    let LayerSpec::PolyActivation { scale_out, .. } = spec.layers[0] else { panic!() };
    let eng = PlainEngine::new(p);
    for i in -64..=64 {
        let x = i as f64 / 8.0;
        let q = quantize_input(&[x], &spec).unwrap();
        let got = dequantize(eng.poly(&q, match &spec.layers[0] {
            LayerSpec::PolyActivation { coeffs, .. } => coeffs,
            _ => unreachable!(),
        }).unwrap()[0], scale_out, p);
        let want: f64 = coeffs.iter().rev().fold(0.0, |a, c| a * x + c);
        // Each rounded coefficient is off by at most 1/2 in the last unit.
        let xq = (x * s_in).abs();
        let tol = (0..3).map(|k| 0.5 * xq.powi(k)).sum::<f64>() / scale_out;
        assert!((got - want).abs() <= tol, "x = {x}: {got} vs {want}");
    }
}

#[test]
fn dense_examples() {
    let x = [3, 1, 4];
    let identity = vec![1, 0, 0, 0, 1, 0, 0, 0, 1];
    assert_eq!(run(vec![dense(3, 3, identity, vec![0; 3])], Shape::flat(3), 3, P, &x), x);
    assert_eq!(run(vec![dense(2, 3, vec![0; 6], vec![5, 9])], Shape::flat(3), 2, P, &x), vec![5, 9]);
}

#[test]
fn dense_matches_matvec() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let p = 65537;
    let x = rand_vec(&mut rng, 16, p);
    let w = rand_vec(&mut rng, 160, p);
    let b = rand_vec(&mut rng, 10, p);
    let out = run(vec![dense(10, 16, w.clone(), b.clone())], Shape::flat(16), 10, p, &x);
    let want: Vec<u64> = (0..10)
        .map(|o| (((0..16).map(|i| w[o * 16 + i] as u128 * x[i] as u128).sum::<u128>() + b[o] as u128) % p as u128) as u64)
        .collect();
    assert_eq!(out, want);
}

#[test]
fn predict_examples() {
    assert_eq!(predict(&[3, 9, 1], P), 1);
    assert_eq!(predict(&[5, 5], P), 0);
    // 96 reads as −1.
    assert_eq!(predict(&[96, 0], P), 1);
}

#[test]
fn fixture_prediction_follows_the_float_model() {
    let float = gen_fixture_model(1);
    let (spec, _) = quantize_model(&float, &QuantConfig::new(p49())).unwrap();
    let img = &synthetic_images(3, 1, &float.input_shape)[0];
    let q = quantize_input(img, &spec).unwrap();
    let logits = run(spec.layers.clone(), spec.input_shape.clone(), spec.classes, spec.p, &q);
    assert_eq!(predict(&logits, spec.p), argmax_f64(&float.forward(img)));
}

fn poly(degree: usize) -> LayerSpec {
    let mut coeffs = vec![1; degree + 1];
    coeffs[0] = 0;
    LayerSpec::PolyActivation { coeffs, scale_in: 1.0, scale_out: 1.0 }
}

#[test]
fn depth_examples() {
    let linear = ModelSpec {
        input_shape: Shape::flat(4),
        classes: 2,
        p: P,
        input_scale: 1.0,
        layers: vec![dense(2, 4, vec![1; 8], vec![0; 2])],
        activation_report: None,
    };
    let r = depth_report(&linear).unwrap();
    assert_eq!((r.ct_depth, r.plain_mults, r.minimal_l), (0, 8, 0));

    let (model1, _) = quantize_model(&fixtures::model1_fixture(1), &QuantConfig::new(P)).unwrap();
    let r = depth_report(&model1).unwrap();
    assert_eq!(r.ct_depth, 2);
    assert_eq!(r.per_layer.len(), 7);

    let mut two = linear.clone();
    two.layers = vec![poly(3), dense(4, 4, vec![1; 16], vec![0; 4]), poly(3), dense(2, 4, vec![1; 8], vec![0; 2])];
    let r = depth_report(&two).unwrap();
    assert_eq!((r.ct_depth, r.minimal_l, r.recommended_l), (4, 4, 6));
}

#[test]
fn layer_errors_name_the_layer() {
    let ctx = hecnn_he::HeContext::new(hecnn_he::HeParams::simulator(P, 1, 4)).unwrap();
    let keys = ctx.keygen(b"depth");
    let model = ModelSpec {
        input_shape: Shape::flat(2),
        classes: 2,
        p: P,
        input_scale: 1.0,
        layers: vec![dense(2, 2, vec![1; 4], vec![0; 2]), poly(3)],
        activation_report: None,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let x = Tensor::new(Shape::flat(2), (0..2).map(|_| ctx.encrypt(&keys.public, &[1, 2, 3, 4], &mut rng).unwrap()).collect());
    let err = infer(&model, &HeEngine::new(&ctx, &keys.eval), x).unwrap_err();
    assert!(matches!(err, NnError::Layer { index: 1, kind: "poly_activation", .. }), "{err}");
    assert!(matches!(err.he_error(), Some(hecnn_he::HeError::LevelExhausted { .. })));
}

#[test]
fn wrong_input_shape_is_rejected() {
    let model = ModelSpec {
        input_shape: Shape::flat(3),
        classes: 3,
        p: P,
        input_scale: 1.0,
        layers: vec![LayerSpec::Flatten],
        activation_report: None,
    };
    let t = Tensor::new(Shape::flat(2), vec![vec![0u64]; 2]);
    assert!(matches!(infer(&model, &PlainEngine::new(P), t), Err(NnError::InputShape { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn declared_shapes_match_produced_tensors(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model = random_small_cnn(&mut rng, P);
        let shapes = model.layer_shapes().unwrap();
        let x = fixtures::random_inputs(&mut rng, &model, 1, P);
        let t = pack_batch(&x, &model.input_shape, 1);
        let mut produced = Vec::new();
        infer_traced(&model, &PlainEngine::new(P), t, |tr, out| {
            produced.push((tr.output_shape.clone(), out.data.len()));
        }).unwrap();
        prop_assert_eq!(produced.len(), shapes.len());
        for ((declared, len), want) in produced.iter().zip(&shapes) {
            prop_assert_eq!(declared, want);
            prop_assert_eq!(*len, want.len());
        }
    }

    #[test]
    fn conv_and_dense_are_affine(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = 65537;
        let layers = if rng.random_bool(0.5) {
            vec![conv(2, 2, 3, rng.random_range(1..=2), rand_vec(&mut rng, 36, p), rand_vec(&mut rng, 2, p))]
        } else {
            vec![LayerSpec::Flatten, dense(5, 50, rand_vec(&mut rng, 250, p), rand_vec(&mut rng, 5, p))]
        };
        let shape = Shape::image(2, 5, 5);
        let out_len = {
            let mut s = shape.clone();
            for (i, l) in layers.iter().enumerate() { s = l.output_shape(&s, p, i).unwrap(); }
            s.len()
        };
        let a = rand_vec(&mut rng, 50, p);
        let b = rand_vec(&mut rng, 50, p);
        let ab: Vec<u64> = a.iter().zip(&b).map(|(x, y)| (x + y) % p).collect();
        let zero = run(layers.clone(), shape.clone(), out_len, p, &[0; 50]);
        let fa = run(layers.clone(), shape.clone(), out_len, p, &a);
        let fb = run(layers.clone(), shape.clone(), out_len, p, &b);
        let fab = run(layers, shape, out_len, p, &ab);
        for i in 0..out_len {
            // f(a+b) = f(a) + f(b) − f(0)
            prop_assert_eq!(fab[i], (fa[i] + fb[i] + p - zero[i]) % p);
        }
    }

    #[test]
    fn slots_are_independent(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model = random_small_cnn(&mut rng, P);
        let mut x = fixtures::random_inputs(&mut rng, &model, 8, P);
        let eng = PlainEngine::new(P);
        let before = unpack_batch(&infer(&model, &eng, pack_batch(&x, &model.input_shape, 8)).unwrap(), 8);
        let slot = rng.random_range(0..8);
        let pos = rng.random_range(0..x[slot].len());
        x[slot][pos] = (x[slot][pos] + 1) % P;
        let after = unpack_batch(&infer(&model, &eng, pack_batch(&x, &model.input_shape, 8)).unwrap(), 8);
        for i in 0..8 {
            if i != slot {
                prop_assert_eq!(&before[i], &after[i]);
            }
        }
    }
}

use hecnn_core::fixtures::{model1_small_fixture, random_inputs, random_small_cnn, synthetic_images};
use hecnn_core::quantize::quantize_input;
use hecnn_core::*;
use hecnn_he::{HeContext, HeParams, KeySet};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const P: u64 = 65537;
const BATCH: usize = 64;

fn contexts() -> Vec<(HeContext, KeySet)> {
    [HeParams::simulator(P, 6, BATCH), HeParams::rlwe(P, 6, BATCH)]
        .into_iter()
        .map(|params| {
            let ctx = HeContext::new(params).unwrap();
            let keys = ctx.keygen(b"equivalence");
            (ctx, keys)
        })
        .collect()
}

fn encrypted_matches_plain(ctx: &HeContext, keys: &KeySet, model: &ModelSpec, x: &Tensor<Vec<u64>>, seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cts = encrypt_tensor(ctx, &keys.public, x, &mut rng).unwrap();
    let out = infer(model, &HeEngine::new(ctx, &keys.eval), cts).unwrap();
    let got = decrypt_tensor(ctx, &keys.secret, &out).unwrap();
    let want = infer(model, &PlainEngine::new(model.p), x.clone()).unwrap();
    assert_eq!(got, want, "{:?} backend, seed {seed}", ctx.params().backend);
}

#[test]
fn random_cnns_decrypt_to_plaintext_logits() {
    let ctxs = contexts();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for seed in 0..100 {
        let model = random_small_cnn(&mut rng, P);
        let x = pack_batch(&random_inputs(&mut rng, &model, BATCH, P), &model.input_shape, BATCH);
        for (ctx, keys) in &ctxs {
            encrypted_matches_plain(ctx, keys, &model, &x, seed);
        }
    }
}

#[test]
fn model1_shaped_fixture_decrypts_to_plaintext_logits() {
    let float = model1_small_fixture(1);
    let (model, _) = quantize_model(&float, &QuantConfig::new(P)).unwrap();
    let imgs = synthetic_images(9, BATCH, &model.input_shape);
    let q: Vec<Vec<u64>> = imgs.iter().map(|x| quantize_input(x, &model).unwrap()).collect();
    let x = pack_batch(&q, &model.input_shape, BATCH);
    for (ctx, keys) in &contexts() {
        encrypted_matches_plain(ctx, keys, &model, &x, 1);
    }
}

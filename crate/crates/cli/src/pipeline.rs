//! File-level pipeline steps shared by the commands, the server and the tests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hecnn_core::fixtures::{gen_fixture_model, model1_fixture, model1_small_fixture, synthetic_images};
use hecnn_core::modelio::{load_float_model, load_mnist, ModelMeta, Scales};
use hecnn_core::quantize::quantize_input;
use hecnn_core::{
    argmax_f64, capacity_check, decrypt_tensor, depth_report, encrypt_tensor, infer, infer_traced, pack_batch,
    predict, quantize_model, signed, unpack_batch, CapacityReport, DepthReport, FloatModel, HeEngine, LayerTrace,
    ModelSpec, PlainEngine, QuantConfig, Shape, Tensor,
};
use hecnn_core::quantize::WrappedValues;
use hecnn_he::{EvalKey, HeContext, HeParams, KeySet, PublicKey, SecretKey};
use rand::RngCore;
use serde::Serialize;

use crate::batch::{BatchFile, BatchKind};
use crate::config::check_batch_size;
use crate::error::{file_error, CliError};

/// Raw MNIST pixels.
pub const DEFAULT_INPUT_RANGE: (f64, f64) = (0.0, 255.0);

/// Weight scale at which the full-width fixture stays inside a 49-bit modulus.
pub const MODEL1_WEIGHT_SCALE: f64 = 16.0;

/// A float model plus its file metadata, before quantization.
#[derive(Debug, Clone)]
pub struct ModelSource {
    pub name: String,
    pub float: FloatModel,
    pub meta: ModelMeta,
}

impl ModelSource {
    /// A path to a model file, or `fixture:<small|model1|model1-small>[:seed]`.
    pub fn load(spec: &str) -> Result<Self, CliError> {
        let Some(rest) = spec.strip_prefix("fixture:") else {
            let (float, meta) = load_float_model(spec)?;
            return Ok(Self { name: spec.to_string(), float, meta });
        };
        let (kind, seed) = match rest.split_once(':') {
            Some((k, s)) => (k, s.parse().map_err(|_| CliError::validation(format!("fixture seed {s:?} is not an integer")))?),
            None => (rest, 1),
        };
        let mut meta = ModelMeta::default();
        let float = match kind {
            "small" => gen_fixture_model(seed),
            "model1" => {
                meta.scales = Scales { weight: MODEL1_WEIGHT_SCALE, ..Scales::default() };
                model1_fixture(seed)
            }
            "model1-small" => model1_small_fixture(seed),
            other => return Err(CliError::validation(format!("unknown fixture {other:?} (small, model1, model1-small)"))),
        };
        Ok(Self { name: spec.to_string(), float, meta })
    }

    pub fn input_shape(&self) -> &Shape {
        &self.float.input_shape
    }
}

/// A quantized model with its static analyses.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ModelSpec,
    pub wrapped: Vec<WrappedValues>,
    pub capacity: CapacityReport,
    pub depth: DepthReport,
}

pub fn prepare(source: &ModelSource, p: u64, input_range: (f64, f64)) -> Result<Prepared, CliError> {
    if let Some(file_p) = source.meta.p.filter(|&fp| fp != p) {
        return Err(CliError::validation(format!("model {} targets p = {file_p} but the parameters use p = {p}", source.name)));
    }
    let cfg = QuantConfig { p, input_scale: source.meta.scales.input, weight_scale: source.meta.scales.weight };
    let (mut spec, wrapped) = quantize_model(&source.float, &cfg)?;
    spec.activation_report = source.meta.activation_report.clone();
    let capacity = capacity_check(&spec, input_range)?;
    let depth = depth_report(&spec)?;
    Ok(Prepared { spec, wrapped, capacity, depth })
}

impl Prepared {
    /// Refuse models that need more levels than `levels`, or whose values can leave ±p/2
    /// (unless `allow_overflow`).
    pub fn gate(&self, levels: u32, allow_overflow: bool) -> Result<(), CliError> {
        if self.depth.ct_depth > levels {
            return Err(CliError::capacity(format!(
                "model needs multiplicative depth {} but L = {levels}",
                self.depth.ct_depth
            )));
        }
        if allow_overflow {
            return Ok(());
        }
        if let Some(w) = self.wrapped.first() {
            return Err(CliError::capacity(format!(
                "layer {}: {} quantized parameters exceed p/2 (worst {:.3e}); pass --allow-overflow to wrap them",
                w.layer, w.count, w.worst
            )));
        }
        if let Some(f) = self.capacity.first_failure() {
            return Err(CliError::capacity(format!(
                "layer {} ({}) can reach |x| = {:.3e}, beyond p/2 = {:.3e}; pass --allow-overflow to run anyway",
                f.index,
                f.kind,
                f.bound,
                self.capacity.p as f64 / 2.0
            )));
        }
        Ok(())
    }
}

/// Standard file names for a key directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyFiles {
    pub params: PathBuf,
    pub secret: PathBuf,
    pub public: PathBuf,
    pub eval: PathBuf,
}

impl KeyFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            params: dir.join("params.json"),
            secret: dir.join("secret.key"),
            public: dir.join("public.key"),
            eval: dir.join("eval.key"),
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| file_error(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| file_error(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| file_error(path, e))
}

pub fn load_context(path: &Path) -> Result<HeContext, CliError> {
    let text = String::from_utf8(read_file(path)?).map_err(|_| CliError::validation(format!("{}: not UTF-8", path.display())))?;
    Ok(HeContext::new(HeParams::from_json(&text)?)?)
}

pub fn load_public(ctx: &HeContext, path: &Path) -> Result<PublicKey, CliError> {
    Ok(ctx.public_key_from_bytes(&read_file(path)?)?)
}

pub fn load_secret(ctx: &HeContext, path: &Path) -> Result<SecretKey, CliError> {
    Ok(ctx.secret_key_from_bytes(&read_file(path)?)?)
}

pub fn load_eval(ctx: &HeContext, path: &Path) -> Result<EvalKey, CliError> {
    Ok(ctx.eval_key_from_bytes(&read_file(path)?)?)
}

/// Generate keys deterministically from `seed` and write all four files.
pub fn keygen(params: &HeParams, seed: &[u8], out: &KeyFiles) -> Result<KeySet, CliError> {
    let ctx = HeContext::new(params.clone())?;
    let keys = ctx.keygen(seed);
    write_file(&out.params, params.to_json().as_bytes())?;
    write_file(&out.secret, &keys.secret.to_bytes())?;
    write_file(&out.public, &keys.public.to_bytes())?;
    write_file(&out.eval, &keys.eval.to_bytes())?;
    Ok(keys)
}

/// Images as real pixel vectors, from IDX files or the synthetic generator.
#[derive(Debug, Clone, Default)]
pub struct Images {
    pub pixels: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
}

impl Images {
    pub fn synthetic(seed: u64, count: usize, shape: &Shape) -> Self {
        Self { pixels: synthetic_images(seed, count, shape), labels: None }
    }

    pub fn from_idx(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Self, CliError> {
        let ds = load_mnist(images, labels)?;
        let n = limit.unwrap_or(ds.len()).min(ds.len());
        Ok(Self { pixels: (0..n).map(|i| ds.pixels(i)).collect(), labels: Some(ds.labels[..n].to_vec()) })
    }
}

/// Quantize each instance at the model's input scale.
pub fn quantize_images(spec: &ModelSpec, pixels: &[Vec<f64>]) -> Result<Vec<Vec<u64>>, CliError> {
    pixels
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if x.len() != spec.input_shape.len() {
                return Err(CliError::validation(format!(
                    "instance {i} has {} values, model input {} needs {}",
                    x.len(),
                    spec.input_shape,
                    spec.input_shape.len()
                )));
            }
            Ok(quantize_input(x, spec)?)
        })
        .collect()
}

/// Quantize, pack one instance per slot, and encrypt.
pub fn encrypt_batch(
    ctx: &HeContext,
    pk: &PublicKey,
    spec: &ModelSpec,
    pixels: &[Vec<f64>],
    batch_size: usize,
    rng: &mut dyn RngCore,
) -> Result<BatchFile, CliError> {
    check_batch_size(batch_size, ctx.params())?;
    if pixels.is_empty() {
        return Err(CliError::validation("empty batch: no instances to encrypt"));
    }
    if pixels.len() > batch_size {
        return Err(CliError::validation(format!("{} instances exceed the batch size {batch_size}", pixels.len())));
    }
    let q = quantize_images(spec, pixels)?;
    let packed = pack_batch(&q, &spec.input_shape, ctx.slot_count());
    let cts = encrypt_tensor(ctx, pk, &packed, rng)?;
    Ok(BatchFile::from_tensor(BatchKind::Inputs, pk.fingerprint(), pixels.len(), &cts))
}

/// Evaluate the model on an input batch. Deterministic: equal inputs give equal bytes.
pub fn infer_batch(
    ctx: &HeContext,
    ek: &EvalKey,
    spec: &ModelSpec,
    batch: &BatchFile,
    on_layer: impl FnMut(&LayerTrace),
) -> Result<BatchFile, CliError> {
    if batch.kind != BatchKind::Inputs {
        return Err(CliError::validation("expected an input batch, got a result batch"));
    }
    if batch.instances == 0 {
        return Err(CliError::validation("empty batch: zero instances"));
    }
    if batch.instances > ctx.slot_count() {
        return Err(CliError::validation(format!("{} instances exceed the slot count {}", batch.instances, ctx.slot_count())));
    }
    if batch.shape != spec.input_shape {
        return Err(CliError::validation(format!("batch shape {} does not match model input {}", batch.shape, spec.input_shape)));
    }
    let x = batch.to_tensor(ctx)?;
    let mut on_layer = on_layer;
    let out = infer_traced(spec, &HeEngine::new(ctx, ek), x, |t, _| on_layer(t))?;
    let flat = Tensor::new(Shape::flat(out.len()), out.data);
    Ok(BatchFile::from_tensor(BatchKind::Results, batch.fingerprint, batch.instances, &flat))
}

fn short_hex(fp: &[u8; 32]) -> String {
    fp[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// Decrypted logits per instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decrypted {
    pub residues: Vec<Vec<u64>>,
    pub logits: Vec<Vec<i128>>,
    pub predictions: Vec<usize>,
}

impl Decrypted {
    pub fn from_residues(residues: Vec<Vec<u64>>, p: u64) -> Self {
        let logits = residues.iter().map(|r| r.iter().map(|&v| signed(v, p)).collect()).collect();
        let predictions = residues.iter().map(|r| predict(r, p)).collect();
        Self { residues, logits, predictions }
    }
}

pub fn decrypt_batch(ctx: &HeContext, sk: &SecretKey, batch: &BatchFile) -> Result<Decrypted, CliError> {
    if batch.kind != BatchKind::Results {
        return Err(CliError::validation("expected a result batch, got an input batch"));
    }
    if batch.instances == 0 {
        return Err(CliError::validation("empty batch: zero instances"));
    }
    if sk.public_fingerprint() != batch.fingerprint {
        return Err(CliError::noise(format!(
            "checksum mismatch: secret key belongs to public key {}, batch was encrypted under {}",
            short_hex(&sk.public_fingerprint()),
            short_hex(&batch.fingerprint)
        )));
    }
    let t = decrypt_tensor(ctx, sk, &batch.to_tensor(ctx)?)?;
    let count = batch.instances.min(ctx.slot_count());
    Ok(Decrypted::from_residues(unpack_batch(&t, count), ctx.plain_modulus()))
}

/// Integer logits from the plaintext engine.
pub fn plain_logits(spec: &ModelSpec, instances: &[Vec<u64>]) -> Result<Vec<Vec<u64>>, CliError> {
    let packed = pack_batch(instances, &spec.input_shape, instances.len());
    let out = infer(spec, &PlainEngine::new(spec.p), packed)?;
    Ok(unpack_batch(&out, instances.len()))
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerTiming {
    pub index: usize,
    pub kind: &'static str,
    pub output_shape: String,
    pub seconds: f64,
    pub min_budget: Option<f64>,
}

impl From<&LayerTrace> for LayerTiming {
    fn from(t: &LayerTrace) -> Self {
        Self {
            index: t.index,
            kind: t.kind,
            output_shape: t.output_shape.to_string(),
            seconds: t.elapsed.as_secs_f64(),
            min_budget: t.min_budget,
        }
    }
}

/// Agreement between the encrypted, plaintext-integer and float paths.
#[derive(Debug, Clone, Serialize)]
pub struct E2eReport {
    pub model: String,
    pub instances: usize,
    /// Instances whose decrypted logits equal the plaintext engine's, exactly.
    pub encrypted_equals_plain: usize,
    /// Instances whose plaintext-engine class equals the float model's.
    pub plain_agrees_with_float: usize,
    pub label_matches: Option<usize>,
    pub layers: Vec<LayerTiming>,
    pub total_seconds: f64,
}

impl E2eReport {
    pub fn all_equal(&self) -> bool {
        self.encrypted_equals_plain == self.instances
    }
}

impl std::fmt::Display for E2eReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "model {}: {} instances", self.model, self.instances)?;
        writeln!(f, "  encrypted == plaintext logits: {}/{}", self.encrypted_equals_plain, self.instances)?;
        writeln!(f, "  plaintext class == float class: {}/{}", self.plain_agrees_with_float, self.instances)?;
        if let Some(m) = self.label_matches {
            writeln!(f, "  encrypted class == label: {m}/{}", self.instances)?;
        }
        write!(f, "  total {:.3} s", self.total_seconds)
    }
}

/// Every step in memory, with each artifact passed through its byte encoding.
pub fn run_e2e(
    source: &ModelSource,
    params: &HeParams,
    images: &Images,
    seed: u64,
    allow_overflow: bool,
) -> Result<E2eReport, CliError> {
    let start = Instant::now();
    let ctx = HeContext::new(params.clone())?;
    let prepared = prepare(source, params.p, DEFAULT_INPUT_RANGE)?;
    prepared.gate(params.levels, allow_overflow)?;
    let spec = &prepared.spec;
    let keys = ctx.keygen(&seed.to_le_bytes());
    let mut rng = seeded(seed);
    let n = images.pixels.len();
    let inputs = encrypt_batch(&ctx, &keys.public, spec, &images.pixels, n.max(1).min(ctx.slot_count()), &mut rng)?;
    let inputs = BatchFile::from_bytes(&inputs.to_bytes())?;
    let mut layers = Vec::new();
    let results = infer_batch(&ctx, &keys.eval, spec, &inputs, |t| layers.push(LayerTiming::from(t)))?;
    let results = BatchFile::from_bytes(&results.to_bytes())?;
    let dec = decrypt_batch(&ctx, &keys.secret, &results)?;

    let q = quantize_images(spec, &images.pixels)?;
    let plain = plain_logits(spec, &q)?;
    let encrypted_equals_plain = dec.residues.iter().zip(&plain).filter(|(a, b)| a == b).count();
    let plain_agrees_with_float = plain
        .iter()
        .zip(&images.pixels)
        .filter(|(l, x)| predict(l, spec.p) == argmax_f64(&source.float.forward(x)))
        .count();
    let label_matches = images
        .labels
        .as_ref()
        .map(|labels| dec.predictions.iter().zip(labels).filter(|(&p, &l)| p == l as usize).count());
    Ok(E2eReport {
        model: source.name.clone(),
        instances: n,
        encrypted_equals_plain,
        plain_agrees_with_float,
        label_matches,
        layers,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

/// The encryption RNG for a seed.
pub fn seeded(seed: u64) -> rand_chacha::ChaCha20Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha20Rng::seed_from_u64(seed)
}

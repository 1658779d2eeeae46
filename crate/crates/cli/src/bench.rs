//! Timing and transfer breakdown of one encrypted batch.

use std::fmt;
use std::time::Instant;

use hecnn_he::{HeContext, HeParams};
use serde::Serialize;

use crate::error::CliError;
use crate::pipeline::{
    decrypt_batch, encrypt_batch, infer_batch, plain_logits, prepare, quantize_images, seeded, Images, LayerTiming,
    ModelSource, DEFAULT_INPUT_RANGE,
};

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub model: String,
    pub backend: String,
    pub slot_count: usize,
    pub instances: usize,
    pub keygen_seconds: f64,
    pub encrypt_seconds: f64,
    pub layers: Vec<LayerTiming>,
    pub inference_seconds: f64,
    pub decrypt_seconds: f64,
    /// Parameters, public and evaluation keys and the input batch.
    pub upload_bytes: usize,
    pub download_bytes: usize,
    pub predictions_per_hour: f64,
    /// Decrypted logits compared with the plaintext engine, when requested.
    pub verified: Option<bool>,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} on {} ({} slots, {} instances)", self.model, self.backend, self.slot_count, self.instances)?;
        writeln!(f, "{:<28} {:>10}", "stage", "seconds")?;
        writeln!(f, "{:<28} {:>10.3}", "key generation", self.keygen_seconds)?;
        writeln!(f, "{:<28} {:>10.3}", "encryption", self.encrypt_seconds)?;
        for l in &self.layers {
            let name = format!("{} {} -> {}", l.index, l.kind, l.output_shape);
            writeln!(f, "{name:<28} {:>10.3}", l.seconds)?;
        }
        writeln!(f, "{:<28} {:>10.3}", "inference total", self.inference_seconds)?;
        writeln!(f, "{:<28} {:>10.3}", "decryption", self.decrypt_seconds)?;
        writeln!(f, "upload {} bytes, download {} bytes", self.upload_bytes, self.download_bytes)?;
        write!(f, "{:.0} predictions/hour", self.predictions_per_hour)?;
        if let Some(ok) = self.verified {
            write!(f, "\ndecrypted logits {} plaintext logits", if ok { "equal" } else { "DIFFER FROM" })?;
        }
        Ok(())
    }
}

pub fn run_bench(
    source: &ModelSource,
    params: &HeParams,
    instances: usize,
    seed: u64,
    allow_overflow: bool,
    verify: bool,
) -> Result<BenchReport, CliError> {
    let ctx = HeContext::new(params.clone())?;
    let prepared = prepare(source, params.p, DEFAULT_INPUT_RANGE)?;
    prepared.gate(params.levels, allow_overflow)?;
    let spec = &prepared.spec;
    let images = Images::synthetic(seed, instances, source.input_shape());

    let t = Instant::now();
    let keys = ctx.keygen(&seed.to_le_bytes());
    let keygen_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let inputs = encrypt_batch(&ctx, &keys.public, spec, &images.pixels, instances, &mut seeded(seed))?;
    let encrypt_seconds = t.elapsed().as_secs_f64();
    let upload_bytes =
        params.to_json().len() + keys.public.to_bytes().len() + keys.eval.to_bytes().len() + inputs.byte_len();

    let mut layers = Vec::new();
    let t = Instant::now();
    let results = infer_batch(&ctx, &keys.eval, spec, &inputs, |l| layers.push(LayerTiming::from(l)))?;
    let inference_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let dec = decrypt_batch(&ctx, &keys.secret, &results)?;
    let decrypt_seconds = t.elapsed().as_secs_f64();

    let verified = if verify {
        let plain = plain_logits(spec, &quantize_images(spec, &images.pixels)?)?;
        Some(plain == dec.residues)
    } else {
        None
    };
    Ok(BenchReport {
        model: source.name.clone(),
        backend: format!("{:?}", params.backend),
        slot_count: ctx.slot_count(),
        instances,
        keygen_seconds,
        encrypt_seconds,
        layers,
        inference_seconds,
        decrypt_seconds,
        upload_bytes,
        download_bytes: results.byte_len(),
        predictions_per_hour: instances as f64 * 3600.0 / inference_seconds.max(1e-9),
        verified,
    })
}

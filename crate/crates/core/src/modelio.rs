//! Model files and MNIST IDX data.
//!
//! A model file is a JSON manifest holding float (pre-quantization) weights, either inline as
//! number arrays or as `{"offset", "length"}` references into a sibling blob of little-endian f32.
//! `offset` counts bytes from the start of the blob, `length` counts f32 elements.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::layers::ModelSpec;
use crate::model::{FloatLayer, FloatModel};
use crate::quantize::{quantize_model, QuantConfig, WrappedValues, DEFAULT_INPUT_SCALE, DEFAULT_WEIGHT_SCALE};
use crate::tensor::Shape;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    Inline(Vec<f64>),
    Blob { offset: u64, length: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scales {
    pub input: f64,
    pub weight: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Self { input: DEFAULT_INPUT_SCALE, weight: DEFAULT_WEIGHT_SCALE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifestLayer {
    Conv2d { out_ch: usize, in_ch: usize, kh: usize, kw: usize, stride: usize, weights: Values, bias: Values },
    BatchNorm { gamma: Values, beta: Values, mean: Values, var: Values, eps: f64 },
    AvgPool { window: usize },
    Activation { coeffs: Vec<f64> },
    Dense {
        out: usize,
        #[serde(rename = "in")]
        inputs: usize,
        weights: Values,
        bias: Values,
    },
    Flatten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub input_shape: Shape,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(default)]
    pub scales: Scales,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_report: Option<String>,
    /// Blob file name, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob: Option<String>,
    pub layers: Vec<ManifestLayer>,
}

/// Everything in a model file besides the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub p: Option<u64>,
    pub scales: Scales,
    pub activation_report: Option<String>,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self { p: None, scales: Scales::default(), activation_report: None }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

struct BlobReader<'a> {
    bytes: Option<&'a [u8]>,
}

impl BlobReader<'_> {
    fn get(&self, v: &Values) -> Result<Vec<f64>, IoError> {
        match v {
            Values::Inline(xs) => Ok(xs.clone()),
            Values::Blob { offset, length } => {
                let bytes = self.bytes.ok_or_else(|| IoError::Schema("weights reference a blob but none is declared".into()))?;
                let start = usize::try_from(*offset).map_err(|_| IoError::Blob(format!("offset {offset} out of range")))?;
                if start % 4 != 0 {
                    return Err(IoError::Blob(format!("offset {start} is not a multiple of 4")));
                }
                let end = length.checked_mul(4).and_then(|l| l.checked_add(start)).filter(|&e| e <= bytes.len()).ok_or_else(|| {
                    IoError::Blob(format!("{length} values at byte {start} exceed the {}-byte blob", bytes.len()))
                })?;
                Ok(bytes[start..end].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
            }
        }
    }
}

impl Manifest {
    pub fn from_json(s: &str) -> Result<Self, IoError> {
        let m: Manifest = serde_json::from_str(s)?;
        if m.format_version != FORMAT_VERSION {
            return Err(IoError::Schema(format!("format_version {} is not supported (expected {FORMAT_VERSION})", m.format_version)));
        }
        Ok(m)
    }

    /// Resolve weight references against `blob` (required iff the manifest declares one).
    pub fn resolve(&self, blob: Option<&[u8]>) -> Result<(FloatModel, ModelMeta), IoError> {
        let r = BlobReader { bytes: blob };
        let layers = self
            .layers
            .iter()
            .map(|l| {
                Ok(match l {
                    ManifestLayer::Conv2d { out_ch, in_ch, kh, kw, stride, weights, bias } => FloatLayer::Conv2d {
                        out_ch: *out_ch,
                        in_ch: *in_ch,
                        kh: *kh,
                        kw: *kw,
                        stride: *stride,
                        weights: r.get(weights)?,
                        bias: r.get(bias)?,
                    },
                    ManifestLayer::BatchNorm { gamma, beta, mean, var, eps } => FloatLayer::BatchNorm {
                        gamma: r.get(gamma)?,
                        beta: r.get(beta)?,
                        mean: r.get(mean)?,
                        var: r.get(var)?,
                        eps: *eps,
                    },
                    ManifestLayer::AvgPool { window } => FloatLayer::AvgPool { window: *window },
                    ManifestLayer::Activation { coeffs } => FloatLayer::Activation { coeffs: coeffs.clone() },
                    ManifestLayer::Dense { out, inputs, weights, bias } => {
                        FloatLayer::Dense { out: *out, inputs: *inputs, weights: r.get(weights)?, bias: r.get(bias)? }
                    }
                    ManifestLayer::Flatten => FloatLayer::Flatten,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        let model = FloatModel { input_shape: self.input_shape.clone(), classes: self.classes, layers };
        model.validate()?;
        let meta = ModelMeta { p: self.p, scales: self.scales, activation_report: self.activation_report.clone() };
        Ok((model, meta))
    }
}

/// Build a manifest; with `blob` set, weights go into the returned byte buffer as f32.
pub fn to_manifest(model: &FloatModel, meta: &ModelMeta, blob: Option<&str>) -> (Manifest, Vec<u8>) {
    let mut bytes = Vec::new();
    let mut put = |v: &[f64]| -> Values {
        if blob.is_none() {
            return Values::Inline(v.to_vec());
        }
        let offset = bytes.len() as u64;
        for &x in v {
            bytes.extend_from_slice(&(x as f32).to_le_bytes());
        }
        Values::Blob { offset, length: v.len() }
    };
    let layers = model
        .layers
        .iter()
        .map(|l| match l {
            FloatLayer::Conv2d { out_ch, in_ch, kh, kw, stride, weights, bias } => ManifestLayer::Conv2d {
                out_ch: *out_ch,
                in_ch: *in_ch,
                kh: *kh,
                kw: *kw,
                stride: *stride,
                weights: put(weights),
                bias: put(bias),
            },
            FloatLayer::BatchNorm { gamma, beta, mean, var, eps } => {
                ManifestLayer::BatchNorm { gamma: put(gamma), beta: put(beta), mean: put(mean), var: put(var), eps: *eps }
            }
            FloatLayer::AvgPool { window } => ManifestLayer::AvgPool { window: *window },
            FloatLayer::Activation { coeffs } => ManifestLayer::Activation { coeffs: coeffs.clone() },
            FloatLayer::Dense { out, inputs, weights, bias } => {
                ManifestLayer::Dense { out: *out, inputs: *inputs, weights: put(weights), bias: put(bias) }
            }
            FloatLayer::Flatten => ManifestLayer::Flatten,
        })
        .collect();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        input_shape: model.input_shape.clone(),
        classes: model.classes,
        p: meta.p,
        scales: meta.scales,
        activation_report: meta.activation_report.clone(),
        blob: blob.map(str::to_string),
        layers,
    };
    (manifest, bytes)
}

fn blob_path(manifest_path: &Path, name: &str) -> PathBuf {
    manifest_path.parent().unwrap_or(Path::new(".")).join(name)
}

/// Write a model file. With `use_blob`, weights go to `<stem>.bin` next to the manifest.
pub fn save_model(path: impl AsRef<Path>, model: &FloatModel, meta: &ModelMeta, use_blob: bool) -> Result<(), IoError> {
    let path = path.as_ref();
    model.validate()?;
    let name = use_blob.then(|| {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
        format!("{stem}.bin")
    });
    let (manifest, bytes) = to_manifest(model, meta, name.as_deref());
    if let Some(name) = &name {
        write(&blob_path(path, name), &bytes)?;
    }
    write(path, serde_json::to_string_pretty(&manifest)?.as_bytes())
}

/// Read a model file as floats, unquantized and with BatchNorm still explicit.
pub fn load_float_model(path: impl AsRef<Path>) -> Result<(FloatModel, ModelMeta), IoError> {
    let path = path.as_ref();
    let text = String::from_utf8(read(path)?).map_err(|_| IoError::Schema("manifest is not UTF-8".into()))?;
    let manifest = Manifest::from_json(&text)?;
    let blob = match &manifest.blob {
        Some(name) => Some(read(&blob_path(path, name))?),
        None => None,
    };
    manifest.resolve(blob.as_deref())
}

/// A model file after BatchNorm folding and quantization.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub float: FloatModel,
    pub meta: ModelMeta,
    pub spec: ModelSpec,
    pub wrapped: Vec<WrappedValues>,
}

/// Load and quantize. `p` overrides the file's modulus; one of the two must be present.
pub fn load_model(path: impl AsRef<Path>, p: Option<u64>) -> Result<LoadedModel, IoError> {
    let (float, meta) = load_float_model(path)?;
    let p = p.or(meta.p).ok_or_else(|| IoError::Schema("no plaintext modulus given and none in the model file".into()))?;
    let cfg = QuantConfig { p, input_scale: meta.scales.input, weight_scale: meta.scales.weight };
    let (mut spec, wrapped) = quantize_model(&float, &cfg)?;
    spec.activation_report = meta.activation_report.clone();
    Ok(LoadedModel { float, meta, spec, wrapped })
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Pixels of image `i` as the raw 0..=255 integers, as floats.
    pub fn pixels(&self, i: usize) -> Vec<f64> {
        self.images[i].iter().map(|&b| b as f64).collect()
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, IoError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| IoError::Idx("truncated header".into()))
}

/// `(rows, cols, images)` from an IDX3 image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<u8>>), IoError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(IoError::Idx(format!("bad image magic {magic:#010x}")));
    }
    let (count, rows, cols) = (be_u32(bytes, 4)? as usize, be_u32(bytes, 8)? as usize, be_u32(bytes, 12)? as usize);
    let size = rows.saturating_mul(cols);
    let body = &bytes[16..];
    if size == 0 || count.checked_mul(size) != Some(body.len()) {
        return Err(IoError::Idx(format!("expected {count} images of {rows}×{cols}, found {} pixel bytes", body.len())));
    }
    Ok((rows, cols, body.chunks_exact(size).map(<[u8]>::to_vec).collect()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IoError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(IoError::Idx(format!("bad label magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(IoError::Idx(format!("expected {count} labels, found {}", body.len())));
    }
    if let Some(bad) = body.iter().find(|&&l| l > 9) {
        return Err(IoError::Idx(format!("label {bad} outside 0..=9")));
    }
    Ok(body.to_vec())
}

pub fn encode_idx_images(images: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IDX_IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        assert_eq!(img.len(), rows * cols);
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn load_mnist(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset, IoError> {
    let (rows, cols, images) = parse_idx_images(&read(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read(labels_path.as_ref())?)?;
    if labels.len() != images.len() {
        return Err(IoError::Idx(format!("{} images but {} labels", images.len(), labels.len())));
    }
    Ok(Dataset { rows, cols, images, labels })
}

pub fn save_mnist(ds: &Dataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<(), IoError> {
    write(images_path.as_ref(), &encode_idx_images(&ds.images, ds.rows, ds.cols))?;
    write(labels_path.as_ref(), &encode_idx_labels(&ds.labels))
}

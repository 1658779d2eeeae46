//! CNN inference over Z_p with interchangeable arithmetic: plaintext slot vectors or ciphertexts.
//!
//! A float model (as trained) is folded and quantized into a [`ModelSpec`]; the layer code in
//! [`nn`] runs it on any [`Engine`], so encrypted and plaintext execution share one path.

mod error;
pub mod engine;
pub mod fixtures;
pub mod layers;
pub mod model;
pub mod modelio;
pub mod nn;
pub mod quantize;
pub mod tensor;

pub use engine::{decrypt_tensor, encrypt_tensor, Engine, HeEngine, PlainEngine};
pub use error::{IoError, ModelError, NnError, QuantError};
pub use layers::{LayerSpec, ModelSpec};
pub use model::{argmax_f64, FloatLayer, FloatModel};
pub use nn::{depth_report, infer, infer_traced, predict, signed, DepthReport, LayerDepth, LayerTrace, DEPTH_MARGIN};
pub use quantize::{capacity_check, dequantize, quantize_model, quantize_tensor, CapacityReport, FixedPointScale, QuantConfig};
pub use tensor::{pack_batch, unpack_batch, Shape, Tensor};

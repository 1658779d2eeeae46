//! Leveled homomorphic evaluation of add/multiply circuits over slot-batched integer vectors.
//!
//! One interface, two backends: [`Backend::Simulator`] computes in Z_p and charges a fixed
//! noise model, [`Backend::Rlwe`] is a real scale-invariant RLWE scheme with NTT batching.

pub mod arith;
pub mod circuit;
mod ciphertext;
mod context;
mod error;
mod keys;
pub mod ntt;
mod params;
mod rlwe;
pub mod rns;
mod serial;
mod wire;

pub use ciphertext::Ciphertext;
pub use context::{poly_depth, HeContext, MIN_DECRYPT_MARGIN_BITS};
pub use error::HeError;
pub use keys::{EvalKey, KeySet, PublicKey, SecretKey};
pub use params::{
    Backend, HeParams, NoiseModel, DEFAULT_LEVELS, DEFAULT_PLAIN_MODULUS, DEFAULT_RING_DEGREE,
    DEFAULT_SECURITY_BITS, DEFAULT_SLOT_COUNT, MAX_LEVELS, MAX_MODULUS_WORDS, MAX_RING_DEGREE,
    MAX_SLOT_COUNT,
};

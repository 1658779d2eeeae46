use sha2::{Digest, Sha256};

use crate::rlwe::{RlweEval, RlwePublic, RlweSecret};

pub(crate) const KEY_MAGIC: &[u8; 4] = b"CDLK";
pub(crate) const KEY_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum KeyKind {
    Secret = 0,
    Public = 1,
    Eval = 2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SecretInner {
    Sim { secret: [u8; 32] },
    Rlwe(RlweSecret),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PublicInner {
    Sim { key_id: u64 },
    Rlwe(RlwePublic),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum EvalInner {
    Sim { key_id: u64 },
    Rlwe(RlweEval),
}

/// Decryption key. Carries the fingerprint of the public key it was generated with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) inner: SecretInner,
    pub(crate) public_fingerprint: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) inner: PublicInner,
}

/// Relinearization key used by ciphertext-ciphertext multiplication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalKey {
    pub(crate) inner: EvalInner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySet {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub eval: EvalKey,
}

pub(crate) fn sim_key_id(secret: &[u8; 32]) -> u64 {
    let d = Sha256::new().chain_update(b"sim-key-id").chain_update(secret).finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

pub(crate) fn fingerprint_words(fp: &[u8; 32]) -> Vec<u64> {
    fp.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect()
}

pub(crate) fn fingerprint_from_words(w: &[u64]) -> Option<[u8; 32]> {
    if w.len() != 4 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, x) in w.iter().enumerate() {
        out[i * 8..(i + 1) * 8].copy_from_slice(&x.to_le_bytes());
    }
    Some(out)
}

impl SecretKey {
    /// SHA-256 of the matching public key's serialized bytes.
    pub fn public_fingerprint(&self) -> [u8; 32] {
        self.public_fingerprint
    }
}

impl PublicKey {
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

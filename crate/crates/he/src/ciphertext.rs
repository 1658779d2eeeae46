use crate::params::Backend;
use crate::rlwe::RlweCt;

pub(crate) const CT_MAGIC: &[u8; 4] = b"CDL1";
pub(crate) const CT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Body {
    /// Plaintext slots in the clear, bound to a key id; `nonce` makes encryptions distinct.
    Sim { slots: Vec<u64>, key_id: u64, nonce: u64 },
    Rlwe(RlweCt),
}

/// A slot-batched encrypted vector with level and noise-budget bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub(crate) level: u32,
    pub(crate) noise_budget: f64,
    pub(crate) body: Body,
}

impl Ciphertext {
    /// Remaining ciphertext-ciphertext multiplications.
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Estimated bits of noise headroom (simulator: exact per its model; RLWE: analytic bound).
    pub fn noise_budget(&self) -> f64 {
        self.noise_budget
    }

    pub fn backend(&self) -> Backend {
        match self.body {
            Body::Sim { .. } => Backend::Simulator,
            Body::Rlwe(_) => Backend::Rlwe,
        }
    }
}

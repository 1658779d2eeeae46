use serde::{Deserialize, Serialize};

use crate::arith::is_prime;
use crate::error::HeError;

pub const DEFAULT_SLOT_COUNT: usize = 8192;
pub const DEFAULT_RING_DEGREE: usize = 4096;
pub const DEFAULT_PLAIN_MODULUS: u64 = 65537;
pub const DEFAULT_LEVELS: u32 = 6;
pub const DEFAULT_SECURITY_BITS: u32 = 80;
/// Upper limits that keep a hostile parameter file from exhausting memory.
pub const MAX_SLOT_COUNT: usize = 1 << 20;
pub const MAX_RING_DEGREE: usize = 1 << 16;
pub const MAX_LEVELS: u32 = 64;
pub const MAX_MODULUS_WORDS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Simulator,
    Rlwe,
}

impl Backend {
    pub fn id(self) -> u8 {
        match self {
            Backend::Simulator => 0,
            Backend::Rlwe => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Backend::Simulator),
            1 => Some(Backend::Rlwe),
            _ => None,
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = HeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simulator" | "sim" => Ok(Backend::Simulator),
            "rlwe" => Ok(Backend::Rlwe),
            other => Err(HeError::InvalidParams(format!("unknown backend {other:?}"))),
        }
    }
}

/// Bit costs charged by the simulator backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub fresh_bits_per_level: f64,
    pub add: f64,
    pub mul_plain: f64,
    pub mul: f64,
    pub rotate: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { fresh_bits_per_level: 20.0, add: 1.0, mul_plain: 3.0, mul: 6.0, rotate: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeParams {
    pub p: u64,
    #[serde(rename = "L")]
    pub levels: u32,
    #[serde(rename = "k")]
    pub security_bits: u32,
    pub n: usize,
    pub slot_count: usize,
    pub backend: Backend,
    /// Number of 60-bit RNS words in q. `None` sizes q from L and p.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus_words: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
}

impl HeParams {
    pub fn simulator(p: u64, levels: u32, slot_count: usize) -> Self {
        Self {
            p,
            levels,
            security_bits: DEFAULT_SECURITY_BITS,
            n: slot_count,
            slot_count,
            backend: Backend::Simulator,
            modulus_words: None,
            noise: None,
        }
    }

    pub fn rlwe(p: u64, levels: u32, n: usize) -> Self {
        Self {
            p,
            levels,
            security_bits: DEFAULT_SECURITY_BITS,
            n,
            slot_count: n,
            backend: Backend::Rlwe,
            modulus_words: None,
            noise: None,
        }
    }

    pub fn default_simulator() -> Self {
        Self::simulator(DEFAULT_PLAIN_MODULUS, DEFAULT_LEVELS, DEFAULT_SLOT_COUNT)
    }

    pub fn default_rlwe() -> Self {
        Self::rlwe(DEFAULT_PLAIN_MODULUS, DEFAULT_LEVELS, DEFAULT_RING_DEGREE)
    }

    pub fn with_backend(&self, backend: Backend) -> Self {
        let mut out = self.clone();
        out.backend = backend;
        if backend == Backend::Rlwe {
            out.slot_count = out.n;
        }
        out
    }

    pub fn noise_model(&self) -> NoiseModel {
        self.noise.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), HeError> {
        let bad = |m: String| Err(HeError::InvalidParams(m));
        if !is_prime(self.p) {
            return bad(format!("p = {} is not prime", self.p));
        }
        if self.levels == 0 {
            return bad("L must be at least 1".into());
        }
        if self.slot_count == 0 || self.slot_count > MAX_SLOT_COUNT {
            return bad(format!("slot_count must be in 1..={MAX_SLOT_COUNT}"));
        }
        if self.levels > MAX_LEVELS {
            return bad(format!("L = {} exceeds {MAX_LEVELS}", self.levels));
        }
        match self.backend {
            Backend::Simulator => {
                if self.p >= 1 << 62 {
                    return bad(format!("p = {} exceeds 62 bits", self.p));
                }
            }
            Backend::Rlwe => {
                if !self.n.is_power_of_two() || self.n < 2 {
                    return bad(format!("ring degree n = {} is not a power of two", self.n));
                }
                if self.n > MAX_RING_DEGREE {
                    return bad(format!("ring degree n = {} exceeds {MAX_RING_DEGREE}", self.n));
                }
                if self.p >= 1 << 59 {
                    return bad(format!("p = {} exceeds 59 bits", self.p));
                }
                if self.p % (2 * self.n as u64) != 1 {
                    return bad(format!(
                        "p = {} is not 1 mod 2n = {}; full slot batching impossible",
                        self.p,
                        2 * self.n
                    ));
                }
                if self.slot_count != self.n {
                    return bad(format!("slot_count {} must equal n = {}", self.slot_count, self.n));
                }
                if let Some(k) = self.modulus_words {
                    if k == 0 || k > MAX_MODULUS_WORDS {
                        return bad(format!("modulus_words must be in 1..={MAX_MODULUS_WORDS}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, HeError> {
        let p: HeParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

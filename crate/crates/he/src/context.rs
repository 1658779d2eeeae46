use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::arith::Modulus;
use crate::ciphertext::{Body, Ciphertext};
use crate::error::HeError;
use crate::keys::*;
use crate::params::{Backend, HeParams, NoiseModel};
use crate::rlwe::{budget_from_log2_noise, log2_add, log2_noise_from_budget, RlweContext};

/// Measured headroom below which RLWE decryption is refused. A ciphertext under the wrong key
/// decrypts to noise spread over the whole torus, so its worst coefficient sits near 1/2.
pub const MIN_DECRYPT_MARGIN_BITS: f64 = 1.0;

/// Depth of the balanced power tree used for a polynomial of degree `d`.
pub fn poly_depth(d: usize) -> u32 {
    if d <= 1 {
        0
    } else {
        usize::BITS - (d - 1).leading_zeros()
    }
}

/// Evaluation context: validated parameters plus backend precomputation. Immutable and shareable.
#[derive(Debug)]
pub struct HeContext {
    params: HeParams,
    pm: Modulus,
    noise: NoiseModel,
    rlwe: Option<Box<RlweContext>>,
}

impl HeContext {
    pub fn new(params: HeParams) -> Result<Self, HeError> {
        params.validate()?;
        let rlwe = match params.backend {
            Backend::Simulator => None,
            Backend::Rlwe => Some(Box::new(RlweContext::new(&params)?)),
        };
        Ok(Self { pm: Modulus::new(params.p), noise: params.noise_model(), params, rlwe })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn slot_count(&self) -> usize {
        self.params.slot_count
    }

    pub fn plain_modulus(&self) -> u64 {
        self.params.p
    }

    pub(crate) fn rlwe(&self) -> Option<&RlweContext> {
        self.rlwe.as_deref()
    }

    /// RNS primes of the ciphertext modulus (empty for the simulator).
    pub fn ciphertext_primes(&self) -> Vec<u64> {
        self.rlwe().map(|c| c.q_primes()).unwrap_or_default()
    }

    /// log2 of the ciphertext modulus (RLWE only).
    pub fn modulus_bits(&self) -> Option<f64> {
        self.rlwe().map(|c| c.log2_q())
    }

    pub fn fresh_budget(&self) -> f64 {
        match self.rlwe() {
            None => self.noise.fresh_bits_per_level * self.params.levels as f64,
            Some(ctx) => budget_from_log2_noise(ctx.bounds().fresh()),
        }
    }

    /// Deterministic in (params, seed); the seed is hashed so any length works.
    pub fn keygen(&self, seed: &[u8]) -> KeySet {
        let digest: [u8; 32] = Sha256::new().chain_update(b"hecnn-keygen").chain_update(seed).finalize().into();
        let mut rng = ChaCha20Rng::from_seed(digest);
        let (secret, public, eval) = match self.rlwe() {
            None => {
                let mut secret = [0u8; 32];
                rng.fill_bytes(&mut secret);
                let key_id = sim_key_id(&secret);
                (
                    SecretInner::Sim { secret },
                    PublicKey { inner: PublicInner::Sim { key_id } },
                    EvalKey { inner: EvalInner::Sim { key_id } },
                )
            }
            Some(ctx) => {
                let (s, p, e) = ctx.keygen(&mut rng);
                (
                    SecretInner::Rlwe(s),
                    PublicKey { inner: PublicInner::Rlwe(p) },
                    EvalKey { inner: EvalInner::Rlwe(e) },
                )
            }
        };
        let secret = SecretKey { inner: secret, public_fingerprint: public.fingerprint() };
        KeySet { secret, public, eval }
    }

    fn check_plain(&self, values: &[u64]) -> Result<(), HeError> {
        if values.len() > self.params.slot_count {
            return Err(HeError::TooManySlots { len: values.len(), slot_count: self.params.slot_count });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v >= self.params.p) {
            return Err(HeError::ValueOutOfRange { index, value, p: self.params.p });
        }
        Ok(())
    }

    fn check_scalar(&self, w: u64) -> Result<(), HeError> {
        if w >= self.params.p {
            return Err(HeError::ValueOutOfRange { index: 0, value: w, p: self.params.p });
        }
        Ok(())
    }

    fn padded(&self, values: &[u64]) -> Vec<u64> {
        let mut v = values.to_vec();
        v.resize(self.params.slot_count, 0);
        v
    }

    /// Encrypt up to `slot_count` values in [0, p); missing slots are zero.
    pub fn encrypt<R: RngCore + ?Sized>(
        &self,
        pk: &PublicKey,
        slots: &[u64],
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        self.check_plain(slots)?;
        let body = match (&pk.inner, self.rlwe()) {
            (PublicInner::Sim { key_id }, None) => {
                Body::Sim { slots: self.padded(slots), key_id: *key_id, nonce: rng.next_u64() }
            }
            (PublicInner::Rlwe(pk), Some(ctx)) => Body::Rlwe(ctx.encrypt(pk, slots, rng)),
            _ => return Err(HeError::ParamsMismatch("public key backend".into())),
        };
        Ok(Ciphertext { level: self.params.levels, noise_budget: self.fresh_budget(), body })
    }

    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Vec<u64>, HeError> {
        self.decrypt_measured(sk, ct).map(|(v, _)| v)
    }

    /// Decrypt and report the noise headroom in bits. RLWE measures the actual noise with the
    /// secret key; the simulator reports its bookkept budget.
    pub fn decrypt_measured(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<(Vec<u64>, f64), HeError> {
        match (&sk.inner, &ct.body, self.rlwe()) {
            (SecretInner::Sim { secret }, Body::Sim { slots, key_id, .. }, None) => {
                if sim_key_id(secret) != *key_id {
                    return Err(HeError::KeyMismatch("ciphertext was encrypted under a different key".into()));
                }
                if ct.noise_budget <= 0.0 {
                    return Err(HeError::NoiseExhausted { budget: ct.noise_budget });
                }
                Ok((slots.clone(), ct.noise_budget))
            }
            (SecretInner::Rlwe(sk), Body::Rlwe(c), Some(ctx)) => {
                let (slots, measured) = ctx.decrypt(sk, c);
                if measured < MIN_DECRYPT_MARGIN_BITS {
                    return Err(HeError::NoiseExhausted { budget: measured });
                }
                Ok((slots, measured))
            }
            _ => Err(HeError::ParamsMismatch("key, ciphertext and context backends differ".into())),
        }
    }

    pub fn noise_budget(&self, ct: &Ciphertext) -> f64 {
        ct.noise_budget
    }

    fn same_key(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(), HeError> {
        match (&a.body, &b.body) {
            (Body::Sim { key_id: x, .. }, Body::Sim { key_id: y, .. }) if x != y => {
                Err(HeError::KeyMismatch("operands encrypted under different keys".into()))
            }
            (Body::Sim { .. }, Body::Sim { .. }) | (Body::Rlwe(_), Body::Rlwe(_)) => Ok(()),
            _ => Err(HeError::ParamsMismatch("operands from different backends".into())),
        }
    }

    fn sim_map(&self, a: &[u64], f: impl Fn(usize, u64) -> u64) -> Vec<u64> {
        a.iter().enumerate().map(|(i, &x)| f(i, x)).collect()
    }

    /// New budget never exceeds the smallest operand budget.
    fn settle(&self, budget: f64, inputs: &[f64]) -> f64 {
        inputs.iter().copied().fold(budget, f64::min)
    }

    fn rlwe_budget(&self, f: impl FnOnce(&crate::rlwe::NoiseBounds) -> f64, inputs: &[f64]) -> f64 {
        let ctx = self.rlwe().expect("rlwe context");
        self.settle(budget_from_log2_noise(f(&ctx.bounds())), inputs)
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.same_key(a, b)?;
        let level = a.level.min(b.level);
        let m = &self.pm;
        Ok(match (&a.body, &b.body) {
            (Body::Sim { slots: x, key_id, nonce }, Body::Sim { slots: y, nonce: nb, .. }) => Ciphertext {
                level,
                noise_budget: a.noise_budget.min(b.noise_budget) - self.noise.add,
                body: Body::Sim {
                    slots: self.sim_map(x, |i, v| m.add(v, y[i])),
                    key_id: *key_id,
                    nonce: nonce ^ nb.rotate_left(1),
                },
            },
            (Body::Rlwe(x), Body::Rlwe(y)) => {
                let ctx = self.rlwe().unwrap();
                let (la, lb) = (log2_noise_from_budget(a.noise_budget), log2_noise_from_budget(b.noise_budget));
                Ciphertext {
                    level,
                    noise_budget: self.rlwe_budget(|nb| nb.add(la, lb), &[a.noise_budget, b.noise_budget]),
                    body: Body::Rlwe(ctx.add(x, y)),
                }
            }
            _ => unreachable!(),
        })
    }

    pub fn add_plain(&self, a: &Ciphertext, plain: &[u64]) -> Result<Ciphertext, HeError> {
        self.check_plain(plain)?;
        let m = &self.pm;
        Ok(match &a.body {
            Body::Sim { slots, key_id, nonce } => Ciphertext {
                level: a.level,
                noise_budget: a.noise_budget - self.noise.add,
                body: Body::Sim {
                    slots: self.sim_map(slots, |i, v| m.add(v, plain.get(i).copied().unwrap_or(0))),
                    key_id: *key_id,
                    nonce: *nonce,
                },
            },
            Body::Rlwe(x) => {
                let la = log2_noise_from_budget(a.noise_budget);
                Ciphertext {
                    level: a.level,
                    noise_budget: self.rlwe_budget(|nb| nb.add_plain(la), &[a.noise_budget]),
                    body: Body::Rlwe(self.rlwe().unwrap().add_plain(x, plain)),
                }
            }
        })
    }

    /// Add the same constant to every slot.
    pub fn add_scalar(&self, a: &Ciphertext, w: u64) -> Result<Ciphertext, HeError> {
        self.check_scalar(w)?;
        match &a.body {
            Body::Sim { .. } => self.add_plain(a, &vec![w; self.params.slot_count]),
            Body::Rlwe(x) => {
                let la = log2_noise_from_budget(a.noise_budget);
                Ok(Ciphertext {
                    level: a.level,
                    noise_budget: self.rlwe_budget(|nb| nb.add_plain(la), &[a.noise_budget]),
                    body: Body::Rlwe(self.rlwe().unwrap().add_scalar(x, w)),
                })
            }
        }
    }

    /// Multiply every slot by the same constant. Consumes noise, not a level.
    pub fn mul_scalar(&self, a: &Ciphertext, w: u64) -> Result<Ciphertext, HeError> {
        self.check_scalar(w)?;
        let m = &self.pm;
        Ok(match &a.body {
            Body::Sim { slots, key_id, nonce } => Ciphertext {
                level: a.level,
                noise_budget: a.noise_budget - self.noise.mul_plain,
                body: Body::Sim { slots: self.sim_map(slots, |_, v| m.mul(v, w)), key_id: *key_id, nonce: *nonce },
            },
            Body::Rlwe(x) => {
                let ctx = self.rlwe().unwrap();
                let la = log2_noise_from_budget(a.noise_budget);
                let abs = ctx.centered(w).unsigned_abs();
                Ciphertext {
                    level: a.level,
                    noise_budget: self.rlwe_budget(|nb| nb.mul_scalar(la, abs), &[a.noise_budget]),
                    body: Body::Rlwe(ctx.mul_scalar(x, w)),
                }
            }
        })
    }

    /// Slot-wise product with a plaintext vector (zero-padded). Consumes noise, not a level.
    pub fn mul_plain(&self, a: &Ciphertext, plain: &[u64]) -> Result<Ciphertext, HeError> {
        self.check_plain(plain)?;
        let m = &self.pm;
        Ok(match &a.body {
            Body::Sim { slots, key_id, nonce } => Ciphertext {
                level: a.level,
                noise_budget: a.noise_budget - self.noise.mul_plain,
                body: Body::Sim {
                    slots: self.sim_map(slots, |i, v| m.mul(v, plain.get(i).copied().unwrap_or(0))),
                    key_id: *key_id,
                    nonce: *nonce,
                },
            },
            Body::Rlwe(x) => {
                let full = self.padded(plain);
                if full.iter().all(|&v| v == full[0]) {
                    return self.mul_scalar(a, full[0]);
                }
                let la = log2_noise_from_budget(a.noise_budget);
                Ciphertext {
                    level: a.level,
                    noise_budget: self.rlwe_budget(|nb| nb.mul_plain(la), &[a.noise_budget]),
                    body: Body::Rlwe(self.rlwe().unwrap().mul_plain(x, &full)),
                }
            }
        })
    }

    /// Ciphertext product with relinearization. Result level is min(level) - 1.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext, ek: &EvalKey) -> Result<Ciphertext, HeError> {
        self.same_key(a, b)?;
        let level = a.level.min(b.level);
        if level == 0 {
            return Err(HeError::LevelExhausted { level: 0, needed: 1 });
        }
        let m = &self.pm;
        Ok(match (&a.body, &b.body, &ek.inner) {
            (Body::Sim { slots: x, key_id, nonce }, Body::Sim { slots: y, nonce: nb, .. }, EvalInner::Sim { key_id: ek_id }) => {
                if ek_id != key_id {
                    return Err(HeError::KeyMismatch("evaluation key belongs to a different key set".into()));
                }
                Ciphertext {
                    level: level - 1,
                    noise_budget: a.noise_budget.min(b.noise_budget) - self.noise.mul,
                    body: Body::Sim {
                        slots: self.sim_map(x, |i, v| m.mul(v, y[i])),
                        key_id: *key_id,
                        nonce: nonce.rotate_left(7) ^ nb,
                    },
                }
            }
            (Body::Rlwe(x), Body::Rlwe(y), EvalInner::Rlwe(ek)) => {
                let ctx = self.rlwe().unwrap();
                let (la, lb) = (log2_noise_from_budget(a.noise_budget), log2_noise_from_budget(b.noise_budget));
                Ciphertext {
                    level: level - 1,
                    noise_budget: self.rlwe_budget(|nb| nb.mul(la, lb), &[a.noise_budget, b.noise_budget]),
                    body: Body::Rlwe(ctx.mul(x, y, ek)),
                }
            }
            _ => return Err(HeError::ParamsMismatch("evaluation key backend".into())),
        })
    }

    /// Σ w_i·ct_i (+ bias in every slot), fused so only one reduction happens per slot.
    pub fn dot(&self, cts: &[&Ciphertext], weights: &[u64], bias: Option<u64>) -> Result<Ciphertext, HeError> {
        if cts.is_empty() || cts.len() != weights.len() {
            return Err(HeError::ParamsMismatch(format!("{} ciphertexts, {} weights", cts.len(), weights.len())));
        }
        for &w in weights.iter().chain(bias.iter()) {
            self.check_scalar(w)?;
        }
        for c in &cts[1..] {
            self.same_key(cts[0], c)?;
        }
        let level = cts.iter().map(|c| c.level).min().unwrap();
        let budgets: Vec<f64> = cts.iter().map(|c| c.noise_budget).collect();
        match &cts[0].body {
            Body::Sim { key_id, nonce, .. } => {
                let p = self.params.p as u128;
                let mut acc = vec![0u128; self.params.slot_count];
                for (c, &w) in cts.iter().zip(weights) {
                    if w == 0 {
                        continue;
                    }
                    let Body::Sim { slots, .. } = &c.body else { unreachable!() };
                    for (a, &x) in acc.iter_mut().zip(slots) {
                        *a += x as u128 * w as u128;
                        // Keep well inside u128 regardless of term count.
                        if *a >= 1u128 << 125 {
                            *a %= p;
                        }
                    }
                }
                let b = bias.unwrap_or(0) as u128;
                let slots = acc.into_iter().map(|a| ((a + b) % p) as u64).collect();
                let terms = cts.len() + bias.is_some() as usize;
                let adds = (usize::BITS - (terms.max(1) - 1).leading_zeros()) as f64;
                let min = budgets.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(Ciphertext {
                    level,
                    noise_budget: min - self.noise.mul_plain - adds * self.noise.add,
                    body: Body::Sim { slots, key_id: *key_id, nonce: *nonce },
                })
            }
            Body::Rlwe(_) => {
                let ctx = self.rlwe().unwrap();
                let parts: Vec<&crate::rlwe::RlweCt> = cts
                    .iter()
                    .map(|c| match &c.body {
                        Body::Rlwe(x) => x,
                        _ => unreachable!(),
                    })
                    .collect();
                let mut lv = f64::NEG_INFINITY;
                for (c, &w) in cts.iter().zip(weights) {
                    if w != 0 {
                        let l = log2_noise_from_budget(c.noise_budget) + (ctx.centered(w).unsigned_abs() as f64).log2();
                        lv = log2_add(lv, l);
                    }
                }
                let bounds = ctx.bounds();
                if bias.is_some() {
                    lv = bounds.add_plain(lv);
                }
                let budget = if lv == f64::NEG_INFINITY { f64::INFINITY } else { budget_from_log2_noise(lv) };
                Ok(Ciphertext {
                    level,
                    noise_budget: self.settle(budget, &budgets),
                    body: Body::Rlwe(ctx.dot(&parts, weights, bias)),
                })
            }
        }
    }

    /// Rotate slots left by `steps` (simulator only).
    pub fn rotate(&self, a: &Ciphertext, steps: i64) -> Result<Ciphertext, HeError> {
        match &a.body {
            Body::Sim { slots, key_id, nonce } => {
                let n = slots.len() as i64;
                let s = steps.rem_euclid(n) as usize;
                let mut out = slots.clone();
                out.rotate_left(s);
                Ok(Ciphertext {
                    level: a.level,
                    noise_budget: a.noise_budget - self.noise.rotate,
                    body: Body::Sim { slots: out, key_id: *key_id, nonce: *nonce },
                })
            }
            Body::Rlwe(_) => Err(HeError::Unsupported("slot rotation needs Galois keys".into())),
        }
    }

    /// Evaluate Σ c_k·x^k slot-wise, coefficients in [0, p). Powers come from a balanced tree
    /// x^k = x^(2^j)·x^(k-2^j), so the depth is ceil(log2 d).
    pub fn eval_poly(&self, ct: &Ciphertext, coeffs: &[u64], ek: &EvalKey) -> Result<Ciphertext, HeError> {
        for &c in coeffs {
            self.check_scalar(c)?;
        }
        let degree = coeffs.iter().rposition(|&c| c != 0).unwrap_or(0);
        let needed = poly_depth(degree);
        if needed > ct.level {
            return Err(HeError::LevelExhausted { level: ct.level, needed });
        }
        let mut powers: HashMap<usize, Ciphertext> = HashMap::new();
        powers.insert(1, ct.clone());
        let mut acc: Option<Ciphertext> = None;
        for (k, &c) in coeffs.iter().enumerate().skip(1) {
            if c == 0 {
                continue;
            }
            let term = self.mul_scalar(&self.power(k, &mut powers, ek)?, c)?;
            acc = Some(match acc {
                None => term,
                Some(a) => self.add(&a, &term)?,
            });
        }
        let acc = match acc {
            Some(a) => a,
            None => self.mul_scalar(ct, 0)?,
        };
        match coeffs.first() {
            Some(&c0) if c0 != 0 => self.add_scalar(&acc, c0),
            _ => Ok(acc),
        }
    }

    fn power(&self, k: usize, memo: &mut HashMap<usize, Ciphertext>, ek: &EvalKey) -> Result<Ciphertext, HeError> {
        if let Some(c) = memo.get(&k) {
            return Ok(c.clone());
        }
        let high = if k.is_power_of_two() { k / 2 } else { 1 << (usize::BITS - 1 - k.leading_zeros()) };
        let a = self.power(high, memo, ek)?;
        let b = self.power(k - high, memo, ek)?;
        let out = self.mul(&a, &b, ek)?;
        memo.insert(k, out.clone());
        Ok(out)
    }
}

//! Arithmetic back-ends for the layer code: plaintext slot vectors or ciphertexts.

use hecnn_he::arith::Modulus;
use hecnn_he::{Ciphertext, EvalKey, HeContext, HeError, PublicKey, SecretKey};
use rand::RngCore;

use crate::tensor::Tensor;

/// The operations a CNN layer needs. Every element carries a whole batch in its slots.
pub trait Engine {
    type Elem: Clone;

    /// Σ ws[i]·xs[i] + bias, weights and bias in [0, p).
    fn dot(&self, xs: &[&Self::Elem], ws: &[u64], bias: u64) -> Result<Self::Elem, HeError>;

    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem, HeError>;

    /// Σ xs[i] by a balanced tree of additions.
    fn sum(&self, xs: &[&Self::Elem]) -> Result<Self::Elem, HeError> {
        assert!(!xs.is_empty());
        let mut layer: Vec<Self::Elem> = xs.iter().map(|&x| x.clone()).collect();
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            for pair in layer.chunks(2) {
                next.push(match pair {
                    [a, b] => self.add(a, b)?,
                    [a] => a.clone(),
                    _ => unreachable!(),
                });
            }
            layer = next;
        }
        Ok(layer.pop().unwrap())
    }

    /// Σ coeffs[k]·x^k slot-wise.
    fn poly(&self, x: &Self::Elem, coeffs: &[u64]) -> Result<Self::Elem, HeError>;

    /// Fails when an element can no longer be decrypted correctly.
    fn check(&self, _x: &Self::Elem) -> Result<(), HeError> {
        Ok(())
    }

    /// Remaining noise budget in bits, when the engine tracks one.
    fn budget(&self, _x: &Self::Elem) -> Option<f64> {
        None
    }
}

/// Plaintext arithmetic mod p on slot vectors.
#[derive(Debug, Clone)]
pub struct PlainEngine {
    m: Modulus,
}

impl PlainEngine {
    pub fn new(p: u64) -> Self {
        Self { m: Modulus::new(p) }
    }

    pub fn p(&self) -> u64 {
        self.m.value()
    }
}

impl Engine for PlainEngine {
    type Elem = Vec<u64>;

    fn dot(&self, xs: &[&Vec<u64>], ws: &[u64], bias: u64) -> Result<Vec<u64>, HeError> {
        let len = xs.first().map_or(0, |x| x.len());
        let p = self.m.value();
        // Exact u64 accumulation when every partial sum provably fits.
        let fits = (p as u128 - 1) * (p as u128 - 1) * (xs.len() as u128 + 1) < u64::MAX as u128;
        if fits {
            let mut acc = vec![bias; len];
            for (x, &w) in xs.iter().zip(ws) {
                if w == 0 {
                    continue;
                }
                for (a, &v) in acc.iter_mut().zip(x.iter()) {
                    *a += v * w;
                }
            }
            Ok(acc.into_iter().map(|a| a % p).collect())
        } else {
            let mut acc = vec![bias as u128; len];
            for (x, &w) in xs.iter().zip(ws) {
                if w == 0 {
                    continue;
                }
                for (a, &v) in acc.iter_mut().zip(x.iter()) {
                    *a += v as u128 * w as u128;
                    if *a >= 1 << 125 {
                        *a %= p as u128;
                    }
                }
            }
            Ok(acc.into_iter().map(|a| self.m.reduce_u128(a % p as u128)).collect())
        }
    }

    fn add(&self, a: &Vec<u64>, b: &Vec<u64>) -> Result<Vec<u64>, HeError> {
        Ok(a.iter().zip(b).map(|(&x, &y)| self.m.add(x, y)).collect())
    }

    fn sum(&self, xs: &[&Vec<u64>]) -> Result<Vec<u64>, HeError> {
        let mut acc = xs[0].clone();
        for x in &xs[1..] {
            for (a, &v) in acc.iter_mut().zip(x.iter()) {
                *a = self.m.add(*a, v);
            }
        }
        Ok(acc)
    }

    fn poly(&self, x: &Vec<u64>, coeffs: &[u64]) -> Result<Vec<u64>, HeError> {
        Ok(x.iter().map(|&v| coeffs.iter().rev().fold(0, |acc, &c| self.m.add(self.m.mul(acc, v), c))).collect())
    }
}

/// Encrypted arithmetic through an HE context and its evaluation key.
pub struct HeEngine<'a> {
    pub ctx: &'a HeContext,
    pub ek: &'a EvalKey,
}

impl<'a> HeEngine<'a> {
    pub fn new(ctx: &'a HeContext, ek: &'a EvalKey) -> Self {
        Self { ctx, ek }
    }
}

impl Engine for HeEngine<'_> {
    type Elem = Ciphertext;

    fn dot(&self, xs: &[&Ciphertext], ws: &[u64], bias: u64) -> Result<Ciphertext, HeError> {
        self.ctx.dot(xs, ws, Some(bias))
    }

    fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.ctx.add(a, b)
    }

    fn poly(&self, x: &Ciphertext, coeffs: &[u64]) -> Result<Ciphertext, HeError> {
        self.ctx.eval_poly(x, coeffs, self.ek)
    }

    fn check(&self, x: &Ciphertext) -> Result<(), HeError> {
        if x.noise_budget() <= 0.0 {
            return Err(HeError::NoiseExhausted { budget: x.noise_budget() });
        }
        Ok(())
    }

    fn budget(&self, x: &Ciphertext) -> Option<f64> {
        Some(x.noise_budget())
    }
}

/// Encrypt every slot vector of a packed tensor.
pub fn encrypt_tensor<R: RngCore + ?Sized>(
    ctx: &HeContext,
    pk: &PublicKey,
    t: &Tensor<Vec<u64>>,
    rng: &mut R,
) -> Result<Tensor<Ciphertext>, HeError> {
    let data = t.data.iter().map(|v| ctx.encrypt(pk, v, rng)).collect::<Result<_, _>>()?;
    Ok(Tensor::new(t.shape.clone(), data))
}

pub fn decrypt_tensor(ctx: &HeContext, sk: &SecretKey, t: &Tensor<Ciphertext>) -> Result<Tensor<Vec<u64>>, HeError> {
    let data = t.data.iter().map(|c| ctx.decrypt(sk, c)).collect::<Result<_, _>>()?;
    Ok(Tensor::new(t.shape.clone(), data))
}

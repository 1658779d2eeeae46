//! Binary encodings of ciphertexts and keys.

use crate::ciphertext::{Body, Ciphertext, CT_MAGIC, CT_VERSION};
use crate::context::HeContext;
use crate::error::HeError;
use crate::keys::*;
use crate::params::Backend;
use crate::rlwe::{RlweCt, RlweEval, RlwePublic};
use crate::wire::{Reader, Writer};

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(CT_MAGIC);
        w.u8(self.backend().id());
        w.u16(CT_VERSION);
        w.u32(self.level);
        w.f64(self.noise_budget);
        match &self.body {
            Body::Sim { slots, key_id, nonce } => w.components(&[slots, &[*key_id, *nonce]]),
            Body::Rlwe(ct) => w.components(&[&ct.c0, &ct.c1]),
        }
        w.finish()
    }
}

fn key_header(backend: Backend, kind: KeyKind) -> Writer {
    let mut w = Writer::new(KEY_MAGIC);
    w.u8(backend.id());
    w.u8(kind as u8);
    w.u16(KEY_VERSION);
    w
}

impl SecretKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let fp = fingerprint_words(&self.public_fingerprint);
        match &self.inner {
            SecretInner::Sim { secret } => {
                let mut w = key_header(Backend::Simulator, KeyKind::Secret);
                let words: Vec<u64> = secret.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
                w.components(&[&words, &fp]);
                w.finish()
            }
            SecretInner::Rlwe(sk) => {
                let mut w = key_header(Backend::Rlwe, KeyKind::Secret);
                let s: Vec<u64> = sk.s.iter().map(|&x| if x < 0 { 2 } else { x as u64 }).collect();
                w.components(&[&s, &fp]);
                w.finish()
            }
        }
    }
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        match &self.inner {
            PublicInner::Sim { key_id } => {
                let mut w = key_header(Backend::Simulator, KeyKind::Public);
                w.components(&[&[*key_id]]);
                w.finish()
            }
            PublicInner::Rlwe(pk) => {
                let mut w = key_header(Backend::Rlwe, KeyKind::Public);
                w.components(&[&pk.b, &pk.a]);
                w.finish()
            }
        }
    }
}

impl EvalKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        match &self.inner {
            EvalInner::Sim { key_id } => {
                let mut w = key_header(Backend::Simulator, KeyKind::Eval);
                w.components(&[&[*key_id]]);
                w.finish()
            }
            EvalInner::Rlwe(ek) => {
                let mut w = key_header(Backend::Rlwe, KeyKind::Eval);
                let comps: Vec<&[u64]> = ek.parts.iter().flat_map(|(b, a)| [b.as_slice(), a.as_slice()]).collect();
                w.components(&comps);
                w.finish()
            }
        }
    }
}

impl HeContext {
    fn open_key<'a>(&self, bytes: &'a [u8], kind: KeyKind) -> Result<(Reader<'a>, Vec<Vec<u64>>), HeError> {
        let mut r = Reader::new(bytes, KEY_MAGIC)?;
        let backend = r.u8()?;
        if Backend::from_id(backend) != Some(self.params().backend) {
            return Err(HeError::ParamsMismatch(format!("key backend id {backend}")));
        }
        let k = r.u8()?;
        if k != kind as u8 {
            return Err(HeError::Decode(format!("key kind {k}, expected {}", kind as u8)));
        }
        let v = r.u16()?;
        if v != KEY_VERSION {
            return Err(HeError::Decode(format!("unsupported key version {v}")));
        }
        let comps = r.components()?;
        Ok((r, comps))
    }

    pub fn secret_key_from_bytes(&self, bytes: &[u8]) -> Result<SecretKey, HeError> {
        let (r, comps) = self.open_key(bytes, KeyKind::Secret)?;
        r.finish()?;
        let [body, fp] = comps.as_slice() else {
            return Err(HeError::Decode("secret key needs 2 components".into()));
        };
        let public_fingerprint =
            fingerprint_from_words(fp).ok_or_else(|| HeError::Decode("bad fingerprint".into()))?;
        let inner = match self.rlwe() {
            None => {
                let secret = fingerprint_from_words(body).ok_or_else(|| HeError::Decode("bad secret".into()))?;
                SecretInner::Sim { secret }
            }
            Some(ctx) => {
                if body.len() != ctx.n() || body.iter().any(|&x| x > 2) {
                    return Err(HeError::Decode("secret must be n ternary words".into()));
                }
                let s = body.iter().map(|&x| if x == 2 { -1 } else { x as i8 }).collect();
                SecretInner::Rlwe(ctx.secret_from_coeffs(s))
            }
        };
        Ok(SecretKey { inner, public_fingerprint })
    }

    pub fn public_key_from_bytes(&self, bytes: &[u8]) -> Result<PublicKey, HeError> {
        let (r, comps) = self.open_key(bytes, KeyKind::Public)?;
        r.finish()?;
        let inner = match (self.rlwe(), comps.as_slice()) {
            (None, [id]) if id.len() == 1 => PublicInner::Sim { key_id: id[0] },
            (Some(ctx), [b, a]) => {
                ctx.check_poly(b)?;
                ctx.check_poly(a)?;
                PublicInner::Rlwe(RlwePublic { b: b.clone(), a: a.clone() })
            }
            _ => return Err(HeError::Decode("public key has wrong shape".into())),
        };
        Ok(PublicKey { inner })
    }

    pub fn eval_key_from_bytes(&self, bytes: &[u8]) -> Result<EvalKey, HeError> {
        let (r, comps) = self.open_key(bytes, KeyKind::Eval)?;
        r.finish()?;
        let inner = match (self.rlwe(), comps.as_slice()) {
            (None, [id]) if id.len() == 1 => EvalInner::Sim { key_id: id[0] },
            (Some(ctx), parts) if parts.len() == 2 * ctx.words() => {
                for p in parts {
                    ctx.check_poly(p)?;
                }
                let parts = parts.chunks_exact(2).map(|c| (c[0].clone(), c[1].clone())).collect();
                EvalInner::Rlwe(RlweEval { parts })
            }
            _ => return Err(HeError::Decode("evaluation key has wrong shape".into())),
        };
        Ok(EvalKey { inner })
    }

    pub fn serialize_ct(&self, ct: &Ciphertext) -> Vec<u8> {
        ct.to_bytes()
    }

    pub fn deserialize_ct(&self, bytes: &[u8]) -> Result<Ciphertext, HeError> {
        let mut r = Reader::new(bytes, CT_MAGIC)?;
        let backend = r.u8()?;
        if Backend::from_id(backend) != Some(self.params().backend) {
            return Err(HeError::ParamsMismatch(format!("ciphertext backend id {backend}")));
        }
        let v = r.u16()?;
        if v != CT_VERSION {
            return Err(HeError::Decode(format!("unsupported ciphertext version {v}")));
        }
        let level = r.u32()?;
        if level > self.params().levels {
            return Err(HeError::Decode(format!("level {level} exceeds L = {}", self.params().levels)));
        }
        let noise_budget = r.f64()?;
        if noise_budget.is_nan() {
            return Err(HeError::Decode("noise budget is NaN".into()));
        }
        let comps = r.components()?;
        r.finish()?;
        let body = match (self.rlwe(), comps.as_slice()) {
            (None, [slots, meta]) if meta.len() == 2 => {
                if slots.len() != self.params().slot_count {
                    return Err(HeError::Decode(format!("{} slots, expected {}", slots.len(), self.params().slot_count)));
                }
                if slots.iter().any(|&x| x >= self.params().p) {
                    return Err(HeError::Decode("slot not reduced mod p".into()));
                }
                Body::Sim { slots: slots.clone(), key_id: meta[0], nonce: meta[1] }
            }
            (Some(ctx), [c0, c1]) => {
                ctx.check_poly(c0)?;
                ctx.check_poly(c1)?;
                Body::Rlwe(RlweCt { c0: c0.clone(), c1: c1.clone() })
            }
            _ => return Err(HeError::Decode("ciphertext has wrong component layout".into())),
        };
        Ok(Ciphertext { level, noise_budget, body })
    }
}

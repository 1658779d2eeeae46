//! Scale-invariant leveled RLWE backend over Z_q[x]/(x^n + 1), q an RNS product of
//! 60-bit NTT primes. Ciphertext polynomials are kept in coefficient form, prime-major.
//!
//! Multiplication tensors in an extended basis q ∪ aux large enough to hold the exact
//! integer product, divides by Q/p with rounding entirely in RNS, then relinearizes with
//! one key component per RNS prime.

use rand::{Rng, RngCore};

use crate::arith::{ntt_primes, Modulus, ShoupConst};
use crate::error::HeError;
use crate::ntt::NttTable;
use crate::params::HeParams;
use crate::rns::{BaseConverter, RnsBasis};

pub(crate) const WORD_BITS: u32 = 60;
const CBD_ETA: u32 = 21;
/// Standard deviation of the centered binomial distribution with eta = 21.
const SIGMA: f64 = 3.2403703492039302;
/// Tail multiplier used by the analytic bounds.
const TAIL: f64 = 10.0;
/// Bits of headroom reserved for plaintext-weighted linear layers when sizing q.
const LINEAR_ALLOWANCE_MULTIPLES: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RlweCt {
    pub c0: Vec<u64>,
    pub c1: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RlweSecret {
    pub s: Vec<i8>,
    pub s_ntt: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RlwePublic {
    pub b: Vec<u64>,
    pub a: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RlweEval {
    /// One (b_i, a_i) pair per RNS prime, NTT form.
    pub parts: Vec<(Vec<u64>, Vec<u64>)>,
}

#[derive(Debug)]
pub(crate) struct RlweContext {
    n: usize,
    p: Modulus,
    plain_ntt: NttTable,
    q: RnsBasis,
    q_ntt: Vec<NttTable>,
    aux: RnsBasis,
    aux_ntt: Vec<NttTable>,
    q_to_aux: BaseConverter,
    aux_to_q: BaseConverter,
    delta: Vec<ShoupConst>,
    p_mod_aux: Vec<ShoupConst>,
    q_inv_mod_aux: Vec<ShoupConst>,
    half_q_mod_aux: Vec<u64>,
    log2_q: f64,
}

/// log2(2^a + 2^b) without overflow.
pub(crate) fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (1.0 + (lo - hi).exp2()).log2()
}

/// Analytic noise growth, in log2 of the invariant noise v (decryption correct while v < 1/2).
#[derive(Debug, Clone, Copy)]
pub(crate) struct NoiseBounds {
    n: f64,
    p: f64,
    log2_q: f64,
    k: f64,
    log2_qmax: f64,
}

impl NoiseBounds {
    pub fn new(n: usize, p: u64, log2_q: f64, k: usize) -> Self {
        Self { n: n as f64, p: p as f64, log2_q, k: k as f64, log2_qmax: WORD_BITS as f64 }
    }

    pub fn fresh(&self) -> f64 {
        let b = TAIL * SIGMA * (4.0 * self.n / 3.0 + 1.0).sqrt();
        (self.p * b + self.p * self.p).log2() - self.log2_q
    }

    pub fn add(&self, a: f64, b: f64) -> f64 {
        log2_add(a, b)
    }

    pub fn add_plain(&self, a: f64) -> f64 {
        log2_add(a, 2.0 * self.p.log2() - self.log2_q)
    }

    pub fn mul_scalar(&self, a: f64, abs_w: u64) -> f64 {
        a + (abs_w.max(1) as f64).log2()
    }

    pub fn mul_plain(&self, a: f64) -> f64 {
        a + (self.n * self.p / 2.0).log2()
    }

    pub fn mul(&self, a: f64, b: f64) -> f64 {
        // Cross terms v_i * p * K_j where K_j = ([c0 + c1 s]_Q - x)/Q has coefficients of order
        // sqrt(n); the product with v spans n terms.
        let cross = log2_add(a, b) + (self.p * TAIL * self.n * self.n.sqrt()).log2();
        let quad = a + b;
        let relin = (self.p * self.k * self.n * TAIL * SIGMA).log2() + self.log2_qmax - self.log2_q;
        let round = (self.p * self.n * self.n).log2() - self.log2_q;
        log2_add(log2_add(cross, quad), log2_add(relin, round))
    }

    /// Invariant-noise log2 after a fresh encryption, a linear allowance and `levels` squarings.
    pub fn after_circuit(&self, levels: u32) -> f64 {
        let allowance = LINEAR_ALLOWANCE_MULTIPLES * (self.n * self.p).log2() + 8.0;
        let mut v = self.fresh() + allowance;
        for _ in 0..levels {
            v = self.mul(v, v);
        }
        v
    }
}

/// Budget in bits from log2 of the invariant noise.
pub(crate) fn budget_from_log2_noise(lv: f64) -> f64 {
    -(lv + 1.0)
}

pub(crate) fn log2_noise_from_budget(budget: f64) -> f64 {
    -budget - 1.0
}

/// Smallest number of 60-bit words that supports `levels` multiplications.
pub(crate) fn required_words(n: usize, p: u64, levels: u32) -> usize {
    (1..=64)
        .find(|&k| {
            let bounds = NoiseBounds::new(n, p, k as f64 * (WORD_BITS as f64 - 0.01), k);
            bounds.after_circuit(levels) < -2.0
        })
        .expect("level count too large for any supported modulus")
}

fn sample_uniform<R: RngCore + ?Sized>(rng: &mut R, q: u64) -> u64 {
    loop {
        let x = rng.next_u64() >> 4;
        if x < q {
            return x;
        }
    }
}

fn sample_cbd<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> Vec<i64> {
    let mask = (1u64 << CBD_ETA) - 1;
    (0..n)
        .map(|_| {
            let r = rng.next_u64();
            (r & mask).count_ones() as i64 - ((r >> CBD_ETA) & mask).count_ones() as i64
        })
        .collect()
}

fn sample_ternary<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> Vec<i8> {
    (0..n).map(|_| rng.random_range(-1i8..=1)).collect()
}

impl RlweContext {
    pub fn new(params: &HeParams) -> Result<Self, HeError> {
        params.validate()?;
        let n = params.n;
        let needed = required_words(n, params.p, params.levels);
        if needed > crate::params::MAX_MODULUS_WORDS {
            return Err(HeError::Capacity(format!(
                "L = {} at p = {}, n = {n} needs {needed} modulus words; the limit is {}",
                params.levels,
                params.p,
                crate::params::MAX_MODULUS_WORDS
            )));
        }
        let k = match params.modulus_words {
            None => needed,
            Some(w) if w >= needed => w,
            Some(w) => {
                return Err(HeError::Capacity(format!(
                    "{w} modulus words ({} bits) cannot carry L = {} at p = {}, n = {}; need {needed}",
                    w as u32 * WORD_BITS,
                    params.levels,
                    params.p,
                    n
                )))
            }
        };
        // The extended basis must hold p·n·Q^2 exactly: aux carries Q plus the p·n factor.
        let extra_bits = 64 - params.p.leading_zeros() + n.trailing_zeros() + 3;
        let extra = extra_bits.div_ceil(WORD_BITS - 1) as usize;
        let all = ntt_primes(WORD_BITS, 2 * n as u64, 2 * k + extra, &[params.p]);
        let (qp, ap) = all.split_at(k);
        let q = RnsBasis::new(qp);
        let aux = RnsBasis::new(ap);
        let p = Modulus::new(params.p);
        let q_to_aux = BaseConverter::new(&q, ap);
        let aux_to_q = BaseConverter::new(&aux, qp);
        // floor(Q/p) mod q_i = -(Q mod p) * p^{-1} mod q_i
        let q_mod_p = q.product_mod(&p);
        let delta = q
            .moduli()
            .iter()
            .map(|m| m.shoup(m.mul(m.neg(m.reduce(q_mod_p)), m.inv(params.p))))
            .collect();
        let mut p_mod_aux = Vec::new();
        let mut q_inv_mod_aux = Vec::new();
        let mut half_q_mod_aux = Vec::new();
        let mut half_digits = vec![0u64; k];
        q.digits(q.half(), &mut half_digits);
        let mut tmp = vec![0u64; aux.len()];
        BaseConverter::new(&q, ap).from_digits(&half_digits, &mut tmp);
        for (t, m) in aux.moduli().iter().enumerate() {
            p_mod_aux.push(m.shoup(params.p));
            q_inv_mod_aux.push(m.shoup(m.inv(q.product_mod(m))));
            half_q_mod_aux.push(tmp[t]);
        }
        Ok(Self {
            n,
            p,
            plain_ntt: NttTable::new(n, params.p),
            q_ntt: qp.iter().map(|&r| NttTable::new(n, r)).collect(),
            aux_ntt: ap.iter().map(|&r| NttTable::new(n, r)).collect(),
            log2_q: q.log2_product(),
            q,
            aux,
            q_to_aux,
            aux_to_q,
            delta,
            p_mod_aux,
            q_inv_mod_aux,
            half_q_mod_aux,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn words(&self) -> usize {
        self.q.len()
    }

    pub fn q_primes(&self) -> Vec<u64> {
        self.q.primes()
    }

    pub fn log2_q(&self) -> f64 {
        self.log2_q
    }

    pub fn bounds(&self) -> NoiseBounds {
        NoiseBounds::new(self.n, self.p.value(), self.log2_q, self.q.len())
    }

    fn poly_len(&self) -> usize {
        self.q.len() * self.n
    }

    fn ntt_q(&self, a: &mut [u64]) {
        for (i, t) in self.q_ntt.iter().enumerate() {
            t.forward(&mut a[i * self.n..(i + 1) * self.n]);
        }
    }

    fn intt_q(&self, a: &mut [u64]) {
        for (i, t) in self.q_ntt.iter().enumerate() {
            t.inverse(&mut a[i * self.n..(i + 1) * self.n]);
        }
    }

    fn lift_small<T: Copy + Into<i64>>(&self, v: &[T]) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.poly_len());
        for m in self.q.moduli() {
            out.extend(v.iter().map(|&x| m.from_i64(x.into())));
        }
        out
    }

    fn pointwise(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; a.len()];
        for (i, m) in self.q.moduli().iter().enumerate() {
            let r = i * self.n..(i + 1) * self.n;
            for ((o, &x), &y) in out[r.clone()].iter_mut().zip(&a[r.clone()]).zip(&b[r]) {
                *o = m.mul(x, y);
            }
        }
        out
    }

    fn add_assign(&self, a: &mut [u64], b: &[u64]) {
        for (i, m) in self.q.moduli().iter().enumerate() {
            let r = i * self.n..(i + 1) * self.n;
            for (x, &y) in a[r.clone()].iter_mut().zip(&b[r]) {
                *x = m.add(*x, y);
            }
        }
    }

    fn uniform_poly<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.poly_len());
        for m in self.q.moduli() {
            out.extend((0..self.n).map(|_| sample_uniform(rng, m.value())));
        }
        out
    }

    pub fn keygen<R: RngCore + ?Sized>(&self, rng: &mut R) -> (RlweSecret, RlwePublic, RlweEval) {
        let s = sample_ternary(rng, self.n);
        let mut s_ntt = self.lift_small(&s);
        self.ntt_q(&mut s_ntt);
        let a = self.uniform_poly(rng);
        let mut e = self.lift_small(&sample_cbd(rng, self.n));
        self.ntt_q(&mut e);
        let b = self.rlwe_sample(&a, &s_ntt, &e);
        let s2 = self.pointwise(&s_ntt, &s_ntt);
        let mut parts = Vec::with_capacity(self.q.len());
        for i in 0..self.q.len() {
            let ai = self.uniform_poly(rng);
            let mut ei = self.lift_small(&sample_cbd(rng, self.n));
            self.ntt_q(&mut ei);
            let mut bi = self.rlwe_sample(&ai, &s_ntt, &ei);
            let m = &self.q.moduli()[i];
            let r = i * self.n..(i + 1) * self.n;
            for (x, &y) in bi[r.clone()].iter_mut().zip(&s2[r]) {
                *x = m.add(*x, y);
            }
            parts.push((bi, ai));
        }
        (RlweSecret { s, s_ntt }, RlwePublic { b, a }, RlweEval { parts })
    }

    /// -a*s + e, all in NTT form.
    fn rlwe_sample(&self, a: &[u64], s_ntt: &[u64], e_ntt: &[u64]) -> Vec<u64> {
        let mut b = self.pointwise(a, s_ntt);
        for (i, m) in self.q.moduli().iter().enumerate() {
            let r = i * self.n..(i + 1) * self.n;
            for (x, &y) in b[r.clone()].iter_mut().zip(&e_ntt[r]) {
                *x = m.sub(y, *x);
            }
        }
        b
    }

    pub fn secret_from_coeffs(&self, s: Vec<i8>) -> RlweSecret {
        let mut s_ntt = self.lift_small(&s);
        self.ntt_q(&mut s_ntt);
        RlweSecret { s, s_ntt }
    }

    pub fn encode(&self, slots: &[u64]) -> Vec<u64> {
        let mut m = vec![0u64; self.n];
        m[..slots.len()].copy_from_slice(slots);
        self.plain_ntt.inverse(&mut m);
        m
    }

    pub fn decode(&self, coeffs: &[u64]) -> Vec<u64> {
        let mut m = coeffs.to_vec();
        self.plain_ntt.forward(&mut m);
        m
    }

    fn add_delta_m(&self, c0: &mut [u64], m: &[u64]) {
        for (i, md) in self.q.moduli().iter().enumerate() {
            let q = md.value();
            let d = self.delta[i];
            for (x, &mj) in c0[i * self.n..(i + 1) * self.n].iter_mut().zip(m) {
                *x = md.add(*x, d.mul(mj, q));
            }
        }
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, pk: &RlwePublic, slots: &[u64], rng: &mut R) -> RlweCt {
        let m = self.encode(slots);
        let mut u = self.lift_small(&sample_ternary(rng, self.n));
        self.ntt_q(&mut u);
        let mut c0 = self.pointwise(&pk.b, &u);
        let mut c1 = self.pointwise(&pk.a, &u);
        self.intt_q(&mut c0);
        self.intt_q(&mut c1);
        self.add_assign(&mut c0, &self.lift_small(&sample_cbd(rng, self.n)));
        self.add_assign(&mut c1, &self.lift_small(&sample_cbd(rng, self.n)));
        self.add_delta_m(&mut c0, &m);
        RlweCt { c0, c1 }
    }

    /// Returns the slots and the measured budget in bits.
    pub fn decrypt(&self, sk: &RlweSecret, ct: &RlweCt) -> (Vec<u64>, f64) {
        let n = self.n;
        let k = self.q.len();
        let mut x = ct.c1.clone();
        self.ntt_q(&mut x);
        let mut x = self.pointwise(&x, &sk.s_ntt);
        self.intt_q(&mut x);
        self.add_assign(&mut x, &ct.c0);

        let a0 = &self.aux.moduli()[0];
        let r0 = a0.value();
        let conv = &self.q_to_aux;
        let mut res = vec![0u64; k];
        let mut px = vec![0u64; k];
        let mut digits = vec![0u64; k];
        let mut scratch = vec![0u64; k];
        let mut aux_out = vec![0u64; self.aux.len()];
        let mut worst = f64::NEG_INFINITY;
        let mut m = vec![0u64; n];
        for j in 0..n {
            for (i, md) in self.q.moduli().iter().enumerate() {
                res[i] = x[i * n + j];
                px[i] = md.mul(res[i], self.p.value());
            }
            worst = worst.max(self.q.log2_centered_abs(&px, &mut scratch));
            // floor((p*x + H)/Q) with x the nonnegative representative, computed mod aux prime 0.
            self.q.digits(&res, &mut digits);
            conv.from_digits(&digits, &mut aux_out);
            let z_a = a0.add(self.p_mod_aux[0].mul(aux_out[0], r0), self.half_q_mod_aux[0]);
            for (i, md) in self.q.moduli().iter().enumerate() {
                px[i] = md.add(px[i], self.q.half()[i]);
            }
            self.q.digits(&px, &mut digits);
            conv.from_digits(&digits, &mut aux_out);
            let quotient = self.q_inv_mod_aux[0].mul(a0.sub(z_a, aux_out[0]), r0);
            m[j] = self.p.reduce(quotient);
        }
        let budget = self.log2_q - 1.0 - worst;
        (self.decode(&m), budget)
    }

    pub fn add(&self, a: &RlweCt, b: &RlweCt) -> RlweCt {
        let mut out = a.clone();
        self.add_assign(&mut out.c0, &b.c0);
        self.add_assign(&mut out.c1, &b.c1);
        out
    }

    pub fn add_plain(&self, a: &RlweCt, slots: &[u64]) -> RlweCt {
        let m = self.encode(slots);
        let mut out = a.clone();
        self.add_delta_m(&mut out.c0, &m);
        out
    }

    pub fn add_scalar(&self, a: &RlweCt, w: u64) -> RlweCt {
        let mut out = a.clone();
        let mut m = vec![0u64; self.n];
        m[0] = w;
        self.add_delta_m(&mut out.c0, &m);
        out
    }

    /// Multiply by a plaintext constant w in [0, p), using its centered representative.
    pub fn mul_scalar(&self, a: &RlweCt, w: u64) -> RlweCt {
        let wc = self.centered(w);
        let mut out = a.clone();
        for (i, md) in self.q.moduli().iter().enumerate() {
            let c = md.shoup(md.from_i64(wc));
            let q = md.value();
            for x in out.c0[i * self.n..(i + 1) * self.n].iter_mut() {
                *x = c.mul(*x, q);
            }
            for x in out.c1[i * self.n..(i + 1) * self.n].iter_mut() {
                *x = c.mul(*x, q);
            }
        }
        out
    }

    pub fn centered(&self, w: u64) -> i64 {
        let p = self.p.value();
        if w > p / 2 {
            w as i64 - p as i64
        } else {
            w as i64
        }
    }

    pub fn mul_plain(&self, a: &RlweCt, slots: &[u64]) -> RlweCt {
        let m = self.encode(slots);
        let centered: Vec<i64> = m.iter().map(|&x| self.centered(x)).collect();
        let mut mp = self.lift_small(&centered);
        self.ntt_q(&mut mp);
        let mut c0 = a.c0.clone();
        let mut c1 = a.c1.clone();
        self.ntt_q(&mut c0);
        self.ntt_q(&mut c1);
        let mut c0 = self.pointwise(&c0, &mp);
        let mut c1 = self.pointwise(&c1, &mp);
        self.intt_q(&mut c0);
        self.intt_q(&mut c1);
        RlweCt { c0, c1 }
    }

    /// Σ w_i·ct_i (+ bias) with centered weights and one reduction per coefficient.
    pub fn dot(&self, cts: &[&RlweCt], weights: &[u64], bias: Option<u64>) -> RlweCt {
        let n = self.n;
        let len = self.poly_len();
        let ws: Vec<i64> = weights.iter().map(|&w| self.centered(w)).collect();
        let mut out = RlweCt { c0: vec![0; len], c1: vec![0; len] };
        let mut pos = vec![0u128; n];
        let mut neg = vec![0u128; n];
        for (i, md) in self.q.moduli().iter().enumerate() {
            let r = i * n..(i + 1) * n;
            for comp in 0..2 {
                pos.iter_mut().for_each(|x| *x = 0);
                neg.iter_mut().for_each(|x| *x = 0);
                for (ct, &w) in cts.iter().zip(&ws) {
                    if w == 0 {
                        continue;
                    }
                    let src = if comp == 0 { &ct.c0[r.clone()] } else { &ct.c1[r.clone()] };
                    let acc = if w > 0 { &mut pos } else { &mut neg };
                    let wa = w.unsigned_abs() as u128;
                    for (a, &x) in acc.iter_mut().zip(src) {
                        *a += x as u128 * wa;
                    }
                }
                let dst = if comp == 0 { &mut out.c0[r.clone()] } else { &mut out.c1[r.clone()] };
                for ((d, &pp), &nn) in dst.iter_mut().zip(&pos).zip(&neg) {
                    *d = md.sub(md.reduce_u128(pp), md.reduce_u128(nn));
                }
            }
        }
        match bias {
            Some(b) if b != 0 => self.add_scalar(&out, b),
            _ => out,
        }
    }

    /// Extend a polynomial over q to q ∪ aux via the centered representative.
    fn extend(&self, poly: &[u64]) -> Vec<u64> {
        let n = self.n;
        let k = self.q.len();
        let m = self.aux.len();
        let mut out = vec![0u64; (k + m) * n];
        out[..k * n].copy_from_slice(poly);
        let mut shifted = vec![0u64; k];
        let mut digits = vec![0u64; k];
        let mut tgt = vec![0u64; m];
        for j in 0..n {
            for (i, md) in self.q.moduli().iter().enumerate() {
                shifted[i] = md.add(poly[i * n + j], self.q.half()[i]);
            }
            self.q.digits(&shifted, &mut digits);
            self.q_to_aux.centered_from_shifted_digits(&digits, &mut tgt);
            for (t, &v) in tgt.iter().enumerate() {
                out[(k + t) * n + j] = v;
            }
        }
        out
    }

    fn full_moduli(&self) -> impl Iterator<Item = (&Modulus, &NttTable)> {
        self.q.moduli().iter().chain(self.aux.moduli()).zip(self.q_ntt.iter().chain(&self.aux_ntt))
    }

    /// round(p·d/Q) for an exact integer polynomial d held over q ∪ aux, returned over q.
    fn scale_round(&self, d: &[u64]) -> Vec<u64> {
        let n = self.n;
        let k = self.q.len();
        let m = self.aux.len();
        let p = self.p.value();
        let mut out = vec![0u64; k * n];
        let mut zq = vec![0u64; k];
        let mut digits_q = vec![0u64; k];
        let mut rem_aux = vec![0u64; m];
        let mut y_aux = vec![0u64; m];
        let mut digits_aux = vec![0u64; m];
        let mut y_q = vec![0u64; k];
        for j in 0..n {
            // z = p·d + floor(Q/2); [z]_Q from the q residues.
            for (i, md) in self.q.moduli().iter().enumerate() {
                zq[i] = md.add(md.mul(d[i * n + j], p), self.q.half()[i]);
            }
            self.q.digits(&zq, &mut digits_q);
            self.q_to_aux.from_digits(&digits_q, &mut rem_aux);
            // y = (z - [z]_Q)/Q mod each aux prime, shifted by floor(P/2) for the centered lift back.
            for (t, md) in self.aux.moduli().iter().enumerate() {
                let r = md.value();
                let z = md.add(self.p_mod_aux[t].mul(d[(k + t) * n + j], r), self.half_q_mod_aux[t]);
                let y = self.q_inv_mod_aux[t].mul(md.sub(z, rem_aux[t]), r);
                y_aux[t] = md.add(y, self.aux.half()[t]);
            }
            self.aux.digits(&y_aux, &mut digits_aux);
            self.aux_to_q.centered_from_shifted_digits(&digits_aux, &mut y_q);
            for i in 0..k {
                out[i * n + j] = y_q[i];
            }
        }
        out
    }

    pub fn mul(&self, a: &RlweCt, b: &RlweCt, ek: &RlweEval) -> RlweCt {
        let n = self.n;
        let k = self.q.len();
        let mut polys = [&a.c0, &a.c1, &b.c0, &b.c1].map(|p| self.extend(p));
        for poly in polys.iter_mut() {
            for (i, (_, t)) in self.full_moduli().enumerate() {
                t.forward(&mut poly[i * n..(i + 1) * n]);
            }
        }
        let [a0, a1, b0, b1] = &polys;
        let total = a0.len();
        let (mut d0, mut d1, mut d2) = (vec![0u64; total], vec![0u64; total], vec![0u64; total]);
        for (i, (md, t)) in self.full_moduli().enumerate() {
            let r = i * n..(i + 1) * n;
            for j in r.clone() {
                d0[j] = md.mul(a0[j], b0[j]);
                d1[j] = md.add(md.mul(a0[j], b1[j]), md.mul(a1[j], b0[j]));
                d2[j] = md.mul(a1[j], b1[j]);
            }
            t.inverse(&mut d0[r.clone()]);
            t.inverse(&mut d1[r.clone()]);
            t.inverse(&mut d2[r]);
        }
        let mut c0 = self.scale_round(&d0);
        let mut c1 = self.scale_round(&d1);
        let d2 = self.scale_round(&d2);

        // Relinearize: d2 = Σ_i [d2]_{q_i}·g_i with g_i the CRT unit vector of prime i.
        let mut acc0 = vec![0u64; k * n];
        let mut acc1 = vec![0u64; k * n];
        let mut buf = vec![0u64; n];
        for (i, (kb, ka)) in ek.parts.iter().enumerate() {
            let digit = &d2[i * n..(i + 1) * n];
            for (t, md) in self.q.moduli().iter().enumerate() {
                let q = md.value();
                for (o, &x) in buf.iter_mut().zip(digit) {
                    *o = if x >= q { x - q } else { x };
                }
                self.q_ntt[t].forward(&mut buf);
                let r = t * n..(t + 1) * n;
                for (((o0, o1), &x), (&kb, &ka)) in acc0[r.clone()]
                    .iter_mut()
                    .zip(acc1[r.clone()].iter_mut())
                    .zip(&buf)
                    .zip(kb[r.clone()].iter().zip(&ka[r]))
                {
                    *o0 = md.add(*o0, md.mul(x, kb));
                    *o1 = md.add(*o1, md.mul(x, ka));
                }
            }
        }
        self.intt_q(&mut acc0);
        self.intt_q(&mut acc1);
        self.add_assign(&mut c0, &acc0);
        self.add_assign(&mut c1, &acc1);
        RlweCt { c0, c1 }
    }

    /// Every residue below its prime and lengths equal to k·n.
    pub fn check_poly(&self, poly: &[u64]) -> Result<(), HeError> {
        if poly.len() != self.poly_len() {
            return Err(HeError::Decode(format!(
                "polynomial has {} words, expected {}",
                poly.len(),
                self.poly_len()
            )));
        }
        for (i, md) in self.q.moduli().iter().enumerate() {
            if poly[i * self.n..(i + 1) * self.n].iter().any(|&x| x >= md.value()) {
                return Err(HeError::Decode("coefficient not reduced".into()));
            }
        }
        Ok(())
    }
}

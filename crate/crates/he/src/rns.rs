//! Residue-number-system bases and exact conversion between them via mixed-radix digits.

use crate::arith::{Modulus, ShoupConst};

/// A product of pairwise coprime word-sized primes.
#[derive(Debug, Clone)]
pub struct RnsBasis {
    moduli: Vec<Modulus>,
    /// inv[i][j] = q_j^{-1} mod q_i for j < i.
    inv: Vec<Vec<ShoupConst>>,
    /// floor(Q/2) residues.
    half: Vec<u64>,
    half_digits: Vec<u64>,
    log2_product: f64,
}

impl RnsBasis {
    /// All primes must lie in [2^59, 2^60) so mixed-radix digits need one conditional subtraction.
    pub fn new(primes: &[u64]) -> Self {
        assert!(!primes.is_empty());
        for &q in primes {
            assert!((1u64 << 59..1u64 << 60).contains(&q), "RNS primes must be 60-bit");
        }
        let moduli: Vec<Modulus> = primes.iter().map(|&q| Modulus::new(q)).collect();
        let inv = moduli
            .iter()
            .enumerate()
            .map(|(i, mi)| moduli[..i].iter().map(|mj| mi.shoup(mi.inv(mj.value()))).collect())
            .collect();
        // Q is odd, so floor(Q/2) = (Q-1)/2 = -2^{-1} mod each q_i, i.e. (q_i - 1)/2.
        let half = primes.iter().map(|&q| (q - 1) / 2).collect();
        let log2_product = primes.iter().map(|&q| (q as f64).log2()).sum();
        let mut basis = Self { moduli, inv, half, half_digits: Vec::new(), log2_product };
        let mut hd = vec![0u64; primes.len()];
        basis.digits(&basis.half, &mut hd);
        basis.half_digits = hd;
        basis
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn primes(&self) -> Vec<u64> {
        self.moduli.iter().map(|m| m.value()).collect()
    }

    pub fn half(&self) -> &[u64] {
        &self.half
    }

    pub fn log2_product(&self) -> f64 {
        self.log2_product
    }

    /// Product of the moduli reduced mod `target`.
    pub fn product_mod(&self, target: &Modulus) -> u64 {
        self.moduli.iter().fold(1 % target.value(), |acc, m| target.mul(acc, target.reduce(m.value())))
    }

    /// Mixed-radix digits a_i of the unique x in [0, Q) with the given residues:
    /// x = a_0 + a_1 q_0 + a_2 q_0 q_1 + ...
    #[inline]
    pub fn digits(&self, residues: &[u64], out: &mut [u64]) {
        for i in 0..self.moduli.len() {
            let m = &self.moduli[i];
            let q = m.value();
            let mut t = residues[i];
            for (j, c) in self.inv[i].iter().enumerate() {
                let mut a = out[j];
                if a >= q {
                    a -= q;
                }
                t = c.mul(m.sub(t, a), q);
            }
            out[i] = t;
        }
    }

    /// log2 of the centered magnitude |[x]_Q| for x in [0, Q) given by residues; -inf for zero.
    pub fn log2_centered_abs(&self, residues: &[u64], scratch: &mut [u64]) -> f64 {
        let k = self.len();
        self.digits(residues, scratch);
        // x > Q/2 iff its digits exceed those of floor(Q/2) lexicographically from the top.
        let mut negative = false;
        for i in (0..k).rev() {
            if scratch[i] != self.half_digits[i] {
                negative = scratch[i] > self.half_digits[i];
                break;
            }
        }
        if negative {
            let neg: Vec<u64> = residues.iter().zip(&self.moduli).map(|(&r, m)| m.neg(r)).collect();
            self.digits(&neg, scratch);
        }
        self.log2_from_digits(scratch)
    }

    fn log2_from_digits(&self, d: &[u64]) -> f64 {
        let Some(top) = (0..d.len()).rev().find(|&i| d[i] != 0) else {
            return f64::NEG_INFINITY;
        };
        let below: f64 = self.moduli[..top].iter().map(|m| (m.value() as f64).log2()).sum();
        let mut mant = d[top] as f64;
        if top > 0 {
            mant += d[top - 1] as f64 / self.moduli[top - 1].value() as f64;
        }
        mant.log2() + below
    }
}

/// Exact conversion from one basis to a set of target primes.
#[derive(Debug, Clone)]
pub struct BaseConverter {
    targets: Vec<Modulus>,
    /// weights[t][i] = (q_0 ... q_{i-1}) mod target t
    weights: Vec<Vec<ShoupConst>>,
    /// floor(Q/2) mod target t
    half_mod: Vec<u64>,
}

impl BaseConverter {
    pub fn new(from: &RnsBasis, targets: &[u64]) -> Self {
        let targets: Vec<Modulus> = targets.iter().map(|&r| Modulus::new(r)).collect();
        let mut weights = Vec::with_capacity(targets.len());
        let half_digits = &from.half_digits;
        let mut half_mod = Vec::with_capacity(targets.len());
        for t in &targets {
            let mut w = Vec::with_capacity(from.len());
            let mut acc = 1 % t.value();
            for m in from.moduli() {
                w.push(t.shoup(acc));
                acc = t.mul(acc, t.reduce(m.value()));
            }
            let h = half_digits
                .iter()
                .zip(&w)
                .fold(0, |s, (&a, c)| t.add(s, c.mul(a, t.value())));
            half_mod.push(h);
            weights.push(w);
        }
        Self { targets, weights, half_mod }
    }

    pub fn targets(&self) -> &[Modulus] {
        &self.targets
    }

    /// Residues of x in [0, Q) modulo every target, given its mixed-radix digits.
    #[inline]
    pub fn from_digits(&self, digits: &[u64], out: &mut [u64]) {
        for (t, (m, w)) in self.targets.iter().zip(&self.weights).enumerate() {
            let r = m.value();
            let mut s = 0u64;
            for (&a, c) in digits.iter().zip(w) {
                s = m.add(s, c.mul(a, r));
            }
            out[t] = s;
        }
    }

    /// Residues of the centered representative of x (in (-Q/2, Q/2]) modulo every target.
    /// `shifted_digits` must be the digits of x + floor(Q/2) mod Q.
    #[inline]
    pub fn centered_from_shifted_digits(&self, shifted_digits: &[u64], out: &mut [u64]) {
        self.from_digits(shifted_digits, out);
        for (t, m) in self.targets.iter().enumerate() {
            out[t] = m.sub(out[t], self.half_mod[t]);
        }
    }
}

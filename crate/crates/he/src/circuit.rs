//! Random add/multiply circuits with a plaintext reference evaluator, used to check
//! Dec(Eval(C, Enc(m))) = C(m) mod p.

use rand::Rng;

use crate::arith::Modulus;
use crate::ciphertext::Ciphertext;
use crate::context::{poly_depth, HeContext};
use crate::error::HeError;
use crate::keys::EvalKey;

/// Plaintext-vector gates beyond this count would exceed the linear noise allowance of q.
pub const MAX_PLAIN_PRODUCTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gate {
    Add(usize, usize),
    AddPlain(usize, Vec<u64>),
    Mul(usize, usize),
    MulPlain(usize, Vec<u64>),
    MulScalar(usize, u64),
    Poly(usize, Vec<u64>),
}

/// Wires 0..inputs are the inputs; gate i writes wire inputs + i. The last wire is the output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub inputs: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    /// Multiplicative depth of every wire.
    pub fn wire_depths(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.inputs];
        for g in &self.gates {
            let v = match g {
                Gate::Add(a, b) => d[*a].max(d[*b]),
                Gate::Mul(a, b) => d[*a].max(d[*b]) + 1,
                Gate::AddPlain(a, _) | Gate::MulPlain(a, _) | Gate::MulScalar(a, _) => d[*a],
                Gate::Poly(a, c) => d[*a] + poly_depth(c.iter().rposition(|&x| x != 0).unwrap_or(0)),
            };
            d.push(v);
        }
        d
    }

    pub fn depth(&self) -> u32 {
        *self.wire_depths().last().unwrap_or(&0)
    }

    /// Random circuit with at most `max_gates` gates whose output depth is at most `max_depth`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, inputs: usize, max_gates: usize, max_depth: u32, p: u64, slots: usize) -> Self {
        assert!(inputs >= 1 && max_gates >= 1);
        let mut c = Circuit { inputs, gates: Vec::new() };
        let mut depths = vec![0u32; inputs];
        let mut plain_products = 0;
        let n_gates = rng.random_range(1..=max_gates);
        let rand_vec = |rng: &mut R| (0..slots).map(|_| rng.random_range(0..p)).collect::<Vec<_>>();
        while c.gates.len() < n_gates {
            let wires = depths.len();
            let a = rng.random_range(0..wires);
            let b = rng.random_range(0..wires);
            let (gate, depth) = match rng.random_range(0..6) {
                0 => (Gate::Add(a, b), depths[a].max(depths[b])),
                1 => (Gate::AddPlain(a, rand_vec(rng)), depths[a]),
                2 if depths[a].max(depths[b]) < max_depth => (Gate::Mul(a, b), depths[a].max(depths[b]) + 1),
                3 if plain_products < MAX_PLAIN_PRODUCTS => {
                    plain_products += 1;
                    (Gate::MulPlain(a, rand_vec(rng)), depths[a])
                }
                4 => (Gate::MulScalar(a, rng.random_range(0..p)), depths[a]),
                5 => {
                    let deg = rng.random_range(1..=3usize);
                    let mut coeffs: Vec<u64> = (0..=deg).map(|_| rng.random_range(0..p)).collect();
                    coeffs[deg] = rng.random_range(1..p);
                    let d = depths[a] + poly_depth(deg);
                    if d > max_depth {
                        continue;
                    }
                    (Gate::Poly(a, coeffs), d)
                }
                _ => continue,
            };
            c.gates.push(gate);
            depths.push(depth);
        }
        c
    }

    /// Random circuit whose output depth is exactly `depth`: a random prefix then squarings.
    pub fn random_exact_depth<R: Rng + ?Sized>(rng: &mut R, inputs: usize, max_gates: usize, depth: u32, p: u64, slots: usize) -> Self {
        let mut c = Self::random(rng, inputs, max_gates, depth, p, slots);
        while c.depth() < depth {
            let last = c.inputs + c.gates.len() - 1;
            let other = rng.random_range(0..=last);
            c.gates.push(Gate::Mul(last, other));
        }
        c
    }

    /// Reference evaluation on plaintext slot vectors mod p.
    pub fn eval_plain(&self, inputs: &[Vec<u64>], p: u64) -> Vec<u64> {
        let m = Modulus::new(p);
        let mut w: Vec<Vec<u64>> = inputs.to_vec();
        let at = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0);
        for g in &self.gates {
            let out: Vec<u64> = match g {
                Gate::Add(a, b) => w[*a].iter().zip(&w[*b]).map(|(&x, &y)| m.add(x, y)).collect(),
                Gate::Mul(a, b) => w[*a].iter().zip(&w[*b]).map(|(&x, &y)| m.mul(x, y)).collect(),
                Gate::AddPlain(a, v) => w[*a].iter().enumerate().map(|(i, &x)| m.add(x, at(v, i))).collect(),
                Gate::MulPlain(a, v) => w[*a].iter().enumerate().map(|(i, &x)| m.mul(x, at(v, i))).collect(),
                Gate::MulScalar(a, s) => w[*a].iter().map(|&x| m.mul(x, *s)).collect(),
                Gate::Poly(a, c) => w[*a]
                    .iter()
                    .map(|&x| c.iter().rev().fold(0, |acc, &ck| m.add(m.mul(acc, x), ck)))
                    .collect(),
            };
            w.push(out);
        }
        w.pop().unwrap()
    }

    pub fn eval_encrypted(&self, ctx: &HeContext, ek: &EvalKey, inputs: &[Ciphertext]) -> Result<Ciphertext, HeError> {
        Ok(self.eval_encrypted_wires(ctx, ek, inputs)?.pop().unwrap())
    }

    /// Every wire value, inputs first.
    pub fn eval_encrypted_wires(&self, ctx: &HeContext, ek: &EvalKey, inputs: &[Ciphertext]) -> Result<Vec<Ciphertext>, HeError> {
        let mut w: Vec<Ciphertext> = inputs.to_vec();
        for g in &self.gates {
            let out = match g {
                Gate::Add(a, b) => ctx.add(&w[*a], &w[*b])?,
                Gate::Mul(a, b) => ctx.mul(&w[*a], &w[*b], ek)?,
                Gate::AddPlain(a, v) => ctx.add_plain(&w[*a], v)?,
                Gate::MulPlain(a, v) => ctx.mul_plain(&w[*a], v)?,
                Gate::MulScalar(a, s) => ctx.mul_scalar(&w[*a], *s)?,
                Gate::Poly(a, c) => ctx.eval_poly(&w[*a], c, ek)?,
            };
            w.push(out);
        }
        Ok(w)
    }
}

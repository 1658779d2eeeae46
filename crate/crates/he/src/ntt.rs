//! Negacyclic number-theoretic transform over Z_q[x]/(x^n + 1).
//!
//! Forward output is in bit-reversed order; pointwise products in that domain
//! correspond to negacyclic convolution, which is all the callers need.

use crate::arith::{root_of_unity, Modulus, ShoupConst};

#[derive(Debug, Clone)]
pub struct NttTable {
    n: usize,
    q: Modulus,
    psi_rev: Vec<ShoupConst>,
    psi_inv_rev: Vec<ShoupConst>,
    n_inv: ShoupConst,
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl NttTable {
    /// Requires n a power of two and q prime with q = 1 (mod 2n).
    pub fn new(n: usize, q: u64) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        let m = Modulus::new(q);
        let psi = root_of_unity(2 * n as u64, q);
        let psi_inv = m.inv(psi);
        let bits = n.trailing_zeros();
        let mut psi_rev = vec![ShoupConst::new(0, q); n];
        let mut psi_inv_rev = vec![ShoupConst::new(0, q); n];
        let (mut pw, mut pw_inv) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, bits);
            psi_rev[r] = m.shoup(pw);
            psi_inv_rev[r] = m.shoup(pw_inv);
            pw = m.mul(pw, psi);
            pw_inv = m.mul(pw_inv, psi_inv);
        }
        let n_inv = m.shoup(m.inv(n as u64));
        Self { n, q: m, psi_rev, psi_inv_rev, n_inv }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.q
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.q.value();
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let s = self.psi_rev[m + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = s.mul(*y, q);
                    *x = self.q.add(u, v);
                    *y = self.q.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.q.value();
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let s = self.psi_inv_rev[h + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    *x = self.q.add(u, v);
                    *y = s.mul(self.q.sub(u, v), q);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = self.n_inv.mul(*x, q);
        }
    }
}

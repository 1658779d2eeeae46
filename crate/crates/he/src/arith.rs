//! Word-sized modular arithmetic: Barrett/Shoup reduction, primality, NTT-friendly prime search.

/// A modulus below 2^62 with precomputed Barrett constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    ratio_lo: u64,
    ratio_hi: u64,
}

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value >= 2 && value < (1u64 << 62), "modulus out of range");
        // floor(2^128 / q) as two words.
        let hi = u128::MAX / value as u128;
        // u128::MAX / q equals floor(2^128/q) unless q divides 2^128, impossible for q >= 3 odd;
        // for q = 2 the difference is irrelevant because reductions stay exact after the final fixup.
        Self { value, ratio_lo: hi as u64, ratio_hi: (hi >> 64) as u64 }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    /// Reduce a 128-bit value (must be below q * 2^64).
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let x0 = x as u64;
        let x1 = (x >> 64) as u64;
        let carry = ((x0 as u128 * self.ratio_lo as u128) >> 64) as u64;
        let t = x0 as u128 * self.ratio_hi as u128;
        let (mid, c1) = (t as u64).overflowing_add(carry);
        let hi_a = (t >> 64) as u64 + c1 as u64;
        let u = x1 as u128 * self.ratio_lo as u128;
        let (_, c2) = mid.overflowing_add(u as u64);
        let hi_b = (u >> 64) as u64 + c2 as u64;
        let est = x1.wrapping_mul(self.ratio_hi).wrapping_add(hi_a).wrapping_add(hi_b);
        let mut r = x0.wrapping_sub(est.wrapping_mul(self.value));
        while r >= self.value {
            r -= self.value;
        }
        r
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.value {
            x
        } else {
            self.reduce_u128(x as u128)
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    /// Reduce a signed value into [0, q).
    #[inline]
    pub fn from_i64(&self, x: i64) -> u64 {
        let r = self.reduce(x.unsigned_abs());
        if x < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse modulo a prime modulus.
    pub fn inv(&self, a: u64) -> u64 {
        let a = self.reduce(a);
        assert!(a != 0, "zero has no inverse");
        self.pow(a, self.value - 2)
    }

    pub fn shoup(&self, w: u64) -> ShoupConst {
        ShoupConst::new(w, self.value)
    }
}

/// A multiplicand fixed ahead of time, with its Shoup quotient floor(w·2^64/q).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShoupConst {
    pub w: u64,
    pub w_shoup: u64,
}

impl ShoupConst {
    pub fn new(w: u64, q: u64) -> Self {
        debug_assert!(w < q);
        Self { w, w_shoup: (((w as u128) << 64) / q as u128) as u64 }
    }

    /// a·w mod q for any a < 2^64 and q < 2^63.
    #[inline]
    pub fn mul(&self, a: u64, q: u64) -> u64 {
        let hi = ((a as u128 * self.w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(self.w).wrapping_sub(hi.wrapping_mul(q));
        if r >= q {
            r - q
        } else {
            r
        }
    }
}

fn mul_mod_u128(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u128(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod_u128(acc, b, m);
        }
        b = mul_mod_u128(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin for all u64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 325, 9375, 28178, 450775, 9780504, 1795265022] {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod_u128(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u128(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `count` distinct primes of exactly `bits` bits, congruent to 1 mod `modulus`, descending,
/// skipping anything in `exclude`.
pub fn ntt_primes(bits: u32, modulus: u64, count: usize, exclude: &[u64]) -> Vec<u64> {
    let top = 1u64 << bits;
    let floor = 1u64 << (bits - 1);
    let mut out = Vec::with_capacity(count);
    let mut c = (top - 1) / modulus * modulus + 1;
    while out.len() < count {
        assert!(c > floor, "ran out of {bits}-bit primes = 1 mod {modulus}");
        if c < top && is_prime(c) && !exclude.contains(&c) {
            out.push(c);
        }
        c -= modulus;
    }
    out
}

/// Smallest prime p >= start with p = 1 (mod modulus).
pub fn smallest_prime_congruent_one(start: u64, modulus: u64) -> u64 {
    let mut c = if start <= 1 { 1 } else { (start - 1).div_ceil(modulus) * modulus + 1 };
    if c < start {
        c += modulus;
    }
    loop {
        if is_prime(c) {
            return c;
        }
        c += modulus;
    }
}

/// A primitive `order`-th root of unity mod prime q (order must divide q-1 and be a power of two).
pub fn root_of_unity(order: u64, q: u64) -> u64 {
    assert!(order.is_power_of_two() && (q - 1) % order == 0);
    let m = Modulus::new(q);
    let cofactor = (q - 1) / order;
    for g in 2..q {
        let r = m.pow(g, cofactor);
        // r has order dividing `order`; it is primitive iff r^(order/2) = -1.
        if m.pow(r, order / 2) == q - 1 {
            return r;
        }
    }
    unreachable!("no root of unity found for a prime modulus")
}

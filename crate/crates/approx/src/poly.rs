use serde::{Deserialize, Serialize};

/// Dense real polynomial, `coeffs[k]` multiplies `x^k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    /// Degree after trimming trailing zeros; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_poly_real(self, x)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        }
    }

    /// Antiderivative whose value at 0 is `constant`.
    pub fn antiderivative(&self, constant: f64) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(constant);
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c / (k + 1) as f64),
        );
        Self { coeffs }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self += s * other`, growing as needed.
    pub fn axpy(&mut self, s: f64, other: &Polynomial) {
        if self.coeffs.len() < other.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), 0.0);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Re-express `q(t)` with `t = (x - center) / half_width` as a polynomial in `x`.
    pub fn from_scaled(q: &[f64], center: f64, half_width: f64) -> Self {
        let mut out = vec![0.0; q.len()];
        // (x - c)^k expanded with the binomial theorem.
        let mut binom = vec![1.0f64];
        for (k, &qk) in q.iter().enumerate() {
            if k > 0 {
                let mut next = vec![1.0; k + 1];
                for j in 1..k {
                    next[j] = binom[j - 1] + binom[j];
                }
                binom = next;
            }
            if qk == 0.0 {
                continue;
            }
            let s = qk / half_width.powi(k as i32);
            for j in 0..=k {
                out[j] += s * binom[j] * (-center).powi((k - j) as i32);
            }
        }
        Self { coeffs: out }
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }
}

/// Horner evaluation; the empty polynomial evaluates to 0.
pub fn eval_poly_real(p: &Polynomial, x: f64) -> f64 {
    p.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

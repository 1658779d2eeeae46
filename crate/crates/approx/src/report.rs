use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{ApproxError, Interval, Polynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PointFit,
    Taylor,
    /// Projection under `dx`.
    Legendre,
    ChebyshevStd,
    ChebyshevModified,
    /// Projection under `exp(-(l/x)²) dx`.
    GaussianTail,
    DerivativeIntegral,
}

/// A fitted polynomial together with its error estimates.
///
/// Serialized as `{method, interval: {lo, hi}, coeffs, sup_error, l2_error}`;
/// this is the activation payload a model file points at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub method: Method,
    pub interval: Interval,
    #[serde(rename = "coeffs")]
    pub poly: Polynomial,
    pub sup_error: f64,
    pub l2_error: f64,
}

impl ApproxReport {
    pub fn to_json(&self) -> Result<String, ApproxError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ApproxError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let json = self.to_json().map_err(std::io::Error::other)?;
        std::fs::write(path, json)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s).map_err(std::io::Error::other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let r = ApproxReport {
            method: Method::DerivativeIntegral,
            interval: Interval::symmetric(8.0).unwrap(),
            poly: Polynomial::new(vec![1.0, 0.5, 0.25]),
            sup_error: 1.5,
            l2_error: 0.5,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["method"], "derivative_integral");
        assert_eq!(v["interval"]["lo"], -8.0);
        assert_eq!(v["coeffs"][2], 0.25);
        assert_eq!(ApproxReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }
}

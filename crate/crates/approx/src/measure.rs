use serde::{Deserialize, Serialize};

use crate::ApproxError;

/// Offset in the ReLU-adapted weight `exp(-1 / (eps + x²))`.
pub const MODIFIED_RELU_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ApproxError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ApproxError::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// `[-l, l]`
    pub fn symmetric(l: f64) -> Result<Self, ApproxError> {
        Self::new(-l, l)
    }

    pub fn is_symmetric(&self) -> bool {
        (self.lo + self.hi).abs() <= 1e-12 * self.hi.abs().max(1.0)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MeasureFamily {
    /// `dμ = dx`
    Lebesgue,
    /// `dμ = dx / (l·sqrt(1 - (x/l)²))`
    ChebyshevStretched { l: f64 },
    /// `dμ = exp(-(l/x)²) dx`, zero at the origin.
    GaussianTail { l: f64 },
    /// `dμ = exp(-1 / (eps + x²)) dx`
    ModifiedRelu { eps: f64 },
}

/// Weight function paired with the interval it is integrated over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub family: MeasureFamily,
    pub interval: Interval,
}

impl Measure {
    pub fn new(family: MeasureFamily, interval: Interval) -> Result<Self, ApproxError> {
        match family {
            MeasureFamily::Lebesgue => {}
            MeasureFamily::ChebyshevStretched { l } => {
                if !(l.is_finite() && l > 0.0) {
                    return Err(ApproxError::InvalidMeasure(format!("chebyshev l = {l}")));
                }
                if interval.lo < -l || interval.hi > l {
                    return Err(ApproxError::InvalidMeasure(format!(
                        "chebyshev weight with l = {l} is undefined outside [-l, l]"
                    )));
                }
            }
            MeasureFamily::GaussianTail { l } => {
                if !(l.is_finite() && l > 0.0) {
                    return Err(ApproxError::InvalidMeasure(format!("gaussian tail l = {l}")));
                }
            }
            MeasureFamily::ModifiedRelu { eps } => {
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(ApproxError::InvalidMeasure(format!("eps = {eps}")));
                }
            }
        }
        Ok(Self { family, interval })
    }

    pub fn lebesgue(interval: Interval) -> Self {
        Self {
            family: MeasureFamily::Lebesgue,
            interval,
        }
    }

    /// Stretched Chebyshev weight on `[-l, l]`.
    pub fn chebyshev(l: f64) -> Result<Self, ApproxError> {
        Self::new(MeasureFamily::ChebyshevStretched { l }, Interval::symmetric(l)?)
    }

    /// Gaussian-tail weight on `[-l, l]`.
    pub fn gaussian_tail(l: f64) -> Result<Self, ApproxError> {
        Self::new(MeasureFamily::GaussianTail { l }, Interval::symmetric(l)?)
    }

    pub fn modified_relu(interval: Interval) -> Self {
        Self {
            family: MeasureFamily::ModifiedRelu {
                eps: MODIFIED_RELU_EPS,
            },
            interval,
        }
    }

    /// Density `w(x)` with respect to `dx`. Infinite at the endpoints of the
    /// Chebyshev family; quadrature never samples there.
    pub fn weight(&self, x: f64) -> f64 {
        match self.family {
            MeasureFamily::Lebesgue => 1.0,
            MeasureFamily::ChebyshevStretched { l } => {
                let r = x / l;
                1.0 / (l * (1.0 - r * r).sqrt())
            }
            MeasureFamily::GaussianTail { l } => {
                if x == 0.0 {
                    0.0
                } else {
                    let r = l / x;
                    (-(r * r)).exp()
                }
            }
            MeasureFamily::ModifiedRelu { eps } => (-1.0 / (eps + x * x)).exp(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            MeasureFamily::Lebesgue => "lebesgue",
            MeasureFamily::ChebyshevStretched { .. } => "chebyshev",
            MeasureFamily::GaussianTail { .. } => "gaussian_tail",
            MeasureFamily::ModifiedRelu { .. } => "modified_relu",
        }
    }
}

use crate::fit::{sup_error, DEFAULT_SUP_GRID};
use crate::measure::{Measure, MeasureFamily};
use crate::quadrature::{quadrature_for, QuadratureRule, DEFAULT_NODES};
use crate::report::{ApproxReport, Method};
use crate::{ApproxError, Polynomial};

const DEGENERACY_NORM: f64 = 1e-12;

/// Orthonormal polynomials `polys[k]` of exact degree `k` under `measure`.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    pub measure: Measure,
    pub polys: Vec<Polynomial>,
    /// Rule the basis was orthonormalized with; reused by `project`.
    pub rule: QuadratureRule,
}

impl OrthoBasis {
    pub fn max_degree(&self) -> usize {
        self.polys.len() - 1
    }

    /// Truncate to degrees `0..=d`.
    pub fn truncated(&self, d: usize) -> OrthoBasis {
        OrthoBasis {
            measure: self.measure,
            polys: self.polys[..=d.min(self.max_degree())].to_vec(),
            rule: self.rule.clone(),
        }
    }
}

/// `⟨f, g⟩ = ∫ f g dμ` with `rule` built for `μ`.
pub fn inner_product(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    rule: &QuadratureRule,
) -> f64 {
    rule.integrate(|x| f(x) * g(x))
}

pub fn gram_schmidt(measure: &Measure, max_degree: usize) -> Result<OrthoBasis, ApproxError> {
    let nodes = DEFAULT_NODES.max(4 * (max_degree + 1));
    let rule = quadrature_for(measure, nodes)?;
    gram_schmidt_with(measure, max_degree, rule)
}

/// Orthonormalize `1, x, x², …` under the measure.
///
/// Runs modified Gram–Schmidt with one re-orthogonalization pass in the
/// scaled variable `t = (x - c)/h` of the interval, then converts back to
/// monomials in `x`. Leading coefficients come out positive.
pub fn gram_schmidt_with(
    measure: &Measure,
    max_degree: usize,
    rule: QuadratureRule,
) -> Result<OrthoBasis, ApproxError> {
    let c = measure.interval.center();
    let h = measure.interval.half_width();
    let ts: Vec<f64> = rule.nodes.iter().map(|&x| (x - c) / h).collect();
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&rule.weights)
            .map(|((x, y), w)| w * x * y)
            .sum()
    };

    // (coefficients in t, values at the nodes)
    let mut basis: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(max_degree + 1);
    for k in 0..=max_degree {
        let mut coeffs = vec![0.0; max_degree + 1];
        coeffs[k] = 1.0;
        let mut values: Vec<f64> = ts.iter().map(|t| t.powi(k as i32)).collect();
        for _pass in 0..2 {
            for (qc, qv) in &basis {
                let r = dot(&values, qv);
                for (v, q) in values.iter_mut().zip(qv) {
                    *v -= r * q;
                }
                for (a, q) in coeffs.iter_mut().zip(qc) {
                    *a -= r * q;
                }
            }
        }
        let norm = dot(&values, &values).sqrt();
        if !(norm >= DEGENERACY_NORM) {
            return Err(ApproxError::DegenerateBasis { degree: k, norm });
        }
        values.iter_mut().for_each(|v| *v /= norm);
        coeffs.iter_mut().for_each(|a| *a /= norm);
        basis.push((coeffs, values));
    }

    let polys = basis
        .into_iter()
        .enumerate()
        .map(|(k, (coeffs, _))| Polynomial::from_scaled(&coeffs[..=k], c, h))
        .collect();
    Ok(OrthoBasis {
        measure: *measure,
        polys,
        rule,
    })
}

fn method_for(measure: &Measure) -> Method {
    match measure.family {
        MeasureFamily::Lebesgue => Method::Legendre,
        MeasureFamily::ChebyshevStretched { .. } => Method::ChebyshevStd,
        MeasureFamily::GaussianTail { .. } => Method::GaussianTail,
        MeasureFamily::ModifiedRelu { .. } => Method::ChebyshevModified,
    }
}

/// Best `L2(μ)` approximation `Σ ⟨f, φₖ⟩ φₖ` of `f` in the span of the basis.
pub fn project(f: impl Fn(f64) -> f64, basis: &OrthoBasis) -> ApproxReport {
    let rule = &basis.rule;
    let fv: Vec<f64> = rule.nodes.iter().map(|&x| f(x)).collect();
    let mut poly = Polynomial::new(vec![0.0; basis.polys.len()]);
    for phi in &basis.polys {
        let ck: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .zip(&fv)
            .map(|((&x, &w), &y)| w * y * phi.eval(x))
            .sum();
        poly.axpy(ck, phi);
    }
    let l2 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .zip(&fv)
        .map(|((&x, &w), &y)| {
            let d = y - poly.eval(x);
            w * d * d
        })
        .sum::<f64>()
        .sqrt();
    let interval = basis.measure.interval;
    ApproxReport {
        method: method_for(&basis.measure),
        interval,
        sup_error: sup_error(&f, &poly, interval, DEFAULT_SUP_GRID),
        l2_error: l2,
        poly,
    }
}

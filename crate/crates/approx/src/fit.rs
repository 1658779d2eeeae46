use nalgebra::{DMatrix, DVector};

use crate::basis::{gram_schmidt, project};
use crate::measure::{Interval, Measure};
use crate::quadrature::quadrature_for;
use crate::report::{ApproxReport, Method};
use crate::{activation, Activation, ApproxError, Polynomial};

/// Grid size for the sup-norm estimates attached to reports.
pub const DEFAULT_SUP_GRID: usize = 10_001;

const MAX_TAYLOR_DEGREE: usize = 9;

/// `max |f(x) - p(x)|` over `grid` equispaced points including both endpoints.
pub fn sup_error(f: impl Fn(f64) -> f64, p: &Polynomial, interval: Interval, grid: usize) -> f64 {
    let grid = grid.max(2);
    let step = (interval.hi - interval.lo) / (grid - 1) as f64;
    (0..grid)
        .map(|i| {
            let x = if i == grid - 1 {
                interval.hi
            } else {
                interval.lo + step * i as f64
            };
            (f(x) - p.eval(x)).abs()
        })
        .fold(0.0, f64::max)
}

fn count_distinct(xs: &mut [f64]) -> usize {
    xs.sort_by(f64::total_cmp);
    let mut n = 0;
    let mut last = None;
    for &x in xs.iter() {
        if last != Some(x) {
            n += 1;
            last = Some(x);
        }
    }
    n
}

fn least_squares(samples: &[(f64, f64)], degree: usize) -> Result<Polynomial, ApproxError> {
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let distinct = count_distinct(&mut xs);
    if samples.len() < degree + 1 || distinct < degree + 1 {
        return Err(ApproxError::RankDeficient { distinct, degree });
    }
    let lo = xs[0];
    let hi = xs[xs.len() - 1];
    let center = 0.5 * (lo + hi);
    let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };

    let a = DMatrix::from_fn(samples.len(), degree + 1, |i, k| {
        ((samples[i].0 - center) / half).powi(k as i32)
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-13) {
        return Err(ApproxError::RankDeficient { distinct, degree });
    }
    let q = svd
        .solve(&b, 0.0)
        .map_err(|e| ApproxError::Unsupported(e.to_string()))?;
    Ok(Polynomial::from_scaled(q.as_slice(), center, half))
}

/// Least-squares polynomial of the given degree through `(x, y)` samples.
///
/// `sup_error` is the largest absolute residual and `l2_error` the RMS
/// residual scaled by `sqrt(hi - lo)`, a discrete stand-in for the `dx`
/// norm over the sample range.
pub fn fit_points(samples: &[(f64, f64)], degree: usize) -> Result<ApproxReport, ApproxError> {
    let poly = least_squares(samples, degree)?;
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, s| {
        (acc.0.min(s.0), acc.1.max(s.0))
    });
    let residuals = samples.iter().map(|&(x, y)| y - poly.eval(x));
    let sup = residuals.clone().fold(0.0, |m, r| r.abs().max(m));
    let mse = residuals.map(|r| r * r).sum::<f64>() / samples.len() as f64;
    Ok(ApproxReport {
        method: Method::PointFit,
        interval: Interval { lo, hi },
        sup_error: sup,
        l2_error: (mse * (hi - lo)).sqrt(),
        poly,
    })
}

/// Point fit of `f` on `n_points` equispaced samples, with errors measured
/// against `f` itself (sup on the default grid, `L2(dx)` by quadrature).
pub fn fit_function(
    f: impl Fn(f64) -> f64,
    interval: Interval,
    n_points: usize,
    degree: usize,
) -> Result<ApproxReport, ApproxError> {
    let n = n_points.max(2);
    let step = (interval.hi - interval.lo) / (n - 1) as f64;
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = interval.lo + step * i as f64;
            (x, f(x))
        })
        .collect();
    let mut report = fit_points(&samples, degree)?;
    report.interval = interval;
    finish_against(&f, &mut report, &Measure::lebesgue(interval))?;
    Ok(report)
}

fn finish_against(
    f: &impl Fn(f64) -> f64,
    report: &mut ApproxReport,
    measure: &Measure,
) -> Result<(), ApproxError> {
    let rule = quadrature_for(measure, 512)?;
    let p = &report.poly;
    report.l2_error = rule
        .integrate(|x| {
            let d = f(x) - p.eval(x);
            d * d
        })
        .sqrt();
    report.sup_error = sup_error(f, p, report.interval, DEFAULT_SUP_GRID);
    Ok(())
}

/// Polynomials `P_k` with `d^k/dx^k g(x) = P_k(g(x))`, for `g' = r(g)`.
fn derivative_chain(r: &[f64], degree: usize) -> Vec<Vec<f64>> {
    let mut chain = vec![vec![0.0, 1.0]];
    for _ in 0..degree {
        let prev = chain.last().unwrap();
        // P' (as a polynomial in g) times r(g)
        let dp: Vec<f64> = prev
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        let mut next = vec![0.0; dp.len() + r.len()];
        for (i, a) in dp.iter().enumerate() {
            for (j, b) in r.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        chain.push(next);
    }
    chain
}

/// Taylor coefficients `a_k` of the expansion in powers of `(x - center)`.
fn taylor_shifted(kind: Activation, center: f64, degree: usize) -> Result<Vec<f64>, ApproxError> {
    // σ' = σ - σ², tanh' = 1 - tanh²
    let r: &[f64] = match kind {
        Activation::Sigmoid => &[0.0, 1.0, -1.0],
        Activation::Tanh => &[1.0, 0.0, -1.0],
        Activation::Relu => {
            return Err(ApproxError::Unsupported(
                "ReLU has no Taylor series at a kink; use taylor_relu".into(),
            ))
        }
    };
    let g = activation(kind, center);
    let mut factorial = 1.0;
    Ok(derivative_chain(r, degree)
        .iter()
        .enumerate()
        .map(|(k, pk)| {
            if k > 0 {
                factorial *= k as f64;
            }
            Polynomial::new(pk.clone()).eval(g) / factorial
        })
        .collect())
}

/// Truncated Taylor expansion of Sigmoid or Tanh about `center`.
pub fn taylor_poly(kind: Activation, center: f64, degree: usize) -> Result<Polynomial, ApproxError> {
    if degree > MAX_TAYLOR_DEGREE {
        return Err(ApproxError::Unsupported(format!(
            "Taylor degree {degree} (max {MAX_TAYLOR_DEGREE})"
        )));
    }
    let a = taylor_shifted(kind, center, degree)?;
    Ok(Polynomial::from_scaled(&a, center, 1.0))
}

/// Taylor-series ReLU replacement: the softplus series about `center`,
/// i.e. the antiderivative of the Sigmoid series of degree `degree - 1`
/// anchored at `softplus(center)`.
pub fn taylor_relu(center: f64, degree: usize) -> Result<Polynomial, ApproxError> {
    if degree == 0 || degree > MAX_TAYLOR_DEGREE + 1 {
        return Err(ApproxError::Unsupported(format!(
            "softplus Taylor degree {degree} (allowed 1..={})",
            MAX_TAYLOR_DEGREE + 1
        )));
    }
    let a = taylor_shifted(Activation::Sigmoid, center, degree - 1)?;
    let softplus = center.max(0.0) + (-center.abs()).exp().ln_1p();
    let shifted = Polynomial::new(a).antiderivative(softplus);
    Ok(Polynomial::from_scaled(&shifted.coeffs, center, 1.0))
}

/// ReLU surrogate from its derivative: fit the Sigmoid (a smooth step) on
/// the measure's basis, integrate the fit, and choose the integration
/// constant that minimizes the `L2(μ)` distance to ReLU.
///
/// The returned polynomial has `sigmoid_degree + 2` coefficients and its
/// derivative equals the Sigmoid fit coefficient-wise.
pub fn relu_via_derivative(
    measure: &Measure,
    sigmoid_degree: usize,
) -> Result<(ApproxReport, Polynomial), ApproxError> {
    let iv = measure.interval;
    if !iv.is_symmetric() {
        return Err(ApproxError::NotSymmetric { lo: iv.lo, hi: iv.hi });
    }
    let basis = gram_schmidt(measure, sigmoid_degree)?;
    let sigmoid_fit = project(|x| activation(Activation::Sigmoid, x), &basis).poly;
    let mut poly = sigmoid_fit.antiderivative(0.0);
    let rule = &basis.rule;
    let offset = rule.integrate(|x| x.max(0.0) - poly.eval(x)) / rule.mass();
    poly.coeffs[0] = offset;
    // c/(k+1)*(k+1) can be off by an ulp; report the surrogate the activation
    // actually integrates.
    let sigmoid_fit = poly.derivative();

    let relu = |x: f64| x.max(0.0);
    let l2 = rule
        .integrate(|x| {
            let d = relu(x) - poly.eval(x);
            d * d
        })
        .sqrt();
    let report = ApproxReport {
        method: Method::DerivativeIntegral,
        interval: iv,
        sup_error: sup_error(relu, &poly, iv, DEFAULT_SUP_GRID),
        l2_error: l2,
        poly,
    };
    Ok((report, sigmoid_fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn line_is_fitted_exactly() {
        let samples: Vec<_> = (0..7).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let r = fit_points(&samples, 1).unwrap();
        close(&r.poly.coeffs, &[1.0, 2.0], 1e-9);
        assert_eq!(r.method, Method::PointFit);
    }

    #[test]
    fn degree_zero_fit_is_the_mean() {
        let r = fit_points(&[(0.0, 1.0), (1.0, 3.0)], 0).unwrap();
        close(&r.poly.coeffs, &[2.0], 1e-12);
    }

    #[test]
    fn too_few_distinct_points() {
        let samples = [(1.0, 1.0), (1.0, 2.0), (2.0, 0.0)];
        assert!(matches!(
            fit_points(&samples, 2),
            Err(ApproxError::RankDeficient { distinct: 2, degree: 2 })
        ));
    }

    #[test]
    fn taylor_series_examples() {
        close(&taylor_poly(Activation::Sigmoid, 0.0, 1).unwrap().coeffs, &[0.5, 0.25], 1e-15);
        close(
            &taylor_poly(Activation::Tanh, 0.0, 3).unwrap().coeffs,
            &[0.0, 1.0, 0.0, -1.0 / 3.0],
            1e-15,
        );
        close(
            &taylor_poly(Activation::Sigmoid, 0.0, 5).unwrap().coeffs,
            &[0.5, 0.25, 0.0, -1.0 / 48.0, 0.0, 1.0 / 480.0],
            1e-15,
        );
    }

    #[test]
    fn taylor_off_center_matches_function_locally() {
        let p = taylor_poly(Activation::Sigmoid, 1.5, 9).unwrap();
        for dx in [-0.2, 0.0, 0.1, 0.25] {
            let x = 1.5 + dx;
            assert!((p.eval(x) - activation(Activation::Sigmoid, x)).abs() < 1e-9);
        }
    }

    #[test]
    fn taylor_rejections() {
        assert!(taylor_poly(Activation::Sigmoid, 0.0, 10).is_err());
        assert!(taylor_poly(Activation::Relu, 0.0, 3).is_err());
        assert!(taylor_relu(0.0, 0).is_err());
    }

    #[test]
    fn cubic_sigmoid_taylor_fails_away_from_center() {
        let p = taylor_poly(Activation::Sigmoid, 0.0, 3).unwrap();
        let err = (p.eval(4.0) - activation(Activation::Sigmoid, 4.0)).abs();
        assert!(err > 0.2, "{err}");
    }

    #[test]
    fn softplus_series() {
        let p = taylor_relu(0.0, 3).unwrap();
        close(&p.coeffs, &[std::f64::consts::LN_2, 0.5, 0.125, 0.0], 1e-15);
    }

    #[test]
    fn sup_error_examples() {
        let iv = Interval::symmetric(1.0).unwrap();
        let p = Polynomial::new(vec![0.0, 0.0, 1.0]);
        assert_eq!(sup_error(|x| x * x, &p, iv, 11), 0.0);
    }

    #[test]
    fn derivative_method_on_constant_fit() {
        let m = Measure::lebesgue(Interval::symmetric(1.0).unwrap());
        let (r, q) = relu_via_derivative(&m, 0).unwrap();
        close(&q.coeffs, &[0.5], 1e-12);
        close(&r.poly.coeffs, &[0.25, 0.5], 1e-12);
        assert!((r.sup_error - 0.25).abs() < 1e-12);
        assert_eq!(r.poly.derivative(), q);
    }

    #[test]
    fn derivative_method_needs_symmetric_interval() {
        let m = Measure::lebesgue(Interval::new(-1.0, 2.0).unwrap());
        assert!(matches!(relu_via_derivative(&m, 2), Err(ApproxError::NotSymmetric { .. })));
    }
}

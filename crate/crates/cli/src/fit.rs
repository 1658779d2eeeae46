//! Activation fitting front end.

use clap::ValueEnum;
use hecnn_approx::{
    fit_function, gram_schmidt, project, quadrature_for, relu_via_derivative, sup_error, taylor_poly, taylor_relu,
    Activation, ApproxReport, Interval, Measure, MeasureFamily, Method, Polynomial, DEFAULT_NODES, DEFAULT_SUP_GRID,
};

use crate::error::CliError;

/// Equispaced samples used by the point fit.
pub const POINT_FIT_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    /// Least squares on equispaced samples.
    PointFit,
    /// Truncated Taylor series about the interval center.
    Taylor,
    /// Projection under dx.
    Legendre,
    /// Projection under the stretched Chebyshev weight.
    Chebyshev,
    /// Projection under exp(-1/(eps + x²)) dx.
    Modified,
    /// Projection under exp(-(l/x)²) dx.
    GaussianTail,
    /// ReLU as the integral of a projected Sigmoid.
    Derivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMeasure {
    Legendre,
    Chebyshev,
    Modified,
    GaussianTail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRequest {
    pub activation: Activation,
    pub method: FitMethod,
    pub degree: usize,
    pub interval: Interval,
    /// Measure for the Sigmoid fit inside the derivative method.
    pub measure: Option<FitMeasure>,
}

fn measure(kind: FitMeasure, iv: Interval) -> Result<Measure, CliError> {
    let l = iv.lo.abs().max(iv.hi.abs());
    Ok(match kind {
        FitMeasure::Legendre => Measure::lebesgue(iv),
        FitMeasure::Chebyshev => Measure::new(MeasureFamily::ChebyshevStretched { l }, iv)?,
        FitMeasure::Modified => Measure::modified_relu(iv),
        FitMeasure::GaussianTail => Measure::new(MeasureFamily::GaussianTail { l: iv.half_width() }, iv)?,
    })
}

fn report_against(f: impl Fn(f64) -> f64, poly: Polynomial, iv: Interval, method: Method) -> Result<ApproxReport, CliError> {
    let rule = quadrature_for(&Measure::lebesgue(iv), DEFAULT_NODES)?;
    let l2 = rule
        .integrate(|x| {
            let d = f(x) - poly.eval(x);
            d * d
        })
        .sqrt();
    Ok(ApproxReport { method, interval: iv, sup_error: sup_error(&f, &poly, iv, DEFAULT_SUP_GRID), l2_error: l2, poly })
}

pub fn fit(req: &FitRequest) -> Result<ApproxReport, CliError> {
    let act = req.activation;
    let f = move |x: f64| act.eval(x);
    let iv = req.interval;
    if req.measure.is_some() && req.method != FitMethod::Derivative {
        return Err(CliError::validation("--measure only applies to the derivative method; other methods fix their measure"));
    }
    let projected = |kind| -> Result<ApproxReport, CliError> {
        let basis = gram_schmidt(&measure(kind, iv)?, req.degree)?;
        Ok(project(f, &basis))
    };
    match req.method {
        FitMethod::PointFit => Ok(fit_function(f, iv, POINT_FIT_SAMPLES, req.degree)?),
        FitMethod::Taylor => {
            let poly = match act {
                Activation::Relu => taylor_relu(iv.center(), req.degree)?,
                other => taylor_poly(other, iv.center(), req.degree)?,
            };
            report_against(f, poly, iv, Method::Taylor)
        }
        FitMethod::Legendre => projected(FitMeasure::Legendre),
        FitMethod::Chebyshev => projected(FitMeasure::Chebyshev),
        FitMethod::Modified => projected(FitMeasure::Modified),
        FitMethod::GaussianTail => projected(FitMeasure::GaussianTail),
        FitMethod::Derivative => {
            if act != Activation::Relu {
                return Err(CliError::validation("the derivative method builds ReLU replacements only"));
            }
            if req.degree < 2 {
                return Err(CliError::validation(format!(
                    "derivative method needs degree >= 2 (a Sigmoid fit of degree d - 1 is integrated), got {}",
                    req.degree
                )));
            }
            let m = measure(req.measure.unwrap_or(FitMeasure::Chebyshev), iv)?;
            Ok(relu_via_derivative(&m, req.degree - 1)?.0)
        }
    }
}

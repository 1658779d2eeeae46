//! Low-degree polynomial replacements for ReLU, Sigmoid and Tanh.
//!
//! Approximations are built by projecting the target function onto an
//! orthonormal polynomial basis under a configurable measure (Legendre,
//! stretched Chebyshev, a Gaussian-tail weight, and a ReLU-adapted weight),
//! by least-squares point fitting, by truncated Taylor series, or by fitting
//! the Sigmoid and integrating the fit to get a ReLU surrogate.

mod activation;
mod basis;
mod error;
mod fit;
mod measure;
mod poly;
mod quadrature;
mod report;

pub use activation::{activation, Activation};
pub use basis::{gram_schmidt, gram_schmidt_with, inner_product, project, OrthoBasis};
pub use error::ApproxError;
pub use fit::{
    fit_function, fit_points, relu_via_derivative, sup_error, taylor_poly, taylor_relu,
    DEFAULT_SUP_GRID,
};
pub use measure::{Interval, Measure, MeasureFamily, MODIFIED_RELU_EPS};
pub use poly::{eval_poly_real, Polynomial};
pub use quadrature::{quadrature_for, QuadratureRule, DEFAULT_NODES};
pub use report::{ApproxReport, Method};

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::measure::{Measure, MeasureFamily};
use crate::ApproxError;

/// Node count used by `gram_schmidt` and friends when no rule is supplied.
pub const DEFAULT_NODES: usize = 256;

/// Nodes and measure-weighted weights: `∫ f dμ ≈ Σ wᵢ f(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total mass `∫ dμ`.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn gauss_legendre_panel(n: usize, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("panel size is positive"));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for &(t, w) in rule.as_node_weight_pairs() {
        out.push((mid + half * t, half * w));
    }
}

/// Gauss–Legendre rule for `∫ f dμ` over the measure's interval.
///
/// When the interval straddles the origin the rule is split into two panels
/// at 0 (each with `ceil(n/2)` nodes), so integrands with a kink at the
/// origin such as ReLU are integrated panel-wise smoothly. The stretched
/// Chebyshev weight is handled with `x = l·cos θ`, which turns `w(x) dx`
/// into `dθ` and removes the endpoint singularities.
pub fn quadrature_for(measure: &Measure, n_nodes: usize) -> Result<QuadratureRule, ApproxError> {
    if n_nodes < 2 {
        return Err(ApproxError::TooFewNodes(n_nodes));
    }
    let iv = measure.interval;
    let split = iv.lo < 0.0 && iv.hi > 0.0;
    let per_panel = if split { n_nodes.div_ceil(2) } else { n_nodes };

    let mut pairs = Vec::with_capacity(2 * per_panel);
    match measure.family {
        MeasureFamily::ChebyshevStretched { l } => {
            let theta_lo = (iv.hi / l).clamp(-1.0, 1.0).acos();
            let theta_hi = (iv.lo / l).clamp(-1.0, 1.0).acos();
            let mut theta = Vec::with_capacity(2 * per_panel);
            if split {
                let mid = std::f64::consts::FRAC_PI_2;
                gauss_legendre_panel(per_panel, theta_lo, mid, &mut theta);
                gauss_legendre_panel(per_panel, mid, theta_hi, &mut theta);
            } else {
                gauss_legendre_panel(per_panel, theta_lo, theta_hi, &mut theta);
            }
            pairs.extend(theta.into_iter().map(|(t, w)| (l * t.cos(), w)));
        }
        _ => {
            let mut xs = Vec::with_capacity(2 * per_panel);
            if split {
                gauss_legendre_panel(per_panel, iv.lo, 0.0, &mut xs);
                gauss_legendre_panel(per_panel, 0.0, iv.hi, &mut xs);
            } else {
                gauss_legendre_panel(per_panel, iv.lo, iv.hi, &mut xs);
            }
            pairs.extend(xs.into_iter().map(|(x, w)| (x, w * measure.weight(x))));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(QuadratureRule { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Interval;

    fn unit() -> Interval {
        Interval::symmetric(1.0).unwrap()
    }

    #[test]
    fn rejects_too_few_nodes() {
        let m = Measure::lebesgue(unit());
        assert!(matches!(quadrature_for(&m, 1), Err(ApproxError::TooFewNodes(1))));
        assert!(quadrature_for(&m, 2).is_ok());
    }

    #[test]
    fn lebesgue_second_moment() {
        let rule = quadrature_for(&Measure::lebesgue(unit()), 16).unwrap();
        assert!((rule.integrate(|x| x * x) - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn chebyshev_total_mass_is_pi() {
        let rule = quadrature_for(&Measure::chebyshev(1.0).unwrap(), 64).unwrap();
        assert!((rule.mass() - std::f64::consts::PI).abs() < 1e-8);
        // independent of the stretch
        let rule = quadrature_for(&Measure::chebyshev(8.0).unwrap(), 64).unwrap();
        assert!((rule.mass() - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn gaussian_tail_mass_regression() {
        // 40-digit mpmath value, tests/oracle/compute_fixtures.py
        let rule = quadrature_for(&Measure::gaussian_tail(2.0).unwrap(), 128).unwrap();
        let mass = rule.mass();
        assert!(mass > 0.0 && mass.is_finite());
        assert!((mass - 0.356_295_423_563_121_38).abs() < 1e-12);
    }

    #[test]
    fn nodes_are_interior() {
        let ms = [
            Measure::lebesgue(Interval::new(-2.0, 3.0).unwrap()),
            Measure::chebyshev(4.0).unwrap(),
            Measure::gaussian_tail(2.0).unwrap(),
            Measure::modified_relu(Interval::new(0.5, 3.0).unwrap()),
        ];
        for m in ms {
            let rule = quadrature_for(&m, 33).unwrap();
            assert!(rule
                .nodes
                .iter()
                .all(|&x| m.interval.lo < x && x < m.interval.hi));
            assert_eq!(rule.nodes.len(), rule.weights.len());
        }
    }

    #[test]
    fn split_rule_integrates_relu_exactly() {
        let rule = quadrature_for(&Measure::lebesgue(Interval::new(-1.0, 3.0).unwrap()), 8).unwrap();
        assert!((rule.integrate(|x| x.max(0.0)) - 4.5).abs() < 1e-12);
    }
}

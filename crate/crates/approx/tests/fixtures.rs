//! Regression values frozen from the extended-precision oracle in
//! `tests/oracle/compute_fixtures.py`, plus in-test dense least-squares
//! cross-checks that do not go through the quadrature/Gram–Schmidt path.

use hecnn_approx::*;

const SIGMOID_CHEB8_DEG2: [f64; 3] = [0.5, 0.077_382_015_624_892_433_932, 0.0];
const RELU_MODIFIED_DEG2: [f64; 3] = [0.983_379_105_015_732_641_66, 0.5, 0.052_544_145_746_375_003_638];
const RELU_POINTS_DEG2: [f64; 3] = [0.750_745_504_484_288_133_34, 0.5, 0.058_535_390_040_873_590_226];
const METHOD5_CHEB8: [f64; 4] = [1.308_366_839_472_046_429_4, 0.5, 0.038_691_007_812_446_216_966, 0.0];
const METHOD5_CHEB8_SUP: f64 = 1.308_366_839_472_046_429_4;
const TAYLOR_RELU3_SUP: f64 = 4.693_147_180_559_945_309_4;
const SIGMOID_TAYLOR3_SUP: f64 = 9.166_331_316_536_200_188_6;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn assert_coeffs(got: &[f64], want: &[f64], tol: f64) {
    assert!(got.len() >= want.len() - 1, "{got:?}");
    for (k, w) in want.iter().enumerate() {
        let g = got.get(k).copied().unwrap_or(0.0);
        assert!((g - w).abs() <= tol, "coeff {k}: {g} vs {w} ({got:?})");
    }
}

/// Weighted least squares on samples `(x, y, weight)` via normal equations in
/// a scaled variable, solved by Gaussian elimination.
fn dense_weighted_ls(samples: &[(f64, f64, f64)], degree: usize, scale: f64) -> Vec<f64> {
    let n = degree + 1;
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for &(x, y, w) in samples {
        let t = x / scale;
        for i in 0..n {
            for j in 0..n {
                a[i][j] += w * t.powi((i + j) as i32);
            }
            a[i][n] += w * y * t.powi(i as i32);
        }
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i] / scale.powi(i as i32)).collect()
}

#[test]
fn sigmoid_under_stretched_chebyshev() {
    let basis = gram_schmidt(&Measure::chebyshev(8.0).unwrap(), 2).unwrap();
    let r = project(sigmoid, &basis);
    assert_coeffs(&r.poly.coeffs, &SIGMOID_CHEB8_DEG2, 1e-9);
    assert_eq!(r.method, Method::ChebyshevStd);

    // 1e5 points uniform in θ carry the Chebyshev weight exactly.
    let m = 100_000;
    let samples: Vec<_> = (0..m)
        .map(|i| {
            let x = 8.0 * (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).cos();
            (x, sigmoid(x), 1.0)
        })
        .collect();
    let oracle = dense_weighted_ls(&samples, 2, 8.0);
    assert_coeffs(&r.poly.coeffs, &oracle, 1e-6);
}

#[test]
fn relu_under_modified_measure() {
    let m = Measure::modified_relu(Interval::symmetric(8.0).unwrap());
    let r = project(|x| x.max(0.0), &gram_schmidt(&m, 2).unwrap());
    assert_coeffs(&r.poly.coeffs, &RELU_MODIFIED_DEG2, 1e-8);
    assert_eq!(r.method, Method::ChebyshevModified);

    let n = 100_000;
    let h = 16.0 / n as f64;
    let samples: Vec<_> = (0..n)
        .map(|i| {
            let x = -8.0 + h * (i as f64 + 0.5);
            (x, x.max(0.0), m.weight(x))
        })
        .collect();
    let oracle = dense_weighted_ls(&samples, 2, 8.0);
    assert_coeffs(&r.poly.coeffs, &oracle, 1e-6);
}

#[test]
fn relu_point_fit_on_uniform_grid() {
    let samples: Vec<_> = (0..=1000)
        .map(|i| {
            let x = -8.0 + 16.0 * i as f64 / 1000.0;
            (x, x.max(0.0))
        })
        .collect();
    let r = fit_points(&samples, 2).unwrap();
    assert_coeffs(&r.poly.coeffs, &RELU_POINTS_DEG2, 1e-9);
}

#[test]
fn derivative_method_chebyshev_l8() {
    let m = Measure::chebyshev(8.0).unwrap();
    let (r, q) = relu_via_derivative(&m, 2).unwrap();
    assert_eq!(r.poly.coeffs.len(), 4);
    assert_coeffs(&r.poly.coeffs, &METHOD5_CHEB8, 1e-9);
    assert!((r.sup_error - METHOD5_CHEB8_SUP).abs() < 1e-9);
    assert_eq!(r.poly.derivative().coeffs, q.coeffs);
}

#[test]
fn taylor_sup_errors() {
    let iv = Interval::symmetric(8.0).unwrap();
    let t = taylor_poly(Activation::Sigmoid, 0.0, 3).unwrap();
    assert!((sup_error(sigmoid, &t, iv, 10_001) - SIGMOID_TAYLOR3_SUP).abs() < 1e-9);
    let t = taylor_relu(0.0, 3).unwrap();
    assert!((sup_error(|x| x.max(0.0), &t, iv, 10_001) - TAYLOR_RELU3_SUP).abs() < 1e-9);
}

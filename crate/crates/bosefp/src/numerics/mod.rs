//! Shared numerical kernels: quadrature, root finding, tridiagonal solves,
//! special functions and small fitting helpers.

pub mod quad;
pub mod root;
pub mod special;
pub mod tridiag;

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// First derivative at the middle of three points on a non-uniform grid,
/// second order accurate.
#[inline]
pub fn deriv3(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    -f0 * h2 / (h1 * (h1 + h2)) + f1 * (h2 - h1) / (h1 * h2) + f2 * h1 / (h2 * (h1 + h2))
}

/// One-sided first derivative at the last of three points, second order.
#[inline]
pub fn deriv3_end(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    f0 * h2 / (h1 * (h1 + h2)) - f1 * (h1 + h2) / (h1 * h2) + f2 * (h1 + 2.0 * h2) / (h2 * (h1 + h2))
}

/// One-sided first derivative at the first of three points, second order.
#[inline]
pub fn deriv3_start(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    -f0 * (2.0 * h1 + h2) / (h1 * (h1 + h2)) + f1 * (h1 + h2) / (h1 * h2)
        - f2 * h1 / (h2 * (h1 + h2))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let (slope, icept) = super::linear_fit(&x, &y);
        assert_relative_eq!(slope, 2.0, max_relative = 1e-14);
        assert_relative_eq!(icept, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn derivatives_exact_on_quadratics() {
        let f = |x: f64| 3.0 * x * x - x + 2.0;
        let d = |x: f64| 6.0 * x - 1.0;
        let (x0, x1, x2) = (0.3, 0.45, 0.7);
        assert_relative_eq!(
            super::deriv3(x0, x1, x2, f(x0), f(x1), f(x2)),
            d(x1),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            super::deriv3_end(x0, x1, x2, f(x0), f(x1), f(x2)),
            d(x2),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            super::deriv3_start(x0, x1, x2, f(x0), f(x1), f(x2)),
            d(x0),
            max_relative = 1e-12
        );
    }
}

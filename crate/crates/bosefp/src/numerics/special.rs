//! Small special-function helpers: Riemann zeta, half-integer gamma,
//! unit-sphere area.

use std::f64::consts::PI;

/// Riemann zeta for real s > 1 by Euler-Maclaurin summation.
pub fn riemann_zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta requires s > 1");
    let n = 24usize;
    let mut sum = 0.0;
    for k in 1..n {
        sum += (k as f64).powf(-s);
    }
    let nf = n as f64;
    sum += nf.powf(1.0 - s) / (s - 1.0);
    sum += 0.5 * nf.powf(-s);
    // Bernoulli correction terms B2, B4, B6, B8.
    let bern = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0];
    let mut rising = s; // s (s+1) ... (s+2k-2)
    let mut npow = nf.powf(-s - 1.0);
    let mut fact = 2.0; // (2k)!
    for (k, b) in bern.iter().enumerate() {
        sum += b / fact * rising * npow;
        rising *= (s + 2.0 * k as f64 + 1.0) * (s + 2.0 * k as f64 + 2.0);
        npow /= nf * nf;
        let m = 2.0 * (k as f64 + 1.0);
        fact *= (m + 1.0) * (m + 2.0);
    }
    sum
}

/// Gamma(n/2) for positive integer n, exact up to f64 rounding.
pub fn gamma_half(n: u32) -> f64 {
    assert!(n >= 1);
    if n % 2 == 0 {
        // Gamma(k) = (k-1)!
        let k = n / 2;
        (1..k).map(|j| j as f64).product()
    } else {
        // Gamma(k + 1/2) = (2k-1)!! / 2^k * sqrt(pi)
        let k = (n - 1) / 2;
        let mut acc = PI.sqrt();
        for j in 1..=k {
            acc *= j as f64 - 0.5;
        }
        acc
    }
}

/// Surface area of the unit sphere in R^d: 2 pi^{d/2} / Gamma(d/2).
pub fn unit_sphere_area(d: u32) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zeta_reference_values() {
        assert_relative_eq!(riemann_zeta(2.0), PI * PI / 6.0, max_relative = 1e-13);
        assert_relative_eq!(riemann_zeta(4.0), PI.powi(4) / 90.0, max_relative = 1e-13);
        // Known high-precision value of zeta(3/2).
        assert_relative_eq!(riemann_zeta(1.5), 2.612_375_348_685_488_3, max_relative = 1e-12);
    }

    #[test]
    fn gamma_half_values() {
        assert_relative_eq!(gamma_half(2), 1.0);
        assert_relative_eq!(gamma_half(1), PI.sqrt());
        assert_relative_eq!(gamma_half(3), PI.sqrt() / 2.0, max_relative = 1e-15);
        assert_relative_eq!(gamma_half(6), 2.0);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, max_relative = 1e-15);
    }
}

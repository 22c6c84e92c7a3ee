//! Mobility cutoff profile.
//!
//! The profile `eta` equals `s^gamma` on `[0, 1]`, has vanishing derivative
//! beyond `s = 2`, and `eta(s)/s^gamma` is non-increasing. It is built by
//! integrating `eta'(s) = gamma s^{gamma-1} chi(s)` where `chi` is a C^2
//! quintic blend that drops from one to zero across `[1, 2]`. The required
//! monotonicity of `eta/s^gamma` is re-verified numerically on a dense grid
//! at construction time.

use crate::error::{Error, Result};
use crate::numerics::quad;

const KNOTS: usize = 1024;

#[derive(Debug, Clone)]
pub struct CutoffProfile {
    gamma: f64,
    /// eta at uniform knots over [1, 2].
    table: Vec<f64>,
    eta_two: f64,
}

/// Quintic smoothstep: 0 -> 1 on [0, 1] with vanishing first and second
/// derivatives at both ends.
#[inline]
fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// Blend factor: 1 on [0, 1], 0 on [2, inf).
#[inline]
fn chi(s: f64) -> f64 {
    1.0 - smoothstep(s - 1.0)
}

impl CutoffProfile {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0) {
            return Err(Error::Config(format!("cutoff requires gamma >= 1, got {gamma}")));
        }
        let h = 1.0 / KNOTS as f64;
        let mut table = Vec::with_capacity(KNOTS + 1);
        let mut acc = 1.0; // eta(1) = 1
        table.push(acc);
        let dens = |s: f64| gamma * s.powf(gamma - 1.0) * chi(s);
        for i in 0..KNOTS {
            let a = 1.0 + i as f64 * h;
            acc += quad::gauss16(&dens, a, a + h);
            table.push(acc);
        }
        let profile = Self { gamma, table, eta_two: acc };
        profile.verify_monotone_ratio()?;
        Ok(profile)
    }

    /// eta(s) for s >= 0. Negative arguments are out of scope for the
    /// isotropic solver; the profile extends evenly by definition.
    pub fn eta(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        if s <= 1.0 {
            self.pow_gamma(s)
        } else if s >= 2.0 {
            self.eta_two
        } else {
            // Hermite cubic between uniform knots with analytic slopes.
            let x = (s - 1.0) * KNOTS as f64;
            let i = (x as usize).min(KNOTS - 1);
            let t = x - i as f64;
            let h = 1.0 / KNOTS as f64;
            let s0 = 1.0 + i as f64 * h;
            let s1 = s0 + h;
            let (f0, f1) = (self.table[i], self.table[i + 1]);
            let (d0, d1) = (self.eta_prime(s0), self.eta_prime(s1));
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * f0
                + (t3 - 2.0 * t2 + t) * h * d0
                + (-2.0 * t3 + 3.0 * t2) * f1
                + (t3 - t2) * h * d1
        }
    }

    /// eta'(s), analytic everywhere.
    pub fn eta_prime(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        if s >= 2.0 {
            0.0
        } else {
            self.gamma * s.powf(self.gamma - 1.0) * chi(s)
        }
    }

    /// eta(2), the constant plateau value.
    pub fn eta_two(&self) -> f64 {
        self.eta_two
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn pow_gamma(&self, s: f64) -> f64 {
        if self.gamma == 1.0 {
            s
        } else {
            s.powf(self.gamma)
        }
    }

    /// Check that s -> eta(s)/s^gamma is non-increasing on a dense grid.
    fn verify_monotone_ratio(&self) -> Result<()> {
        let mut prev = f64::INFINITY;
        let n = 8192;
        for i in 1..=n {
            let s = 2.5 * i as f64 / n as f64;
            let ratio = self.eta(s) / self.pow_gamma(s);
            if ratio > prev * (1.0 + 1e-11) {
                return Err(Error::Config(format!(
                    "cutoff profile violates monotonicity of eta/s^gamma at s = {s}"
                )));
            }
            prev = prev.min(ratio);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_law_below_one() {
        let c = CutoffProfile::new(1.0).unwrap();
        assert_relative_eq!(c.eta(0.5), 0.5);
        assert_relative_eq!(c.eta(1.0), 1.0);
        let c2 = CutoffProfile::new(2.0).unwrap();
        assert_relative_eq!(c2.eta(0.5), 0.25);
    }

    #[test]
    fn flat_beyond_two() {
        let c = CutoffProfile::new(1.5).unwrap();
        assert_relative_eq!(c.eta(2.0), c.eta(3.0));
        assert_relative_eq!(c.eta_prime(2.5), 0.0);
    }

    #[test]
    fn gamma_one_closed_form_on_blend() {
        // For gamma = 1, eta(s) = 1 + (s-1) - int_0^{s-1} smoothstep.
        let c = CutoffProfile::new(1.0).unwrap();
        let s = 1.37_f64;
        let x = s - 1.0;
        let int_smooth = x.powi(4) * (2.5 + x * (-3.0 + x)); // 2.5 x^4 - 3 x^5 + x^6
        assert_relative_eq!(c.eta(s), 1.0 + x - int_smooth, max_relative = 1e-10);
    }

    #[test]
    fn interpolation_matches_quadrature() {
        let c = CutoffProfile::new(2.3).unwrap();
        for &s in &[1.11, 1.5, 1.93] {
            let direct = 1.0
                + quad::integrate(|t| c.eta_prime(t), 1.0, s, 1e-13, 1e-13).unwrap();
            assert_relative_eq!(c.eta(s), direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn ratio_monotone_holds_for_various_gamma() {
        for &g in &[1.0, 1.5, 2.0, 3.0] {
            assert!(CutoffProfile::new(g).is_ok(), "gamma = {g}");
        }
    }
}

//! The convex potential `Phi` with `Phi'' = 1/h`, its slope and inverse
//! slope, and the regularized counterpart `Phi_eps` with `Phi_eps'' = 1/h_eps`.

use super::ModelParams;
use crate::error::{Error, Result};
use crate::numerics::{quad, root};

const QTOL: f64 = 1e-12;

impl ModelParams {
    /// `Phi(s) = (1/gamma) int_0^s log(sigma^gamma / (1 + sigma^gamma)) d sigma`,
    /// normalized by `Phi(0) = 0`. Closed form for gamma = 1, quadrature with
    /// the logarithmic part integrated analytically otherwise.
    pub fn potential(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain(format!("potential requires s >= 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let g = self.gamma();
        if g == 1.0 {
            // s ln s - (1+s) ln(1+s), written to avoid the large-s cancellation
            return Ok(-s * (1.0 / s).ln_1p() - s.ln_1p());
        }
        if s <= 1.0 {
            // Phi(s) = (s ln s - s) - (1/gamma) int_0^s ln(1 + sigma^gamma)
            let rest = quad::integrate(|t| t.powf(g).ln_1p(), 0.0, s, QTOL, QTOL)?;
            Ok(s * s.ln() - s - rest / g)
        } else {
            // continue from Phi(1) without large-term cancellation
            let phi1 = {
                let rest = quad::integrate(|t| t.powf(g).ln_1p(), 0.0, 1.0, QTOL, QTOL)?;
                -1.0 - rest / g
            };
            let tail = quad::integrate(|t| t.powf(-g).ln_1p(), 1.0, s, QTOL, QTOL)?;
            Ok(phi1 - tail / g)
        }
    }

    /// `Phi'(s) = -(1/gamma) log(s^{-gamma} + 1)`, strictly increasing onto
    /// `(-inf, 0)`.
    pub fn potential_slope(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Err(Error::Domain(format!("potential_slope requires s > 0, got {s}")));
        }
        Ok(self.potential_slope_unchecked(s))
    }

    #[inline]
    pub(crate) fn potential_slope_unchecked(&self, s: f64) -> f64 {
        let g = self.gamma();
        if g == 1.0 {
            -(1.0 / s).ln_1p()
        } else {
            -s.powf(-g).ln_1p() / g
        }
    }

    /// Inverse of `Phi'`: `x -> (e^{-gamma x} - 1)^{-1/gamma}` on `x < 0`.
    pub fn slope_inverse(&self, x: f64) -> Result<f64> {
        if x >= 0.0 {
            return Err(Error::Domain(format!("slope_inverse requires x < 0, got {x}")));
        }
        let g = self.gamma();
        Ok((-g * x).exp_m1().powf(-1.0 / g))
    }

    /// Build the regularized potential for `eps > 0` (root-finds the
    /// truncation constant `B_eps`).
    pub fn regularized_potential(&self, eps: f64) -> Result<RegularizedPotential> {
        RegularizedPotential::new(self, eps)
    }
}

/// The truncated potential `Phi_eps` of the regularized model:
/// `Phi_eps'(s) = -int_s^{B_eps} d sigma / h_eps(sigma)` where `B_eps > 1/eps`
/// matches the tail integral of `1/h`, so that `Phi_eps = Phi` on
/// `[0, 1/eps]` and `Phi_eps >= Phi` everywhere.
#[derive(Debug, Clone)]
pub struct RegularizedPotential {
    params: ModelParams,
    eps: f64,
    inv_eps: f64,
    /// target tail mass `int_{1/eps}^inf d sigma / h = (1/gamma) log(1 + eps^gamma)`
    tail_target: f64,
    b_eps: f64,
    /// slope of `h_eps(s)/s` beyond `2/eps`
    lin_coeff: f64,
    /// `int_{1/eps}^{2/eps} d sigma / h_eps`
    u_mid: f64,
}

impl RegularizedPotential {
    fn new(params: &ModelParams, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Config(format!("regularized potential requires eps in (0, 1], got {eps}")));
        }
        let g = params.gamma();
        let inv_eps = 1.0 / eps;
        let tail_target = eps.powf(g).ln_1p() / g;
        let lin_coeff = 1.0 + eps.powf(-g) * params.cutoff().eta_two();
        let pm = params.clone();
        let inv_h = move |t: f64| 1.0 / pm.mobility_at_unchecked(t, eps);
        let u_mid = quad::integrate(&inv_h, inv_eps, 2.0 * inv_eps, QTOL, QTOL)?;
        // u(x) - tail_target is increasing; expand the bracket from 2/eps.
        let u_of = {
            let inv_h = inv_h.clone();
            move |x: f64| -> f64 {
                if x <= 2.0 * inv_eps {
                    quad::integrate(&inv_h, inv_eps, x, QTOL, QTOL).unwrap_or(f64::NAN)
                } else {
                    u_mid + (x * eps / 2.0).ln() / lin_coeff
                }
            }
        };
        let b_eps = root::brent_expanding(|x| u_of(x) - tail_target, inv_eps, 2.0 * inv_eps, 1e-12)
            .map_err(|e| {
                Error::Config(format!("B_eps root finding failed for eps = {eps}: {e}"))
            })?;
        Ok(Self {
            params: params.clone(),
            eps,
            inv_eps,
            tail_target,
            b_eps,
            lin_coeff,
            u_mid,
        })
    }

    pub fn b_eps(&self) -> f64 {
        self.b_eps
    }

    /// `int_{1/eps}^{x} d sigma / h_eps(sigma)` for `x >= 1/eps`.
    fn u(&self, x: f64) -> f64 {
        debug_assert!(x >= self.inv_eps * (1.0 - 1e-12));
        if x <= 2.0 * self.inv_eps {
            let eps = self.eps;
            let pm = &self.params;
            quad::integrate(
                |t| 1.0 / pm.mobility_at_unchecked(t, eps),
                self.inv_eps,
                x,
                QTOL,
                QTOL,
            )
            .unwrap_or(f64::NAN)
        } else {
            self.u_mid + (x * self.eps / 2.0).ln() / self.lin_coeff
        }
    }

    /// `Phi_eps'(s)`: equals `Phi'(s)` for `s <= 1/eps`, vanishes at `B_eps`,
    /// grows logarithmically beyond.
    pub fn slope(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Err(Error::Domain(format!("slope requires s > 0, got {s}")));
        }
        if s <= self.inv_eps {
            self.params.potential_slope(s)
        } else {
            Ok(self.u(s) - self.tail_target)
        }
    }

    /// `Phi_eps(s) = int_0^s Phi_eps'`.
    pub fn value(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain(format!("value requires s >= 0, got {s}")));
        }
        if s <= self.inv_eps {
            return self.params.potential(s);
        }
        let base = self.params.potential(self.inv_eps)?;
        // int_{1/eps}^{s} Phi_eps'(sigma) d sigma
        //   = int_{1/eps}^{s} (s - tau)/h_eps(tau) d tau - tail_target (s - 1/eps)
        let eps = self.eps;
        let pm = &self.params;
        let split = (2.0 * self.inv_eps).min(s);
        let mut inner = quad::integrate(
            |t| (s - t) / pm.mobility_at_unchecked(t, eps),
            self.inv_eps,
            split,
            QTOL,
            QTOL * s.max(1.0),
        )?;
        if s > split {
            // beyond 2/eps the mobility is exactly linear: closed form
            inner += (s * (s / split).ln() - (s - split)) / self.lin_coeff;
        }
        Ok(base + inner - self.tail_target * (s - self.inv_eps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(gamma: f64) -> ModelParams {
        ModelParams::new(gamma, 3, 0.0).unwrap()
    }

    #[test]
    fn potential_zero_and_reference() {
        let p = params(1.0);
        assert_eq!(p.potential(0.0).unwrap(), 0.0);
        // Phi(1) = -2 ln 2, checked against the quadrature of the integrand
        let v = p.potential(1.0).unwrap();
        assert_relative_eq!(v, -2.0 * 2f64.ln(), max_relative = 1e-12);
        let by_quad = quad::integrate(|t| (t / (1.0 + t)).ln(), 1e-300, 1.0, 1e-13, 1e-13).unwrap();
        assert_relative_eq!(v, by_quad, max_relative = 1e-9);
    }

    #[test]
    fn potential_sublinear_at_infinity() {
        let p = params(1.0);
        let s = 1e3;
        let v = p.potential(s).unwrap();
        assert!(v < 0.0);
        assert!(v.abs() / s < 0.01 * s.ln(), "sublinearity: {v}");
    }

    #[test]
    fn general_gamma_matches_direct_quadrature() {
        let p = params(2.0);
        for &s in &[0.3, 1.7, 40.0] {
            let direct = quad::integrate(
                |t| (t.powf(2.0) / (1.0 + t.powf(2.0))).ln() / 2.0,
                1e-300,
                s,
                1e-12,
                1e-12,
            )
            .unwrap();
            assert_relative_eq!(p.potential(s).unwrap(), direct, max_relative = 1e-8);
        }
    }

    #[test]
    fn slope_and_inverse_roundtrip() {
        let p = params(1.0);
        assert_relative_eq!(p.potential_slope(1.0).unwrap(), -2f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(p.slope_inverse(-2f64.ln()).unwrap(), 1.0, max_relative = 1e-14);
        // asymptote: Phi'(s) -> 0^- as s -> inf
        assert!(p.potential_slope(1e12).unwrap() < 0.0);
        assert!(p.potential_slope(1e12).unwrap() > -1e-11);
        for &s in &[1e-6, 1e-2, 1.0, 1e3, 1e6] {
            let x = p.potential_slope(s).unwrap();
            assert_relative_eq!(p.slope_inverse(x).unwrap(), s, max_relative = 1e-12);
        }
    }

    #[test]
    fn slope_domain_errors() {
        let p = params(1.0);
        assert!(p.potential_slope(0.0).is_err());
        assert!(p.slope_inverse(0.1).is_err());
    }

    #[test]
    fn phi_second_derivative_is_inverse_mobility() {
        let p = params(1.5);
        for &s in &[0.4, 2.0, 9.0] {
            let h = 1e-4 * s;
            let d2 = (p.potential(s + h).unwrap() - 2.0 * p.potential(s).unwrap()
                + p.potential(s - h).unwrap())
                / (h * h);
            assert_relative_eq!(d2, 1.0 / p.mobility_unreg(s), max_relative = 1e-5);
        }
    }

    #[test]
    fn regularized_matches_phi_below_cutoff() {
        let p = params(1.0);
        let reg = p.regularized_potential(0.1).unwrap();
        for &s in &[0.5, 3.0, 9.999] {
            assert_relative_eq!(reg.slope(s).unwrap(), p.potential_slope(s).unwrap(), max_relative = 1e-10);
            assert_relative_eq!(reg.value(s).unwrap(), p.potential(s).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn regularized_slope_vanishes_at_b_eps() {
        let p = params(1.0);
        let reg = p.regularized_potential(0.1).unwrap();
        assert!(reg.b_eps() > 10.0);
        let at_b = reg.slope(reg.b_eps()).unwrap();
        assert!(at_b.abs() < 1e-10, "Phi_eps'(B_eps) = {at_b}");
    }

    #[test]
    fn regularized_dominates_phi_above_cutoff() {
        let p = params(1.0);
        let reg = p.regularized_potential(0.1).unwrap();
        // slope ordering at s = 2/eps, and Phi_eps >= Phi pointwise
        let s = 20.0;
        assert!(reg.slope(s).unwrap() > p.potential_slope(s).unwrap());
        for &s in &[12.0, 20.0, 60.0, 200.0] {
            let lhs = reg.value(s).unwrap();
            let rhs = p.potential(s).unwrap();
            assert!(lhs >= rhs - 1e-10 * rhs.abs(), "Phi_eps({s}) = {lhs} < Phi = {rhs}");
        }
    }

    #[test]
    fn regularized_second_derivative_is_inverse_h_eps() {
        let p = params(1.0);
        let eps = 0.2;
        let reg = p.regularized_potential(eps).unwrap();
        for &s in &[2.0, 6.0, 12.0] {
            let h = 1e-4 * s;
            let d2 = (reg.value(s + h).unwrap() - 2.0 * reg.value(s).unwrap()
                + reg.value(s - h).unwrap())
                / (h * h);
            assert_relative_eq!(d2, 1.0 / p.mobility_at(s, eps).unwrap(), max_relative = 1e-4);
        }
    }
}

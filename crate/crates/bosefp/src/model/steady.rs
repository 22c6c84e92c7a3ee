//! Steady states, critical mass and the mass-constrained free-energy
//! minimizer.

use super::ModelParams;
use crate::error::{Error, Result};
use crate::numerics::special::{gamma_half, riemann_zeta};
use crate::numerics::{quad, root};

const QTOL: f64 = 1e-12;
/// Outer integration radius; steady profiles decay like exp(-r^2/2) so the
/// tail beyond this is far below every tolerance in use.
const R_MAX: f64 = 14.0;
/// Split radius isolating the origin singularity of the critical profile.
const R_SPLIT: f64 = 1e-3;

impl ModelParams {
    /// Steady density `f_{inf,theta}(r) = (e^{gamma(r^2/2 + theta)} - 1)^{-1/gamma}`.
    /// The pair `(theta, r) = (0, 0)` is the unbounded point of the critical
    /// profile and is reported as such rather than as a number.
    pub fn steady_density(&self, theta: f64, r: f64) -> Result<f64> {
        if theta < 0.0 {
            return Err(Error::Domain(format!("steady_density requires theta >= 0, got {theta}")));
        }
        if r < 0.0 {
            return Err(Error::Domain(format!("steady_density requires r >= 0, got {r}")));
        }
        if theta == 0.0 && r == 0.0 {
            return Err(Error::Unbounded("critical profile diverges at the origin".into()));
        }
        Ok(self.steady_density_unchecked(theta, r))
    }

    #[inline]
    pub(crate) fn steady_density_unchecked(&self, theta: f64, r: f64) -> f64 {
        let g = self.gamma();
        let u = 0.5 * r * r + theta;
        if g == 1.0 {
            1.0 / u.exp_m1()
        } else {
            (g * u).exp_m1().powf(-1.0 / g)
        }
    }

    /// Stable evaluation of `f_{inf,0}(r) - c_gamma r^{-2/gamma}`, the
    /// bounded remainder of the critical profile at the origin.
    fn critical_remainder(&self, r: f64) -> f64 {
        let g = self.gamma();
        let w = 0.5 * g * r * r;
        // psi = w / (e^w - 1); f = c_gamma r^{-2/g} psi^{1/g}
        let em1 = w.exp_m1();
        let ratio_m1 = (w - em1) / em1; // psi - 1, stable for small w
        let corr = (ratio_m1.ln_1p() / g).exp_m1(); // psi^{1/g} - 1
        self.c_gamma() * r.powf(-2.0 / g) * corr
    }

    /// Total mass of the steady profile: `c_d int_0^inf f_{inf,theta} r^{d-1} dr`,
    /// strictly decreasing in theta; `theta = 0` gives the critical mass.
    pub fn steady_mass(&self, theta: f64) -> Result<f64> {
        if theta < 0.0 {
            return Err(Error::Domain(format!("steady_mass requires theta >= 0, got {theta}")));
        }
        let d = self.dim() as f64;
        let g = self.gamma();
        if theta > 0.0 {
            let v = quad::integrate(
                |r| self.steady_density_unchecked(theta, r) * r.powf(d - 1.0),
                0.0,
                R_MAX,
                0.0,
                QTOL,
            )?;
            return Ok(self.c_d() * v);
        }
        // theta = 0: integrate the leading power law over [0, delta]
        // analytically and the bounded remainder numerically.
        let p = d - 2.0 / g; // > 0 by supercriticality
        let head = self.c_gamma() * R_SPLIT.powf(p) / p
            + quad::integrate(
                |r| self.critical_remainder(r) * r.powf(d - 1.0),
                0.0,
                R_SPLIT,
                QTOL,
                QTOL,
            )?;
        let tail = quad::integrate(
            |r| self.steady_density_unchecked(0.0, r) * r.powf(d - 1.0),
            R_SPLIT,
            R_MAX,
            0.0,
            QTOL,
        )?;
        Ok(self.c_d() * (head + tail))
    }

    /// Critical mass `m_c = steady_mass(0)`.
    pub fn critical_mass(&self) -> Result<f64> {
        self.steady_mass(0.0)
    }

    /// Independent route to the critical mass: substitute `u = r^2/2`, which
    /// turns the radial integral into a Bose-type integral in `u`.
    pub fn critical_mass_bose_quadrature(&self) -> Result<f64> {
        let d = self.dim() as f64;
        let g = self.gamma();
        let integrand = |u: f64| {
            let f = if g == 1.0 { 1.0 / u.exp_m1() } else { (g * u).exp_m1().powf(-1.0 / g) };
            f * (2.0 * u).powf(0.5 * d - 1.0)
        };
        // split the u-power singularity at zero analytically
        let p = 0.5 * d - 1.0 / g; // > 0 by supercriticality
        let delta = 1e-6_f64;
        let head_exact = g.powf(-1.0 / g) * 2f64.powf(0.5 * d - 1.0) * delta.powf(p) / p;
        // bounded remainder (e^{gu} - 1)^{-1/g} - (gu)^{-1/g}, series-stable
        let head_rest = quad::integrate(
            |u: f64| {
                let em1 = (g * u).exp_m1();
                let ratio_m1 = (g * u - em1) / em1;
                let corr = (ratio_m1.ln_1p() / g).exp_m1();
                (g * u).powf(-1.0 / g) * corr * (2.0 * u).powf(0.5 * d - 1.0)
            },
            0.0,
            delta,
            QTOL,
            QTOL,
        )?;
        let tail = quad::integrate(integrand, delta, 0.5 * R_MAX * R_MAX, 0.0, QTOL)?;
        Ok(self.c_d() * (head_exact + head_rest + tail))
    }

    /// Closed form for gamma = 1: `c_d 2^{(d-2)/2} Gamma(d/2) zeta(d/2)`.
    pub fn critical_mass_closed_form(&self) -> Result<f64> {
        if self.gamma() != 1.0 {
            return Err(Error::Domain("closed-form critical mass requires gamma = 1".into()));
        }
        let d = self.dim();
        let s = d as f64 / 2.0;
        if s <= 1.0 {
            return Err(Error::Domain("closed form requires d > 2".into()));
        }
        Ok(self.c_d() * 2f64.powf(s - 1.0) * gamma_half(d) * riemann_zeta(s))
    }

    /// Solve `steady_mass(theta) = m` for `m <= m_c` by bracketed root
    /// finding (relative tolerance 1e-10).
    pub fn theta_for_mass(&self, m: f64) -> Result<f64> {
        let mc = self.critical_mass()?;
        if m <= 0.0 || m > mc {
            return Err(Error::Domain(format!("theta_for_mass requires 0 < m <= m_c = {mc}, got {m}")));
        }
        if m == mc {
            return Ok(0.0);
        }
        // steady_mass is strictly decreasing; expand the upper bracket.
        let mut hi = 1.0;
        while self.steady_mass(hi)? > m {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::RootFinding("theta bracket expansion failed".into()));
            }
        }
        root::brent(|t| self.steady_mass(t).unwrap_or(f64::NAN) - m, 0.0, hi, 1e-10)
    }

    /// The unique minimizer of the free energy at mass `m`: a smooth steady
    /// state for subcritical mass, the critical profile plus a condensate at
    /// the origin otherwise.
    pub fn minimizer(&self, m: f64) -> Result<MinimizerMeasure> {
        if m <= 0.0 {
            return Err(Error::Domain(format!("minimizer requires m > 0, got {m}")));
        }
        let mc = self.critical_mass()?;
        if m > mc {
            Ok(MinimizerMeasure { params: self.clone(), mass: m, theta: 0.0, condensate: m - mc })
        } else {
            let theta = self.theta_for_mass(m)?;
            Ok(MinimizerMeasure { params: self.clone(), mass: m, theta, condensate: 0.0 })
        }
    }

    /// Free energy of the minimizer at mass `m`. The condensate carries no
    /// energy: it sits at `v = 0` and the potential is sublinear.
    pub fn minimizer_energy(&self, m: f64) -> Result<f64> {
        let min = self.minimizer(m)?;
        energy_of_density(self, |r| self.steady_density_unchecked(min.theta, r))
    }
}

/// Free energy `c_d int_0^inf [r^2/2 g + Phi(g)] r^{d-1} dr` of a radial
/// density given as a callable, by adaptive quadrature. Serves as the
/// reference route for the grid-based evaluation in the diagnostics module.
pub fn energy_of_density<F: Fn(f64) -> f64>(params: &ModelParams, g: F) -> Result<f64> {
    let d = params.dim() as f64;
    let v = quad::integrate(
        |r| {
            let gv = g(r);
            if gv <= 0.0 {
                return 0.0;
            }
            (0.5 * r * r * gv + params.potential(gv).unwrap_or(f64::NAN)) * r.powf(d - 1.0)
        },
        0.0,
        R_MAX,
        1e-10,
        1e-10,
    )?;
    Ok(params.c_d() * v)
}

/// The minimizing measure at a given mass: a steady density plus (when the
/// mass is supercritical) a Dirac component at the origin.
#[derive(Debug, Clone)]
pub struct MinimizerMeasure {
    params: ModelParams,
    mass: f64,
    theta: f64,
    condensate: f64,
}

impl MinimizerMeasure {
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Mass of the Dirac component at the origin.
    pub fn condensate(&self) -> f64 {
        self.condensate
    }

    /// Density of the regular part at radius `r`.
    pub fn density(&self, r: f64) -> Result<f64> {
        self.params.steady_density(self.theta, r)
    }

    /// Mass of the regular part by quadrature.
    pub fn regular_mass(&self) -> Result<f64> {
        self.params.steady_mass(self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 3, 0.0).unwrap()
    }

    #[test]
    fn density_reference_points() {
        let p = params();
        // exponent equals ln 2 at r = sqrt(2 ln 2)
        let r = (2.0 * 2f64.ln()).sqrt();
        assert_relative_eq!(p.steady_density(0.0, r).unwrap(), 1.0, max_relative = 1e-13);
        // high-precision value at r = 0.1
        assert_relative_eq!(
            p.steady_density(0.0, 0.1).unwrap(),
            199.500_416_666_493_06,
            max_relative = 1e-12
        );
    }

    #[test]
    fn density_origin_power_law() {
        // f_{inf,0}(r) = c_gamma r^{-2/gamma} (1 + o(1)) as r -> 0
        let p = params();
        for &r in &[1e-2, 1e-4, 1e-6] {
            let f = p.steady_density(0.0, r).unwrap();
            let lead = p.c_gamma() * r.powf(-2.0 / p.gamma());
            assert!((f / lead - 1.0).abs() < 0.3 * r * r + 1e-12, "r = {r}");
        }
    }

    #[test]
    fn density_unbounded_at_origin_is_signaled() {
        let p = params();
        assert!(matches!(p.steady_density(0.0, 0.0), Err(Error::Unbounded(_))));
        assert!(p.steady_density(1.0, 0.0).is_ok());
    }

    #[test]
    fn critical_mass_three_routes_agree() {
        let p = params();
        let closed = p.critical_mass_closed_form().unwrap();
        // 2 sqrt(2) pi^{3/2} zeta(3/2)
        let reference = 2.0 * 2f64.sqrt() * PI.powf(1.5) * riemann_zeta(1.5);
        assert_relative_eq!(closed, reference, max_relative = 1e-13);
        assert!((reference - 41.14).abs() < 0.01);
        assert_relative_eq!(p.critical_mass().unwrap(), reference, max_relative = 1e-8);
        assert_relative_eq!(p.critical_mass_bose_quadrature().unwrap(), reference, max_relative = 1e-8);
    }

    #[test]
    fn steady_mass_monotone_and_vanishing() {
        let p = params();
        let m0 = p.steady_mass(0.0).unwrap();
        let m1 = p.steady_mass(0.5).unwrap();
        let m2 = p.steady_mass(2.0).unwrap();
        assert!(m0 > m1 && m1 > m2);
        assert!(p.steady_mass(40.0).unwrap() < 1e-12 * m0);
    }

    #[test]
    fn minimizer_branches() {
        let p = params();
        let mc = p.critical_mass().unwrap();

        let at_crit = p.minimizer(mc).unwrap();
        assert_eq!(at_crit.theta(), 0.0);
        assert_eq!(at_crit.condensate(), 0.0);

        let sup = p.minimizer(2.0 * mc).unwrap();
        assert_eq!(sup.theta(), 0.0);
        assert_relative_eq!(sup.condensate(), mc, max_relative = 1e-12);

        let sub = p.minimizer(0.5 * mc).unwrap();
        assert_eq!(sub.condensate(), 0.0);
        let back = p.steady_mass(sub.theta()).unwrap();
        assert!((back - 0.5 * mc).abs() < 1e-8 * mc, "bisection residual {}", back - 0.5 * mc);
    }

    #[test]
    fn condensate_piecewise_linear_in_mass() {
        let p = params();
        let mc = p.critical_mass().unwrap();
        for &frac in &[0.2, 0.7, 1.0, 1.3, 2.5] {
            let m = frac * mc;
            let got = p.minimizer(m).unwrap().condensate();
            let expect = (m - mc).max(0.0);
            assert!((got - expect).abs() <= 1e-9 * mc, "m = {m}: {got} vs {expect}");
        }
    }

    #[test]
    fn stationary_flux_vanishes() {
        // d/dr f + h(f) r = 0 for the steady profile, checked by finite
        // differences at several radii and theta.
        let p = params();
        for &(theta, r) in &[(0.0, 0.3), (0.0, 1.4), (1.0, 0.7), (2.0, 2.0)] {
            let h = 1e-6;
            let fp = (p.steady_density(theta, r + h).unwrap() - p.steady_density(theta, r - h).unwrap())
                / (2.0 * h);
            let f = p.steady_density(theta, r).unwrap();
            let flux = fp + p.mobility_unreg(f) * r;
            let scale = p.mobility_unreg(f) * r;
            assert!(flux.abs() <= 1e-6 * scale.max(1.0), "flux = {flux} at ({theta}, {r})");
        }
    }

    #[test]
    fn minimizer_energy_properties() {
        let p = params();
        let mc = p.critical_mass().unwrap();
        // supercritical masses share the critical-profile energy
        let e1 = p.minimizer_energy(1.5 * mc).unwrap();
        let e2 = p.minimizer_energy(3.0 * mc).unwrap();
        assert_relative_eq!(e1, e2, max_relative = 1e-9);

        // minimizer beats a same-mass Gaussian test profile
        for &frac in &[0.3, 0.8] {
            let m = frac * mc;
            let e_min = p.minimizer_energy(m).unwrap();
            let amp = m / (2.0 * PI).powf(1.5);
            let e_gauss = energy_of_density(&p, |r| amp * (-0.5 * r * r).exp()).unwrap();
            assert!(e_min <= e_gauss + 1e-9, "m = {m}: {e_min} vs gaussian {e_gauss}");
        }

        // vanishing mass, vanishing energy
        let e_small = p.minimizer_energy(1e-6).unwrap();
        assert!(e_small.abs() < 1e-4, "H -> 0: {e_small}");
    }
}

//! Model constants, mobility, potential and steady-state theory.

mod cutoff;
mod potential;
mod steady;

pub use cutoff::CutoffProfile;
pub use potential::RegularizedPotential;
pub use steady::{energy_of_density, MinimizerMeasure};

use crate::error::{Error, Result};
use crate::numerics::special::unit_sphere_area;
use std::sync::Arc;

/// Model parameters `(gamma, d, eps)` with derived constants. `eps = 0`
/// denotes the unregularized mobility.
#[derive(Debug, Clone)]
pub struct ModelParams {
    gamma: f64,
    dim: u32,
    eps: f64,
    c_gamma: f64,
    c_d: f64,
    cutoff: Arc<CutoffProfile>,
}

impl ModelParams {
    pub fn new(gamma: f64, dim: u32, eps: f64) -> Result<Self> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("gamma must satisfy gamma >= 1, got {gamma}")));
        }
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Config(format!("eps must lie in [0, 1], got {eps}")));
        }
        if gamma * dim as f64 / 2.0 <= 1.0 {
            return Err(Error::Config(format!(
                "supercriticality gamma*d/2 > 1 required, got gamma = {gamma}, d = {dim}"
            )));
        }
        let cutoff = Arc::new(CutoffProfile::new(gamma)?);
        Ok(Self {
            gamma,
            dim,
            eps,
            c_gamma: (2.0 / gamma).powf(1.0 / gamma),
            c_d: unit_sphere_area(dim),
            cutoff,
        })
    }

    /// Same model with a different regularization level (shares the cutoff).
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Config(format!("eps must lie in [0, 1], got {eps}")));
        }
        let mut p = self.clone();
        p.eps = eps;
        Ok(p)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `c_gamma = (2/gamma)^{1/gamma}`, the amplitude of the critical
    /// power law at the origin.
    pub fn c_gamma(&self) -> f64 {
        self.c_gamma
    }

    /// Area of the unit sphere in R^d.
    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    pub fn cutoff(&self) -> &CutoffProfile {
        &self.cutoff
    }

    /// True when `2/gamma + 2 - d > 0`; profile-checking operations require it.
    pub fn profile_regime(&self) -> bool {
        2.0 / self.gamma + 2.0 - self.dim as f64 > 0.0
    }

    #[inline]
    pub(crate) fn pow_gamma(&self, s: f64) -> f64 {
        if self.gamma == 1.0 {
            s
        } else {
            s.powf(self.gamma)
        }
    }

    /// Unregularized mobility `h(s) = s (1 + s^gamma)`.
    #[inline]
    pub fn mobility_unreg(&self, s: f64) -> f64 {
        s * (1.0 + self.pow_gamma(s))
    }

    /// Regularized mobility `h_eps(s) = s (1 + eps^{-gamma} eta(eps s))` at
    /// the model's own eps; `h_0 = h`.
    pub fn mobility(&self, s: f64) -> Result<f64> {
        self.mobility_at(s, self.eps)
    }

    /// `h_eps` at an explicit regularization level.
    pub fn mobility_at(&self, s: f64, eps: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain(format!("mobility requires s >= 0, got {s}")));
        }
        Ok(self.mobility_at_unchecked(s, eps))
    }

    #[inline]
    pub(crate) fn mobility_at_unchecked(&self, s: f64, eps: f64) -> f64 {
        if eps == 0.0 {
            return self.mobility_unreg(s);
        }
        let es = eps * s;
        if es <= 1.0 {
            // identity region: h_eps = h exactly
            self.mobility_unreg(s)
        } else if es >= 2.0 {
            s * (1.0 + self.eps_pow_neg_gamma(eps) * self.cutoff.eta_two())
        } else {
            s * (1.0 + self.eps_pow_neg_gamma(eps) * self.cutoff.eta(es))
        }
    }

    /// `vartheta_eps(s) = s eta_eps(s) = h_eps(s) - s`.
    #[inline]
    pub(crate) fn theta_eps(&self, s: f64, eps: f64) -> f64 {
        if eps == 0.0 {
            s * self.pow_gamma(s)
        } else {
            let es = eps * s;
            if es <= 1.0 {
                s * self.pow_gamma(s)
            } else if es >= 2.0 {
                s * self.eps_pow_neg_gamma(eps) * self.cutoff.eta_two()
            } else {
                s * self.eps_pow_neg_gamma(eps) * self.cutoff.eta(es)
            }
        }
    }

    /// d/ds of `vartheta_eps`, used by the fully implicit stepper.
    #[inline]
    pub(crate) fn theta_eps_prime(&self, s: f64, eps: f64) -> f64 {
        if eps == 0.0 || eps * s <= 1.0 {
            (self.gamma + 1.0) * self.pow_gamma(s)
        } else {
            let es = eps * s;
            let scale = self.eps_pow_neg_gamma(eps);
            if es >= 2.0 {
                scale * self.cutoff.eta_two()
            } else {
                scale * self.cutoff.eta(es) + s * scale * eps * self.cutoff.eta_prime(es)
            }
        }
    }

    #[inline]
    fn eps_pow_neg_gamma(&self, eps: f64) -> f64 {
        if self.gamma == 1.0 {
            1.0 / eps
        } else {
            eps.powf(-self.gamma)
        }
    }
}

//! Empirical verification of the semigroup smoothing estimates
//! `|grad^k F[f](t)|_{L^q_l} <= C_T nu(t)^{-(d/2)(1/p - 1/q) - k/2} |f|_{L^p_l}`
//! and of the weighted-gradient convolution bound from the appendix lemma.

use super::{apply_semigroup, apply_semigroup_gradient, norm_lq_weighted, OracleGrid, SampledDensity};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::quad;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct SmoothingReport {
    pub t: f64,
    pub nu: f64,
    /// Measured `|grad^k F[f](t)|_{L^q_l}`.
    pub lhs: f64,
    /// `C_T nu^{-(d/2)(1/p-1/q) - k/2} |f|_{L^p_l}` with the supplied C.
    pub rhs: f64,
    pub ratio: f64,
    /// The exponent of nu in the bound.
    pub exponent: f64,
}

/// Evaluate both sides of the smoothing estimate for one `(t, p, q, k)`.
/// `c` is the empirical constant (calibrate with `calibrate_smoothing_c`);
/// the time horizon entering `C_T = c exp((d/q' + k) T)` is fixed at T = 1.
#[allow(clippy::too_many_arguments)]
pub fn smoothing_check(
    params: &ModelParams,
    f: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    p: f64,
    q: f64,
    k: u32,
    ell: f64,
    c: f64,
) -> Result<SmoothingReport> {
    if !(1.0 <= p && p <= q) {
        return Err(Error::Domain(format!("smoothing_check requires 1 <= p <= q, got p = {p}, q = {q}")));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("smoothing_check requires t in (0, 1], got {t}")));
    }
    if k > 1 {
        return Err(Error::Domain("smoothing_check supports k in {0, 1}".into()));
    }
    let d = params.dim() as f64;
    let grid = OracleGrid::uniform(1200, 12.0);
    let out = if k == 0 {
        apply_semigroup(params, f, t, grid.r_max(), &grid)?
    } else {
        apply_semigroup_gradient(params, f, t, grid.r_max(), &grid)?
    };
    let lhs = norm_lq_weighted(params, &out, q, ell);
    let f_sampled = SampledDensity {
        grid: grid.clone(),
        values: grid.radii.iter().map(|&r| f(r)).collect(),
    };
    let f_norm = norm_lq_weighted(params, &f_sampled, p, ell);
    let nu = (2.0 * t).exp_m1();
    let exponent = -(d / 2.0) * (1.0 / p - 1.0 / q) - k as f64 / 2.0;
    let horizon = 1.0;
    let q_conj = if q.is_infinite() { 1.0 } else { q / (q - 1.0) };
    let c_t = c * ((d / q_conj + k as f64) * horizon).exp();
    let rhs = c_t * nu.powf(exponent) * f_norm;
    Ok(SmoothingReport { t, nu, lhs, rhs, ratio: lhs / rhs, exponent })
}

/// Calibrate the universal constant empirically: the smallest C making
/// `ratio <= 1` across the given times for fixed `(p, q, k, ell)`.
pub fn calibrate_smoothing_c(
    params: &ModelParams,
    f: &(dyn Fn(f64) -> f64 + Sync),
    times: &[f64],
    p: f64,
    q: f64,
    k: u32,
    ell: f64,
) -> Result<f64> {
    let mut c = 0.0f64;
    for &t in times {
        let rep = smoothing_check(params, f, t, p, q, k, ell, 1.0)?;
        c = c.max(rep.ratio);
    }
    Ok(c)
}

/// Appendix convolution bound: the weighted-gradient kernel application
/// `int |grad_v F(t,v,w)| |e^{-t} w - v| f(w) dw` is L^q-bounded by the
/// L^q norm of f, uniformly for t <= 1. Returns (lhs, |f|_q, ratio); d = 3.
pub fn rdfp_check(
    params: &ModelParams,
    f: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    q: f64,
) -> Result<(f64, f64, f64)> {
    if params.dim() != 3 {
        return Err(Error::Config("rdfp_check implemented for d = 3".into()));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("rdfp_check requires t in (0, 1], got {t}")));
    }
    let nu = (2.0 * t).exp_m1();
    let et = t.exp();
    let grid = OracleGrid::uniform(600, 10.0);
    // angular reduction with the |u|^2 weight:
    // int_{S^2} (|u|^2/nu) G_nu(u) dOmega
    //   = (2 pi nu)^{-3/2} (4 pi nu / (x rho)) [ (1+z-) e^{-z-} - (1+z+) e^{-z+} ] nu
    let kernel = |x: f64, rho: f64| -> f64 {
        let zm = 0.5 * (x - rho) * (x - rho) / nu;
        let zp = 0.5 * (x + rho) * (x + rho) / nu;
        if x * rho / nu < 1e-8 {
            // limit: rho^3 e^{-rho^2/(2 nu)} / nu^2, times the shared prefactor
            rho * rho * rho * (-0.5 * rho * rho / nu).exp() / (nu * nu)
        } else {
            ((1.0 + zm) * (-zm).exp() - (1.0 + zp) * (-zp).exp()) / x
        }
    };
    let width = 14.0 * nu.sqrt();
    let pref = (3.0 * t).exp() * (2.0 * PI * nu).powf(-1.5) * 4.0 * PI * nu;
    let values: Vec<f64> = grid
        .radii
        .iter()
        .map(|&r| {
            let x = et * r;
            let lo = (x - width).max(0.0);
            let hi = (x + width).min(grid.r_max());
            if hi <= lo {
                return 0.0;
            }
            let panels = (((hi - lo) / nu.sqrt().min(0.25)).ceil() as usize + 1).min(400);
            pref * quad::gauss16_composite(&|rho: f64| rho * f(rho) * kernel(x, rho), lo, hi, panels)
        })
        .collect();
    let out = SampledDensity { grid: grid.clone(), values };
    let lhs = norm_lq_weighted(params, &out, q, 0.0);
    let f_sampled = SampledDensity {
        grid: grid.clone(),
        values: grid.radii.iter().map(|&r| f(r)).collect(),
    };
    let f_norm = norm_lq_weighted(params, &f_sampled, q, 0.0);
    Ok((lhs, f_norm, lhs / f_norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 3, 0.5).unwrap()
    }

    #[test]
    fn no_smoothing_needed_when_p_equals_q() {
        // Maxwellian, k = 0, p = q: lhs/|f| stays bounded as t -> 0
        let p = params();
        let f = |r: f64| (2.0 * PI).powf(-1.5) * (-0.5 * r * r).exp();
        let mut worst: f64 = 0.0;
        for &t in &[0.5, 0.1, 0.02, 0.004] {
            let rep = smoothing_check(&p, &f, t, 2.0, 2.0, 0, 0.0, 1.0).unwrap();
            // exponent 0: rhs is just C_T |f|_2
            worst = worst.max(rep.lhs / rep.rhs);
        }
        assert!(worst < 1.0, "p = q ratio blew up: {worst}");
    }

    #[test]
    fn calibrated_constant_caps_ratio() {
        let p = params();
        let f = |r: f64| (-0.5 * r * r / 0.01).exp();
        let times = [0.5, 0.25, 0.1, 0.05];
        let c = calibrate_smoothing_c(&p, &f, &times, 1.0, f64::INFINITY, 0, 0.0).unwrap();
        for &t in &times {
            let rep = smoothing_check(&p, &f, t, 1.0, f64::INFINITY, 0, 0.0, c).unwrap();
            assert!(rep.ratio <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rdfp_bound_uniform_for_gaussian() {
        // the appendix bound: lhs <= C |f|_q with C independent of t <= 1
        let p = params();
        let f = |r: f64| (-0.5 * r * r).exp();
        let mut cs = Vec::new();
        for &t in &[1.0, 0.5, 0.1, 0.02, 0.004] {
            let (_, _, ratio) = rdfp_check(&p, &f, t, 2.0).unwrap();
            cs.push(ratio);
        }
        let cmax = cs.iter().cloned().fold(0.0, f64::max);
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmax.is_finite() && cmax > 0.0);
        // bounded, no blow-up as t -> 0
        assert!(cmax / cmin < 20.0, "ratios spread too widely: {cs:?}");
        for (&t, &c) in [1.0, 0.5, 0.1, 0.02, 0.004].iter().zip(&cs) {
            assert!(c < 50.0, "t = {t}: unbounded ratio {c}");
        }
    }
}

//! Independent short-time reference solver built on the exact kernel of the
//! linear Fokker-Planck equation (Ornstein-Uhlenbeck semigroup) and Duhamel
//! fixed-point iteration, plus empirical checks of the semigroup smoothing
//! estimates. Cross-validates the finite-difference radial solver.

mod duhamel;
mod smoothing;

pub use duhamel::{duhamel_solve, DuhamelConfig, DuhamelSolution};
pub use smoothing::{calibrate_smoothing_c, rdfp_check, smoothing_check, SmoothingReport};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::quad;
use std::f64::consts::PI;

/// Kernel scalings at a fixed positive time.
#[derive(Debug, Clone, Copy)]
pub struct KernelEval {
    pub t: f64,
    /// `nu(t) = e^{2t} - 1`
    pub nu: f64,
    /// `e^{dt}`
    pub scaling: f64,
}

impl KernelEval {
    pub fn new(t: f64, dim: u32) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("kernel requires t > 0, got {t}")));
        }
        Ok(Self { t, nu: (2.0 * t).exp_m1(), scaling: (dim as f64 * t).exp() })
    }
}

/// Fundamental solution `F(t, v, w) = e^{dt} G_{nu(t)}(e^t v - w)` of the
/// linear equation, for points of dimension `v.len() == w.len()`.
pub fn fp_kernel(t: f64, v: &[f64], w: &[f64]) -> Result<f64> {
    if v.len() != w.len() || v.is_empty() {
        return Err(Error::Input("fp_kernel requires matching point dimensions".into()));
    }
    let d = v.len() as u32;
    let k = KernelEval::new(t, d)?;
    let et = t.exp();
    let mut sq = 0.0;
    for (vi, wi) in v.iter().zip(w) {
        let u = et * vi - wi;
        sq += u * u;
    }
    Ok(k.scaling * (2.0 * PI * k.nu).powf(-(d as f64) / 2.0) * (-0.5 * sq / k.nu).exp())
}

/// Uniform radial evaluation grid for the oracle.
#[derive(Debug, Clone)]
pub struct OracleGrid {
    pub radii: Vec<f64>,
}

impl OracleGrid {
    pub fn uniform(n: usize, r_max: f64) -> Self {
        let radii = (0..=n).map(|i| r_max * i as f64 / n as f64).collect();
        Self { radii }
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self::uniform(480, 12.0)
    }
}

/// A radial density sampled on an oracle grid; linear interpolation, zero
/// beyond the last node.
#[derive(Debug, Clone)]
pub struct SampledDensity {
    pub grid: OracleGrid,
    pub values: Vec<f64>,
}

impl SampledDensity {
    pub fn eval(&self, r: f64) -> f64 {
        let radii = &self.grid.radii;
        if r < 0.0 || r > *radii.last().unwrap() {
            return 0.0;
        }
        let h = radii[1] - radii[0];
        let j = ((r / h) as usize).min(radii.len() - 2);
        let t = (r - radii[j]) / h;
        self.values[j] * (1.0 - t) + self.values[j + 1] * t
    }
}

/// Stable radial kernel core for d = 3:
/// `W(x, rho) = (1/x) e^{-(x-rho)^2/(2 nu)} (1 - e^{-2 x rho / nu})`,
/// continued by its limit `2 rho / nu e^{-rho^2/(2 nu)}` at `x = 0`.
#[inline]
fn w_core(x: f64, rho: f64, nu: f64) -> f64 {
    let y = x * rho / nu;
    let e_minus = (-0.5 * (x - rho) * (x - rho) / nu).exp();
    if y < 1e-12 {
        e_minus * 2.0 * rho / nu
    } else {
        e_minus * (-(-2.0 * y).exp_m1()) / x
    }
}

/// Apply the semigroup to a radial density: `F[f](t, r)` on the output grid.
/// Supports d = 1 (even extension) and d = 3 (closed-form angular reduction
/// to a difference of Gaussians).
pub fn apply_semigroup(
    params: &ModelParams,
    f: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    support_hi: f64,
    out_grid: &OracleGrid,
) -> Result<SampledDensity> {
    let d = params.dim();
    if d != 1 && d != 3 {
        return Err(Error::Config(format!("semigroup reduction implemented for d in {{1, 3}}, got {d}")));
    }
    let k = KernelEval::new(t, d)?;
    let nu = k.nu;
    let et = t.exp();
    let width = 12.0 * nu.sqrt();
    let values = out_grid
        .radii
        .iter()
        .map(|&r| {
            let x = et * r;
            let lo = (x - width).max(0.0);
            let hi = (x + width).min(support_hi);
            if hi <= lo {
                return 0.0;
            }
            let panels = ((hi - lo) / nu.sqrt().min(0.25)).ceil() as usize + 1;
            match d {
                1 => {
                    let pref = et * (2.0 * PI * nu).powf(-0.5);
                    pref * quad::gauss16_composite(
                        &|rho: f64| {
                            let em = (-0.5 * (x - rho) * (x - rho) / nu).exp();
                            let ep = (-0.5 * (x + rho) * (x + rho) / nu).exp();
                            f(rho) * (em + ep)
                        },
                        lo,
                        hi,
                        panels.min(512),
                    )
                }
                _ => {
                    let pref = (3.0 * t).exp() * (2.0 * PI * nu).powf(-0.5);
                    pref * quad::gauss16_composite(
                        &|rho: f64| rho * f(rho) * w_core(x, rho, nu),
                        lo,
                        hi,
                        panels.min(512),
                    )
                }
            }
        })
        .collect();
    Ok(SampledDensity { grid: out_grid.clone(), values })
}

/// Pointwise semigroup evaluation at a single radius (same quadrature as
/// `apply_semigroup` without committing to an output grid).
pub fn semigroup_at(
    params: &ModelParams,
    f: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    support_hi: f64,
    r: f64,
) -> Result<f64> {
    let d = params.dim();
    if d != 1 && d != 3 {
        return Err(Error::Config(format!("semigroup reduction implemented for d in {{1, 3}}, got {d}")));
    }
    let k = KernelEval::new(t, d)?;
    let nu = k.nu;
    let x = t.exp() * r;
    let width = 12.0 * nu.sqrt();
    let lo = (x - width).max(0.0);
    let hi = (x + width).min(support_hi);
    if hi <= lo {
        return Ok(0.0);
    }
    let panels = (((hi - lo) / nu.sqrt().min(0.25)).ceil() as usize + 1).min(512);
    Ok(match d {
        1 => {
            let pref = t.exp() * (2.0 * PI * nu).powf(-0.5);
            pref * quad::gauss16_composite(
                &|rho: f64| {
                    let em = (-0.5 * (x - rho) * (x - rho) / nu).exp();
                    let ep = (-0.5 * (x + rho) * (x + rho) / nu).exp();
                    f(rho) * (em + ep)
                },
                lo,
                hi,
                panels,
            )
        }
        _ => {
            let pref = (3.0 * t).exp() * (2.0 * PI * nu).powf(-0.5);
            pref * quad::gauss16_composite(&|rho: f64| rho * f(rho) * w_core(x, rho, nu), lo, hi, panels)
        }
    })
}

/// Radial derivative of the semigroup output, from the analytically
/// differentiated kernel (no finite differences).
pub fn apply_semigroup_gradient(
    params: &ModelParams,
    f: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    support_hi: f64,
    out_grid: &OracleGrid,
) -> Result<SampledDensity> {
    let d = params.dim();
    if d != 1 && d != 3 {
        return Err(Error::Config(format!("semigroup reduction implemented for d in {{1, 3}}, got {d}")));
    }
    let k = KernelEval::new(t, d)?;
    let nu = k.nu;
    let et = t.exp();
    let width = 12.0 * nu.sqrt();
    let values = out_grid
        .radii
        .iter()
        .map(|&r| {
            let x = et * r;
            let lo = (x - width).max(0.0);
            let hi = (x + width).min(support_hi);
            if hi <= lo {
                return 0.0;
            }
            let panels = (((hi - lo) / nu.sqrt().min(0.25)).ceil() as usize + 1).min(512);
            match d {
                1 => {
                    let pref = et * et * (2.0 * PI * nu).powf(-0.5);
                    pref * quad::gauss16_composite(
                        &|rho: f64| {
                            let em = (-0.5 * (x - rho) * (x - rho) / nu).exp();
                            let ep = (-0.5 * (x + rho) * (x + rho) / nu).exp();
                            f(rho) * (-(x - rho) / nu * em - (x + rho) / nu * ep)
                        },
                        lo,
                        hi,
                        panels,
                    )
                }
                _ => {
                    let pref = et * (3.0 * t).exp() * (2.0 * PI * nu).powf(-0.5);
                    pref * quad::gauss16_composite(
                        &|rho: f64| rho * f(rho) * w_core_dx(x, rho, nu),
                        lo,
                        hi,
                        panels,
                    )
                }
            }
        })
        .collect();
    Ok(SampledDensity { grid: out_grid.clone(), values })
}

/// d/dx of `w_core`, with a series branch near the axis.
#[inline]
fn w_core_dx(x: f64, rho: f64, nu: f64) -> f64 {
    let y = x * rho / nu;
    if y < 1e-4 {
        // odd in x: leading term
        let e_c = (-0.5 * (x * x + rho * rho) / nu).exp();
        return e_c * x * (2.0 * rho * rho * rho / (3.0 * nu * nu * nu) - 2.0 * rho / (nu * nu));
    }
    let e_minus = (-0.5 * (x - rho) * (x - rho) / nu).exp();
    let q = -(-2.0 * y).exp_m1();
    // W = (1/x) E_- q
    (e_minus / x) * (-q / x - (x - rho) * q / nu + (2.0 * rho / nu) * (-2.0 * y).exp())
}

/// Mass `c_d int f r^{d-1} dr` of a sampled radial density (trapezoid).
pub fn radial_mass(params: &ModelParams, density: &SampledDensity) -> f64 {
    let d = params.dim() as f64;
    let r = &density.grid.radii;
    let v = &density.values;
    let mut acc = 0.0;
    for i in 1..r.len() {
        let a = v[i - 1] * r[i - 1].powf(d - 1.0);
        let b = v[i] * r[i].powf(d - 1.0);
        acc += 0.5 * (a + b) * (r[i] - r[i - 1]);
    }
    params.c_d() * acc
}

/// Discrete L^1 distance `c_d int |f - g| r^{d-1} dr` on a shared grid.
pub fn radial_l1_distance(params: &ModelParams, a: &SampledDensity, b: &SampledDensity) -> f64 {
    assert_eq!(a.grid.radii.len(), b.grid.radii.len());
    let d = params.dim() as f64;
    let r = &a.grid.radii;
    let mut acc = 0.0;
    for i in 1..r.len() {
        let pa = (a.values[i - 1] - b.values[i - 1]).abs() * r[i - 1].powf(d - 1.0);
        let pb = (a.values[i] - b.values[i]).abs() * r[i].powf(d - 1.0);
        acc += 0.5 * (pa + pb) * (r[i] - r[i - 1]);
    }
    params.c_d() * acc
}

/// Weighted `L^q_ell` norm of a sampled radial profile; `q = inf` gives the
/// weighted sup norm.
pub fn norm_lq_weighted(params: &ModelParams, density: &SampledDensity, q: f64, ell: f64) -> f64 {
    let d = params.dim() as f64;
    let r = &density.grid.radii;
    let v = &density.values;
    if q.is_infinite() {
        return r
            .iter()
            .zip(v)
            .map(|(&ri, &vi)| (1.0 + ri.powf(ell)) * vi.abs())
            .fold(0.0, f64::max);
    }
    let mut acc = 0.0;
    for i in 1..r.len() {
        let wa = ((1.0 + r[i - 1].powf(ell)) * v[i - 1].abs()).powf(q) * r[i - 1].powf(d - 1.0);
        let wb = ((1.0 + r[i].powf(ell)) * v[i].abs()).powf(q) * r[i].powf(d - 1.0);
        acc += 0.5 * (wa + wb) * (r[i] - r[i - 1]);
    }
    (params.c_d() * acc).powf(1.0 / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params3() -> ModelParams {
        ModelParams::new(1.0, 3, 0.5).unwrap()
    }

    fn maxwellian(d: f64) -> impl Fn(f64) -> f64 + Sync {
        move |r: f64| (2.0 * PI).powf(-d / 2.0) * (-0.5 * r * r).exp()
    }

    #[test]
    fn kernel_domain_error() {
        assert!(fp_kernel(0.0, &[0.1], &[0.2]).is_err());
        assert!(fp_kernel(-1.0, &[0.1], &[0.2]).is_err());
    }

    #[test]
    fn kernel_normalizes_in_v() {
        // int F(t, v, w) dv = 1: after u = e^t v - w the integral is a plain
        // Gaussian mass; check the full-dimension evaluation against that.
        let t = 0.3;
        let w = [0.4, -0.2, 0.7];
        let k = KernelEval::new(t, 3).unwrap();
        // radial quadrature around the Gaussian center e^{-t} w
        let et = t.exp();
        let center: Vec<f64> = w.iter().map(|&wi| wi / et).collect();
        let integral = quad::integrate(
            |s: f64| {
                let v = [center[0] + s, center[1], center[2]];
                // F depends only on |e^t v - w| = e^t |s| along this ray
                let val = fp_kernel(t, &v, &w).unwrap();
                // spherical shell around the center with radius e^t|s|/e^t = |s|
                4.0 * PI * s * s * val
            },
            0.0,
            center[0].abs() + 12.0 * k.nu.sqrt(),
            1e-12,
            1e-10,
        )
        .unwrap();
        assert_relative_eq!(integral, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn maxwellian_is_fixed_point_d3() {
        let p = params3();
        let grid = OracleGrid::uniform(300, 10.0);
        let out = apply_semigroup(&p, &maxwellian(3.0), 0.7, 14.0, &grid).unwrap();
        for (i, &r) in grid.radii.iter().enumerate().step_by(25) {
            assert_relative_eq!(out.values[i], maxwellian(3.0)(r), max_relative = 1e-7, epsilon = 1e-12);
        }
    }

    #[test]
    fn maxwellian_is_fixed_point_d1() {
        let p = ModelParams::new(3.0, 1, 0.5).unwrap();
        let grid = OracleGrid::uniform(200, 8.0);
        let out = apply_semigroup(&p, &maxwellian(1.0), 0.4, 14.0, &grid).unwrap();
        for (i, &r) in grid.radii.iter().enumerate().step_by(20) {
            assert_relative_eq!(out.values[i], maxwellian(1.0)(r), max_relative = 1e-7, epsilon = 1e-12);
        }
    }

    #[test]
    fn semigroup_preserves_mass() {
        // kernel normalization, measured with the same discrete mass
        // functional on input and output
        let p = params3();
        let grid = OracleGrid::uniform(1600, 12.0);
        let f = |r: f64| 0.8 * (-0.5 * (r - 1.0) * (r - 1.0) / 0.09).exp();
        let f_in = SampledDensity {
            grid: grid.clone(),
            values: grid.radii.iter().map(|&r| f(r)).collect(),
        };
        let m_in = radial_mass(&p, &f_in);
        for &t in &[0.05, 0.4, 1.5] {
            let out = apply_semigroup(&p, &f, t, 12.0, &grid).unwrap();
            let m_out = radial_mass(&p, &out);
            assert_relative_eq!(m_out, m_in, max_relative = 1e-8);
        }
    }

    #[test]
    fn semigroup_composition() {
        // F(t) after F(s) equals F(t+s): nested pointwise quadrature keeps
        // interpolation error out of the comparison (d = 3).
        let p = params3();
        let f = |r: f64| (-0.5 * (r - 0.8) * (r - 0.8) / 0.04).exp();
        let (s, t) = (0.15, 0.35);
        let inner = |rho: f64| semigroup_at(&p, &f, s, 12.0, rho).unwrap();
        for &r in &[0.0, 0.4, 0.9, 1.6, 3.0] {
            let chained = semigroup_at(&p, &inner, t, 12.0, r).unwrap();
            let direct = semigroup_at(&p, &f, s + t, 12.0, r).unwrap();
            assert_relative_eq!(chained, direct, max_relative = 1e-7, epsilon = 1e-12);
        }
    }

    #[test]
    fn pointwise_kernel_composition_d1() {
        // int F(t, v, u) F(s, u, w) du = F(t+s, v, w) for scalar points
        let (s, t) = (0.2, 0.45);
        let (v, w) = (0.3, -0.6);
        let composed = quad::integrate(
            |u: f64| fp_kernel(t, &[v], &[u]).unwrap() * fp_kernel(s, &[u], &[w]).unwrap(),
            -14.0,
            14.0,
            1e-12,
            1e-11,
        )
        .unwrap();
        let direct = fp_kernel(s + t, &[v], &[w]).unwrap();
        assert_relative_eq!(composed, direct, max_relative = 1e-8);
    }

    #[test]
    fn long_time_limit_is_maxwellian() {
        // narrow Gaussian relaxes to the Maxwellian of the same mass
        let p = params3();
        let grid = OracleGrid::uniform(300, 10.0);
        let f = |r: f64| 20.0 * (-0.5 * r * r / 0.01).exp();
        let out = apply_semigroup(&p, &f, 8.0, 12.0, &grid).unwrap();
        let mass = radial_mass(&p, &out);
        let maxw = SampledDensity {
            grid: grid.clone(),
            values: grid
                .radii
                .iter()
                .map(|&r| mass * (2.0 * PI).powf(-1.5) * (-0.5 * r * r).exp())
                .collect(),
        };
        let gap = radial_l1_distance(&p, &out, &maxw);
        assert!(gap < 1e-4 * mass, "L1 gap to Maxwellian: {gap}");
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = params3();
        let grid = OracleGrid::uniform(600, 6.0);
        let f = |r: f64| (-(r - 1.2) * (r - 1.2) / 0.08).exp();
        let t = 0.25;
        let val = apply_semigroup(&p, &f, t, 12.0, &grid).unwrap();
        let grad = apply_semigroup_gradient(&p, &f, t, 12.0, &grid).unwrap();
        let h = grid.radii[1] - grid.radii[0];
        for i in (10..590).step_by(37) {
            let fd = (val.values[i + 1] - val.values[i - 1]) / (2.0 * h);
            assert_relative_eq!(grad.values[i], fd, max_relative = 2e-3, epsilon = 1e-7);
        }
    }
}


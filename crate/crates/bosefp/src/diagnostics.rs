//! Run diagnostics: free energy and dissipation functionals, moments,
//! Lipschitz monitoring, singularity-profile extraction, energy-balance and
//! renormalized-form residuals, and convergence metrics.

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::model::{ModelParams, RegularizedPotential};
use crate::numerics::{deriv3, deriv3_end, deriv3_start, linear_fit, quad};
use crate::solver::{MassState, Trajectory};
use serde::{Deserialize, Serialize};

/// Density floor below which nodes are excluded from the dissipation
/// quadrature; their bounded contribution is reported separately.
const G_FLOOR: f64 = 1e-14;

/// Inner radius for profile fits. The first grid nodes are excluded: on the
/// graded grid their finite-difference density is not refinement-stable for
/// singular profiles (the relative stencil error there scales like
/// (dz/z)^2 ~ (6/i)^2). Beyond this radius the recovered density converges
/// under refinement for the default resolutions.
const PROFILE_R_MIN: f64 = 0.02;

/// First node index inside the refinement-stable profile window.
pub fn profile_start_index(grid: &RadialGrid) -> usize {
    let r = grid.nodes();
    let mut i = 3;
    while i < r.len() - 1 && r[i] < PROFILE_R_MIN {
        i += 1;
    }
    i
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Bounded,
    Singular,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Bounded => write!(f, "bounded"),
            Regime::Singular => write!(f, "singular"),
        }
    }
}

/// Per-checkpoint diagnostics.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub free_energy: f64,
    /// Modeled contribution beyond the grid radius, included in `free_energy`.
    pub free_energy_tail: f64,
    pub dissipation: f64,
    /// Bound on what the floor-skipped nodes could contribute.
    pub dissipation_skipped_bound: f64,
    /// (k, E_k) pairs for the configured orders.
    pub moments: Vec<(u32, f64)>,
    /// Running sup over steps and nodes of |dM/dt| up to this checkpoint.
    pub lipschitz_sup: f64,
    pub mass_at_outer: f64,
    pub sup_amplitude: Option<f64>,
    pub regime: Option<Regime>,
}

impl DiagnosticsRecord {
    pub fn moment(&self, k: u32) -> Option<f64> {
        self.moments.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

/// Amplitude of the deviation from the critical profile near the origin:
/// `A(t, r) = (g - g_c) r^{d-2}` on a window `(r_min, r_star)`.
#[derive(Debug, Clone)]
pub struct ProfileFit {
    pub t: f64,
    pub radii: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub sup_amplitude: f64,
    pub regime: Regime,
}

/// Shared evaluation context: model parameters, grid, and the regularized
/// potential of the run (when eps > 0).
pub struct Diagnostics {
    params: ModelParams,
    grid: RadialGrid,
    reg: Option<RegularizedPotential>,
    moment_orders: Vec<u32>,
}

impl Diagnostics {
    pub fn new(params: &ModelParams, grid: &RadialGrid) -> Result<Self> {
        let reg = if params.eps() > 0.0 {
            Some(params.regularized_potential(params.eps())?)
        } else {
            None
        };
        Ok(Self {
            params: params.clone(),
            grid: grid.clone(),
            reg,
            moment_orders: vec![0, 2, 4],
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn phi_eps(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        match &self.reg {
            Some(reg) => reg.value(s),
            None => self.params.potential(s),
        }
    }

    /// Free energy `H_eps = c_d int [r^2/2 g + Phi_eps(g)] r^{d-1} dr` by
    /// trapezoid over the grid plus the Gaussian-decay tail model beyond R.
    /// Returns (total, tail part).
    pub fn free_energy_of(&self, g: &[f64]) -> Result<(f64, f64)> {
        let r = self.grid.nodes();
        let n = self.grid.n();
        let d = self.params.dim() as f64;
        let w = |i: usize| -> Result<f64> {
            let gv = g[i].max(0.0);
            let rd = if d == 1.0 { 1.0 } else { r[i].powf(d - 1.0) };
            Ok((0.5 * r[i] * r[i] * gv + self.phi_eps(gv)?) * rd)
        };
        let mut acc = 0.0;
        let mut prev = if self.params.dim() >= 2 { 0.0 } else { w(0)? };
        for i in 1..=n {
            let cur = w(i)?;
            acc += 0.5 * (prev + cur) * (r[i] - r[i - 1]);
            prev = cur;
        }
        // tail: density continued with the far-field Gaussian decay model
        let g_out = g[n].max(0.0);
        let rr = self.grid.outer_radius();
        let tail = if g_out > 0.0 {
            quad::integrate(
                |x| {
                    let gt = g_out * (-0.5 * (x * x - rr * rr)).exp();
                    let phi = match &self.reg {
                        Some(reg) => reg.value(gt).unwrap_or(0.0),
                        None => self.params.potential(gt).unwrap_or(0.0),
                    };
                    (0.5 * x * x * gt + phi) * x.powf(d - 1.0)
                },
                rr,
                rr + 8.0,
                1e-13,
                1e-10,
            )?
        } else {
            0.0
        };
        Ok((self.params.c_d() * (acc + tail), self.params.c_d() * tail))
    }

    pub fn free_energy(&self, state: &MassState, g: &[f64]) -> Result<f64> {
        let _ = state;
        Ok(self.free_energy_of(g)?.0)
    }

    /// Free energy evaluated with the unregularized potential `Phi` in place
    /// of `Phi_eps` (lower bound since `Phi_eps >= Phi`).
    pub fn free_energy_unregularized(&self, g: &[f64]) -> Result<f64> {
        let tmp = Diagnostics {
            params: self.params.clone(),
            grid: self.grid.clone(),
            reg: None,
            moment_orders: self.moment_orders.clone(),
        };
        Ok(tmp.free_energy_of(g)?.0)
    }

    /// Dissipation `D_eps = c_d int (1/h_eps(g)) |dg/dr + h_eps(g) r|^2 r^{d-1} dr`.
    /// Nodes with `g <= G_FLOOR` are skipped; a bound on their contribution
    /// is returned alongside.
    pub fn dissipation_of(&self, g: &[f64]) -> (f64, f64) {
        let r = self.grid.nodes();
        let n = self.grid.n();
        let d = self.params.dim() as f64;
        let eps = self.params.eps();
        let mut integrand = vec![0.0; n + 1];
        let mut bound = vec![0.0; n + 1];
        for i in 1..=n {
            let dg = if i == 1 {
                deriv3_start(r[1], r[2], r[3], g[1], g[2], g[3])
            } else if i == n {
                deriv3_end(r[n - 2], r[n - 1], r[n], g[n - 2], g[n - 1], g[n])
            } else {
                deriv3(r[i - 1], r[i], r[i + 1], g[i - 1], g[i], g[i + 1])
            };
            let rd = r[i].powf(d - 1.0);
            if g[i] > G_FLOOR {
                let h = self.params.mobility_at_unchecked(g[i], eps);
                let flux = dg + h * r[i];
                integrand[i] = flux * flux / h * rd;
            } else if g[i] > 0.0 {
                // skipped node: bound its contribution at the floor value
                let h = self.params.mobility_at_unchecked(G_FLOOR, eps);
                let flux = dg + h * r[i];
                bound[i] = flux * flux / h * rd;
            }
        }
        let mut acc = 0.0;
        let mut bacc = 0.0;
        for i in 1..=n {
            let dr = r[i] - r[i - 1];
            acc += 0.5 * (integrand[i - 1] + integrand[i]) * dr;
            bacc += 0.5 * (bound[i - 1] + bound[i]) * dr;
        }
        (self.params.c_d() * acc, self.params.c_d() * bacc)
    }

    /// Discrete moments `E_k = c_d int g r^{k+d-1} dr` computed as Stieltjes
    /// sums against M, so that `E_0 = c_d M(R)` exactly.
    pub fn moments_of(&self, state: &MassState, orders: &[u32]) -> Vec<(u32, f64)> {
        let r = self.grid.nodes();
        let m = &state.values;
        orders
            .iter()
            .map(|&k| {
                let mut acc = 0.0;
                for i in 0..self.grid.n() {
                    let mid = 0.5 * (r[i] + r[i + 1]);
                    acc += mid.powi(k as i32) * (m[i + 1] - m[i]);
                }
                (k, self.params.c_d() * acc)
            })
            .collect()
    }

    /// Profile amplitude `A = (g - g_c) r^{d-2}` over the refinement-stable
    /// window `(r_min, r_star)`. Requires the profile regime.
    pub fn profile_amplitude(&self, g: &[f64], t: f64, r_star: f64) -> Result<ProfileFit> {
        if !self.params.profile_regime() {
            return Err(Error::Domain(
                "profile amplitude requires the regime 2/gamma + 2 - d > 0".into(),
            ));
        }
        if !(r_star > 0.0 && r_star <= 1.0) {
            return Err(Error::Domain(format!("r_star must lie in (0, 1], got {r_star}")));
        }
        let r = self.grid.nodes();
        let d = self.params.dim() as f64;
        let start = profile_start_index(&self.grid);
        let r_min = r[start];
        let g_at_rmin = g[start];
        let threshold = 0.5 * self.params.c_gamma() * r_min.powf(-2.0 / self.params.gamma());
        let regime = if g_at_rmin >= threshold { Regime::Singular } else { Regime::Bounded };
        let mut radii = Vec::new();
        let mut amplitude = Vec::new();
        let mut sup = 0.0f64;
        for i in start..=self.grid.n() {
            if r[i] > r_star {
                break;
            }
            let gc = self.params.steady_density_unchecked(0.0, r[i]);
            let a = (g[i] - gc) * r[i].powf(d - 2.0);
            sup = sup.max(a.abs());
            radii.push(r[i]);
            amplitude.push(a);
        }
        Ok(ProfileFit { t, radii, amplitude, sup_amplitude: sup, regime })
    }

    /// Assemble the per-checkpoint record.
    pub fn record(&self, state: &MassState, g: &[f64], lipschitz_sup: f64) -> Result<DiagnosticsRecord> {
        let (free_energy, tail) = self.free_energy_of(g)?;
        let (dissipation, skipped) = self.dissipation_of(g);
        let moments = self.moments_of(state, &self.moment_orders);
        let (sup_amplitude, regime) = if self.params.profile_regime() {
            let fit = self.profile_amplitude(g, state.time, 1.0f64.min(self.grid.outer_radius()))?;
            (Some(fit.sup_amplitude), Some(fit.regime))
        } else {
            (None, None)
        };
        Ok(DiagnosticsRecord {
            t: state.time,
            free_energy,
            free_energy_tail: tail,
            dissipation,
            dissipation_skipped_bound: skipped,
            moments,
            lipschitz_sup,
            mass_at_outer: *state.values.last().unwrap(),
            sup_amplitude,
            regime,
        })
    }
}

/// Per-interval energy-balance residuals `H(t_{j+1}) - H(t_j) + int D dtau`
/// (trapezoid between consecutive checkpoints).
pub fn energy_balance_residual(traj: &Trajectory) -> Vec<f64> {
    let rec = &traj.records;
    rec.windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            w[1].free_energy - w[0].free_energy + 0.5 * dt * (w[0].dissipation + w[1].dissipation)
        })
        .collect()
}

/// Global Lipschitz monitor: the measured sup over steps and nodes of
/// |dM/dt| for the run.
pub fn lipschitz_monitor(traj: &Trajectory) -> f64 {
    traj.stats.lipschitz_sup
}

/// Compactly supported space-time test bump for the renormalized-form
/// residual: a product of C^2 polynomial bumps in t and r.
#[derive(Debug, Clone, Copy)]
pub struct TestBump {
    pub t_lo: f64,
    pub t_hi: f64,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl TestBump {
    fn beta(x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            64.0 * (x * (1.0 - x)).powi(3)
        }
    }

    fn beta_prime(x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            64.0 * 3.0 * (x * (1.0 - x)).powi(2) * (1.0 - 2.0 * x)
        }
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        Self::beta((t - self.t_lo) / (self.t_hi - self.t_lo))
            * Self::beta((r - self.r_lo) / (self.r_hi - self.r_lo))
    }

    pub fn dt(&self, t: f64, r: f64) -> f64 {
        Self::beta_prime((t - self.t_lo) / (self.t_hi - self.t_lo)) / (self.t_hi - self.t_lo)
            * Self::beta((r - self.r_lo) / (self.r_hi - self.r_lo))
    }

    pub fn dr(&self, t: f64, r: f64) -> f64 {
        Self::beta((t - self.t_lo) / (self.t_hi - self.t_lo))
            * Self::beta_prime((r - self.r_lo) / (self.r_hi - self.r_lo))
            / (self.r_hi - self.r_lo)
    }
}

/// Cubic-smoothed truncation `xi(s) ~ min(s, k)` whose derivative is
/// supported in `[0, k]` (smoothing width k/10).
#[derive(Debug, Clone, Copy)]
pub struct Truncation {
    pub level: f64,
}

impl Truncation {
    fn width(&self) -> f64 {
        self.level / 10.0
    }

    pub fn xi(&self, s: f64) -> f64 {
        let k = self.level;
        let w = self.width();
        if s <= k - w {
            s
        } else if s >= k {
            k - 0.5 * w
        } else {
            let x = (s - (k - w)) / w;
            // integral of 1 - (3x^2 - 2x^3)
            (k - w) + w * (x - x * x * x + 0.5 * x * x * x * x)
        }
    }

    pub fn xi_prime(&self, s: f64) -> f64 {
        let k = self.level;
        let w = self.width();
        if s <= k - w {
            1.0
        } else if s >= k {
            0.0
        } else {
            let x = (s - (k - w)) / w;
            1.0 - (3.0 * x * x - 2.0 * x * x * x)
        }
    }

    pub fn xi_second(&self, s: f64) -> f64 {
        let k = self.level;
        let w = self.width();
        if s <= k - w || s >= k {
            0.0
        } else {
            let x = (s - (k - w)) / w;
            -(6.0 * x - 6.0 * x * x) / w
        }
    }
}

/// Residual of the renormalized weak form over a trajectory, with truncation
/// `xi` at the given level and the supplied space-time bump. Both sides of
/// the identity are evaluated by trapezoid quadrature over the trajectory's
/// checkpoints; the result is their difference.
pub fn renormalized_residual(
    diag: &Diagnostics,
    solver: &crate::solver::Solver,
    traj: &Trajectory,
    level: f64,
    bump: &TestBump,
) -> Result<f64> {
    let grid = solver.grid();
    let params = diag.params();
    if bump.r_hi > grid.outer_radius() {
        return Err(Error::Input(format!(
            "test bump support [{}, {}] exceeds the grid radius {}",
            bump.r_lo,
            bump.r_hi,
            grid.outer_radius()
        )));
    }
    let xi = Truncation { level };
    let r = grid.nodes();
    let n = grid.n();
    let d = params.dim() as f64;
    let t_end = traj.states.last().unwrap().time;

    // spatial integral of a nodal function against r^{d-1}
    let trapz = |vals: &dyn Fn(usize) -> f64| -> f64 {
        let mut acc = 0.0;
        for i in 1..=n {
            let a = vals(i - 1) * if i == 1 { 0.0 } else { r[i - 1].powf(d - 1.0) };
            let b = vals(i) * r[i].powf(d - 1.0);
            acc += 0.5 * (a + b) * (r[i] - r[i - 1]);
        }
        acc
    };

    let densities: Vec<Vec<f64>> = traj.states.iter().map(|s| solver.density_of(s)).collect();

    // LHS terms
    let g_end = &densities[densities.len() - 1];
    let g_start = &densities[0];
    let term_end = trapz(&|i| xi.xi(g_end[i].max(0.0)) * bump.eval(t_end, r[i]));
    let term_start = trapz(&|i| xi.xi(g_start[i].max(0.0)) * bump.eval(traj.states[0].time, r[i]));
    let mut time_term = 0.0;
    let mut rhs_time = 0.0;
    let mut prev_inner: Option<(f64, f64, f64)> = None;
    for (s, g) in traj.states.iter().zip(densities.iter()) {
        let inner_lhs = trapz(&|i| xi.xi(g[i].max(0.0)) * bump.dt(s.time, r[i]));
        // RHS integrand: (dg/dr + h(g) r) . (xi''(g) dg/dr psi + xi'(g) dpsi/dr)
        let mut dg = vec![0.0; n + 1];
        for i in 1..n {
            dg[i] = deriv3(r[i - 1], r[i], r[i + 1], g[i - 1], g[i], g[i + 1]);
        }
        let inner_rhs = trapz(&|i| {
            let gv = g[i].max(0.0);
            let flux = dg[i] + params.mobility_unreg(gv) * r[i];
            flux * (xi.xi_second(gv) * dg[i] * bump.eval(s.time, r[i])
                + xi.xi_prime(gv) * bump.dr(s.time, r[i]))
        });
        if let Some((t_prev, lhs_prev, rhs_prev)) = prev_inner {
            let dt = s.time - t_prev;
            time_term += 0.5 * dt * (lhs_prev + inner_lhs);
            rhs_time += 0.5 * dt * (rhs_prev + inner_rhs);
        }
        prev_inner = Some((s.time, inner_lhs, inner_rhs));
    }

    let c_d = params.c_d();
    let lhs = c_d * (term_end - term_start - time_term);
    let rhs = -c_d * rhs_time;
    Ok(lhs - rhs)
}

/// Gaps to the mass-m free-energy minimizer: discrete L^p distances of the
/// density, the free-energy gap, and the condensate gap.
#[derive(Debug, Clone)]
pub struct ConvergenceMetrics {
    pub lp_gaps: Vec<(f64, f64)>,
    pub energy_gap: f64,
    pub condensate_gap: f64,
}

pub fn convergence_metrics(
    diag: &Diagnostics,
    grid: &RadialGrid,
    g: &[f64],
    condensate_estimate: f64,
    m: f64,
    ps: &[f64],
) -> Result<ConvergenceMetrics> {
    let params = diag.params();
    let minimizer = params.minimizer(m)?;
    let r = grid.nodes();
    let n = grid.n();
    let d = params.dim() as f64;
    let pc = params.gamma() * d / 2.0;
    let mut lp_gaps = Vec::new();
    for &p in ps {
        if !(p >= 1.0 && p < pc) {
            return Err(Error::Domain(format!("L^p metric requires 1 <= p < gamma d/2, got {p}")));
        }
        let mut acc = 0.0;
        for i in 1..=n {
            let fm_a = params.steady_density_unchecked(minimizer.theta(), r[i - 1].max(r[1] * 0.5));
            let fm_b = params.steady_density_unchecked(minimizer.theta(), r[i]);
            let wa = (g[i - 1].max(0.0) - fm_a).abs().powf(p)
                * if i == 1 { 0.0 } else { r[i - 1].powf(d - 1.0) };
            let wb = (g[i].max(0.0) - fm_b).abs().powf(p) * r[i].powf(d - 1.0);
            acc += 0.5 * (wa + wb) * (r[i] - r[i - 1]);
        }
        lp_gaps.push((p, (params.c_d() * acc).powf(1.0 / p)));
    }
    let h_state = diag.free_energy_unregularized(g)?;
    let h_min = params.minimizer_energy(m)?;
    let cond_target = (m - params.critical_mass()?).max(0.0);
    Ok(ConvergenceMetrics {
        lp_gaps,
        energy_gap: (h_state - h_min).abs(),
        condensate_gap: (condensate_estimate - cond_target).abs(),
    })
}

/// Log-log slope of `y` against `x` (both positive), for refinement and
/// smoothing-exponent studies.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

//! Time integration of the regularized partial-mass equation
//!
//! ```text
//! dM/dt = d2M/dr2 - (d-1)/r dM/dr + r^d h_eps(r^{1-d} dM/dr),  M(t, 0) = 0,
//! ```
//!
//! on a graded radial grid. The linear diffusion-drift part is treated
//! implicitly (tridiagonal solve); the superlinear mobility excess
//! `r^d vartheta_eps(g)` is explicit by default, or folded into a Newton
//! iteration in the fully implicit mode. Steps are accepted only when the
//! updated mass function is monotone in r and the per-step change stays
//! below the configured cap; otherwise dt is halved.

mod scenario;
mod state;

pub use scenario::{DtConfig, InitialData, Scenario, StepperKind};
pub use state::{MassState, SolverStats, Trajectory};

use crate::diagnostics::Diagnostics;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::model::ModelParams;
use crate::numerics::tridiag::TridiagWorkspace;
use crate::numerics::{deriv3, deriv3_end, deriv3_start, quad};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dt: DtConfig,
    pub stepper: StepperKind,
    /// Reject a step when max |dM| exceeds this fraction of the mass scale.
    pub rel_change_cap: f64,
    /// Double dt after this many consecutive accepted steps.
    pub growth_streak: u32,
    /// Monotonicity slack as a fraction of the mass scale.
    pub mono_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: DtConfig::default(),
            stepper: StepperKind::Imex,
            rel_change_cap: 0.1,
            growth_streak: 20,
            mono_tol: 1e-11,
        }
    }
}

impl SolverConfig {
    pub fn from_scenario(sc: &Scenario) -> Self {
        Self { dt: sc.dt, stepper: sc.stepper, ..Self::default() }
    }
}

/// Outcome of one accepted (possibly internally halved) time step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: MassState,
    pub dt_used: f64,
    pub rejections: u32,
}

pub struct Solver {
    params: ModelParams,
    grid: RadialGrid,
    config: SolverConfig,
    // frozen discretization coefficients for interior nodes 1..N-1
    a_lo: Vec<f64>,
    a_di: Vec<f64>,
    a_up: Vec<f64>,
    // 3-point derivative weights per interior node, for density recovery
    c_lo: Vec<f64>,
    c_di: Vec<f64>,
    c_up: Vec<f64>,
    // scratch
    ws: TridiagWorkspace,
    g_buf: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    sol: Vec<f64>,
}

impl Solver {
    pub fn new(params: ModelParams, grid: RadialGrid, config: SolverConfig) -> Result<Self> {
        let n = grid.n();
        if n < 4 {
            return Err(Error::Config("solver needs at least 4 grid intervals".into()));
        }
        let d = params.dim() as f64;
        let r = grid.nodes();
        let mut a_lo = vec![0.0; n + 1];
        let mut a_di = vec![0.0; n + 1];
        let mut a_up = vec![0.0; n + 1];
        let mut c_lo = vec![0.0; n + 1];
        let mut c_di = vec![0.0; n + 1];
        let mut c_up = vec![0.0; n + 1];
        // Density recovery differentiates M against z = r^d/d (dM/dz = g),
        // which stays second order on the graded spacing near the origin
        // where r-space stencils degenerate.
        let z: Vec<f64> = r.iter().map(|&ri| ri.powf(d) / d).collect();
        for i in 1..n {
            let h1 = r[i] - r[i - 1];
            let h2 = r[i + 1] - r[i];
            let havg = 0.5 * (r[i + 1] - r[i - 1]);
            let rm = 0.5 * (r[i - 1] + r[i]);
            let rp = 0.5 * (r[i] + r[i + 1]);
            let rd1 = r[i].powf(d - 1.0);
            // conservative diffusion r^{d-1} d/dr (r^{1-d} dM/dr)
            let lo_diff = rd1 * rm.powf(1.0 - d) / (h1 * havg);
            let up_diff = rd1 * rp.powf(1.0 - d) / (h2 * havg);
            // centered d/dz weights: g_i = sum c_j M_j
            let k1 = z[i] - z[i - 1];
            let k2 = z[i + 1] - z[i];
            c_lo[i] = -k2 / (k1 * (k1 + k2));
            c_di[i] = (k2 - k1) / (k1 * k2);
            c_up[i] = k1 / (k2 * (k1 + k2));
            // linear drift r^d g folded in with the diffusion
            let rd = r[i].powf(d);
            a_lo[i] = lo_diff + rd * c_lo[i];
            a_di[i] = -(lo_diff + up_diff) + rd * c_di[i];
            a_up[i] = up_diff + rd * c_up[i];
        }
        Ok(Self {
            params,
            grid,
            config,
            a_lo,
            a_di,
            a_up,
            c_lo,
            c_di,
            c_up,
            ws: TridiagWorkspace::new(),
            g_buf: vec![0.0; n + 1],
            rhs: vec![0.0; n - 1],
            lower: vec![0.0; n - 1],
            diag: vec![0.0; n - 1],
            upper: vec![0.0; n - 1],
            sol: vec![0.0; n - 1],
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Build the initial mass state `M(0, r_i) = int_0^{r_i} g rho^{d-1} d rho`
    /// by per-cell Gauss-Legendre quadrature.
    pub fn init_state(&self, g_in: &(dyn Fn(f64) -> f64 + Sync)) -> Result<MassState> {
        let d = self.params.dim() as f64;
        let r = self.grid.nodes();
        let n = self.grid.n();
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        let mut min_sample = f64::INFINITY;
        for i in 0..n {
            let cell = quad::gauss16(&|rho: f64| g_in(rho) * rho.powf(d - 1.0), r[i], r[i + 1]);
            // probe for negative data on a few points per cell
            for k in 0..4 {
                let x = r[i] + (r[i + 1] - r[i]) * (k as f64 + 0.5) / 4.0;
                min_sample = min_sample.min(g_in(x));
            }
            acc += cell;
            values.push(acc);
        }
        if min_sample < -1e-12 * (acc.abs() + 1.0) {
            return Err(Error::Input(format!("negative initial density sample: {min_sample}")));
        }
        let state = MassState {
            time: 0.0,
            values,
            eps: self.params.eps(),
            mass_scale: acc,
        };
        state.validate(1e-12 * acc.abs().max(1e-300))?;
        Ok(state)
    }

    /// Recover the density `g = dM/dz`, `z = r^d/d`, at all nodes: centered
    /// three-point stencils in z at interior nodes, one-sided at the ends.
    pub fn density_of(&self, state: &MassState) -> Vec<f64> {
        let mut g = vec![0.0; self.grid.n() + 1];
        self.density_into(&state.values, &mut g);
        g
    }

    fn density_into(&self, m: &[f64], g: &mut [f64]) {
        let d = self.params.dim() as f64;
        let r = self.grid.nodes();
        let n = self.grid.n();
        let zf = |i: usize| r[i].powf(d) / d;
        g[0] = deriv3_start(0.0, zf(1), zf(2), 0.0, m[1], m[2]);
        for i in 1..n {
            g[i] = self.c_lo[i] * m[i - 1] + self.c_di[i] * m[i] + self.c_up[i] * m[i + 1];
        }
        g[n] = deriv3_end(zf(n - 2), zf(n - 1), zf(n), m[n - 2], m[n - 1], m[n]);
    }

    /// Discrete flux `r^{d-1} dg/dr + r^d h_eps(g)` at interior node `i`;
    /// equals the discrete dM/dt up to scheme truncation error.
    pub fn mass_flux(&self, state: &MassState, i: usize) -> f64 {
        let n = self.grid.n();
        assert!((1..n).contains(&i), "mass_flux requires 1 <= i <= N-1");
        let r = self.grid.nodes();
        let d = self.params.dim() as f64;
        let g = self.density_of(state);
        let dg = deriv3(r[i - 1], r[i], r[i + 1], g[i - 1], g[i], g[i + 1]);
        let h = self.params.mobility_at_unchecked(g[i].max(0.0), state.eps);
        r[i].powf(d - 1.0) * dg + r[i].powf(d) * h
    }

    /// Far-field closure flux at r_N: Gaussian-decay extrapolation of the
    /// density, consistent with the steady-profile tails.
    fn closure_flux(&self, g: &[f64]) -> f64 {
        let r = self.grid.nodes();
        let n = self.grid.n();
        let d = self.params.dim() as f64;
        let h_n = r[n] - r[n - 1];
        let g_prev = g[n - 1].max(0.0);
        let g_ext = g_prev * (-0.5 * (r[n] * r[n] - r[n - 1] * r[n - 1])).exp();
        let h_mob = self.params.mobility_at_unchecked(g_ext, self.params.eps());
        r[n].powf(d - 1.0) * (g_ext - g_prev) / h_n + r[n].powf(d) * h_mob
    }

    /// Attempt one step of size `dt`, halving on invariant violations.
    /// Fails with a state dump once dt falls below the configured minimum.
    pub fn time_step(&mut self, state: &MassState, dt: f64) -> Result<StepOutcome> {
        let mut dt_try = dt;
        let mut rejections = 0;
        loop {
            match self.try_step(state, dt_try) {
                Ok(next) => {
                    return Ok(StepOutcome { state: next, dt_used: dt_try, rejections });
                }
                Err(StepReject { reason }) => {
                    rejections += 1;
                    dt_try *= 0.5;
                    if dt_try < self.config.dt.min {
                        let r = self.grid.nodes();
                        let m = &state.values;
                        let head: Vec<String> = (0..m.len().min(6))
                            .map(|i| format!("M({:.3e}) = {:.6e}", r[i], m[i]))
                            .collect();
                        return Err(Error::SolverFailure {
                            t: state.time,
                            reason: format!(
                                "dt underflow below {:.3e} after {rejections} rejections ({reason}); state head: {}",
                                self.config.dt.min,
                                head.join(", ")
                            ),
                        });
                    }
                }
            }
        }
    }

    fn try_step(&mut self, state: &MassState, dt: f64) -> std::result::Result<MassState, StepReject> {
        let n = self.grid.n();
        let eps = state.eps;
        let d = self.params.dim() as f64;
        let r = self.grid.nodes();
        let m = &state.values;

        let mut g = std::mem::take(&mut self.g_buf);
        self.density_into(m, &mut g);

        // boundary rows
        let m_outer = m[n] + dt * self.closure_flux(&g);

        // implicit linear part, explicit mobility excess
        for i in 1..n {
            let s = r[i].powf(d) * self.params.theta_eps(g[i].max(0.0), eps);
            let k = i - 1;
            self.lower[k] = -dt * self.a_lo[i];
            self.diag[k] = 1.0 - dt * self.a_di[i];
            self.upper[k] = -dt * self.a_up[i];
            self.rhs[k] = m[i] + dt * s;
        }
        self.rhs[n - 2] += dt * self.a_up[n - 1] * m_outer;

        let solved = self.ws.solve(&self.lower, &self.diag, &self.upper, &self.rhs, &mut self.sol);
        if !solved {
            self.g_buf = g;
            return Err(StepReject { reason: "singular tridiagonal system".into() });
        }

        if self.config.stepper == StepperKind::Newton {
            if let Err(reason) = self.newton_refine(m, m_outer, dt, eps, &mut g) {
                self.g_buf = g;
                return Err(StepReject { reason });
            }
        }

        // assemble and validate
        let mut next = Vec::with_capacity(n + 1);
        next.push(0.0);
        next.extend_from_slice(&self.sol);
        next.push(m_outer);
        self.g_buf = g;

        let mono_tol = self.config.mono_tol * state.mass_scale.max(1e-300);
        for i in 0..n {
            if !next[i + 1].is_finite() || next[i + 1] < next[i] - mono_tol {
                return Err(StepReject {
                    reason: format!("monotonicity violated at node {i} (dt = {dt:.3e})"),
                });
            }
        }
        let cap = self.config.rel_change_cap * state.mass_scale.max(1e-300);
        for i in 1..n {
            if (next[i] - m[i]).abs() > cap {
                return Err(StepReject {
                    reason: format!("per-step change above cap at node {i} (dt = {dt:.3e})"),
                });
            }
        }

        Ok(MassState {
            time: state.time + dt,
            values: next,
            eps,
            mass_scale: state.mass_scale,
        })
    }

    /// Newton iteration for the fully implicit step, starting from the IMEX
    /// predictor already stored in `self.sol`.
    fn newton_refine(
        &mut self,
        m_old: &[f64],
        m_outer: f64,
        dt: f64,
        eps: f64,
        g: &mut [f64],
    ) -> std::result::Result<(), String> {
        let n = self.grid.n();
        let d = self.params.dim() as f64;
        let r = self.grid.nodes();
        let scale = m_old[n].abs().max(1e-300);
        let mut m_work = vec![0.0; n + 1];
        let mut delta = vec![0.0; n - 1];
        for iter in 0..16 {
            m_work[0] = 0.0;
            m_work[1..n].copy_from_slice(&self.sol);
            m_work[n] = m_outer;
            self.density_into(&m_work, g);
            // residual F = M - M_old - dt (A M + S(M)) at interior nodes
            let mut res_norm = 0.0f64;
            for i in 1..n {
                let am = self.a_lo[i] * m_work[i - 1]
                    + self.a_di[i] * m_work[i]
                    + self.a_up[i] * m_work[i + 1];
                let s = r[i].powf(d) * self.params.theta_eps(g[i].max(0.0), eps);
                let f = m_work[i] - m_old[i] - dt * (am + s);
                let k = i - 1;
                self.rhs[k] = -f;
                res_norm = res_norm.max(f.abs());
                let sp = if g[i] > 0.0 {
                    r[i].powf(d) * self.params.theta_eps_prime(g[i], eps)
                } else {
                    0.0
                };
                self.lower[k] = -dt * (self.a_lo[i] + sp * self.c_lo[i]);
                self.diag[k] = 1.0 - dt * (self.a_di[i] + sp * self.c_di[i]);
                self.upper[k] = -dt * (self.a_up[i] + sp * self.c_up[i]);
            }
            if res_norm <= 1e-13 * scale {
                return Ok(());
            }
            if !self.ws.solve(&self.lower, &self.diag, &self.upper, &self.rhs, &mut delta) {
                return Err("singular Newton system".into());
            }
            let mut step_norm = 0.0f64;
            for k in 0..n - 1 {
                self.sol[k] += delta[k];
                step_norm = step_norm.max(delta[k].abs());
            }
            if !step_norm.is_finite() {
                return Err("Newton update diverged".into());
            }
            if step_norm <= 1e-13 * scale {
                return Ok(());
            }
            if iter == 15 {
                return Err(format!("Newton stalled (last update {step_norm:.3e})"));
            }
        }
        Ok(())
    }

    /// Integrate from `state0` through the given strictly increasing
    /// checkpoint times (the first may equal the state's own time), storing
    /// a state and a diagnostics record at each checkpoint.
    pub fn run(&mut self, state0: MassState, checkpoints: &[f64]) -> Result<Trajectory> {
        if (state0.eps - self.params.eps()).abs() > 0.0 {
            return Err(Error::Config(format!(
                "state eps = {} does not match solver eps = {}",
                state0.eps,
                self.params.eps()
            )));
        }
        if checkpoints.is_empty() {
            return Err(Error::Input("run requires at least one checkpoint".into()));
        }
        if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("checkpoints must be strictly increasing".into()));
        }
        let diagnostics = Diagnostics::new(&self.params, &self.grid)?;
        let m0_outer = *state0.values.last().unwrap();
        let tol_snap = 1e-12 * checkpoints.last().unwrap().max(1.0);

        let mut stats = SolverStats {
            dt_min_used: f64::INFINITY,
            ..Default::default()
        };
        let mut states = Vec::with_capacity(checkpoints.len());
        let mut records = Vec::with_capacity(checkpoints.len());
        let mut state = state0;
        let mut dt = self.config.dt.init;
        let mut streak = 0u32;

        for &t_ck in checkpoints {
            if t_ck < state.time - tol_snap {
                return Err(Error::Input(format!(
                    "checkpoint {t_ck} precedes current time {}",
                    state.time
                )));
            }
            while state.time < t_ck - tol_snap {
                let dt_step = dt.min(t_ck - state.time);
                let out = self.time_step(&state, dt_step)?;
                stats.accepted_steps += 1;
                stats.rejected_steps += out.rejections as u64;
                stats.dt_min_used = stats.dt_min_used.min(out.dt_used);
                stats.dt_max_used = stats.dt_max_used.max(out.dt_used);
                let mut max_rate = 0.0f64;
                for (a, b) in out.state.values.iter().zip(state.values.iter()) {
                    max_rate = max_rate.max((a - b).abs() / out.dt_used);
                }
                stats.lipschitz_sup = stats.lipschitz_sup.max(max_rate);
                stats.mass_drift_max = stats
                    .mass_drift_max
                    .max((out.state.values.last().unwrap() - m0_outer).abs());
                if out.rejections > 0 {
                    dt = out.dt_used;
                    streak = 0;
                } else {
                    streak += 1;
                    if streak >= self.config.growth_streak {
                        dt = (dt * 2.0).min(self.config.dt.max);
                        streak = 0;
                    }
                }
                state = out.state;
            }
            state.time = t_ck.max(state.time);
            let g = self.density_of(&state);
            let record = diagnostics.record(&state, &g, stats.lipschitz_sup)?;
            records.push(record);
            states.push(state.clone());
        }
        // measured explicit stability estimate for the report
        stats.dt_explicit_cap_estimate = self.explicit_cap_estimate(states.last().unwrap());
        Ok(Trajectory { states, records, stats })
    }

    /// Rough measured bound on the explicit term's stable dt: 2 / max |dS/dM|
    /// over nodes, at the given state.
    fn explicit_cap_estimate(&self, state: &MassState) -> f64 {
        let n = self.grid.n();
        let r = self.grid.nodes();
        let g = self.density_of(state);
        let mut jmax = 0.0f64;
        for i in 1..n {
            if g[i] > 0.0 {
                let sp = r[i] * self.params.theta_eps_prime(g[i], state.eps);
                let w = self.c_lo[i].abs().max(self.c_di[i].abs()).max(self.c_up[i].abs());
                jmax = jmax.max(sp * w);
            }
        }
        if jmax > 0.0 {
            2.0 / jmax
        } else {
            f64::INFINITY
        }
    }
}

struct StepReject {
    reason: String,
}

/// Density recovery from an arbitrary mass-function sample on a grid,
/// without a solver instance (used on extrapolated limit curves). Same
/// z-space stencil as `Solver::density_of`.
pub fn recover_density(dim: u32, grid: &RadialGrid, m: &[f64]) -> Vec<f64> {
    let d = dim as f64;
    let r = grid.nodes();
    let n = grid.n();
    let z: Vec<f64> = r.iter().map(|&ri| ri.powf(d) / d).collect();
    let mut g = vec![0.0; n + 1];
    g[0] = deriv3_start(z[0], z[1], z[2], m[0], m[1], m[2]);
    for i in 1..n {
        g[i] = deriv3(z[i - 1], z[i], z[i + 1], m[i - 1], m[i], m[i + 1]);
    }
    g[n] = deriv3_end(z[n - 2], z[n - 1], z[n], m[n - 2], m[n - 1], m[n]);
    g
}

/// Convenience wrapper: build everything from a scenario and run it with the
/// default checkpoint schedule.
pub fn run_scenario(sc: &Scenario) -> Result<(Solver, Trajectory)> {
    let params = sc.params()?;
    let grid = RadialGrid::build(&sc.grid)?;
    let mut solver = Solver::new(params.clone(), grid, SolverConfig::from_scenario(sc))?;
    let g_in = sc.initial.density(&params)?;
    let state0 = solver.init_state(&g_in)?;
    let checkpoints: Vec<f64> = sc.checkpoints().into_iter().filter(|&t| t > 0.0).collect();
    let mut cps = vec![0.0];
    cps.extend(checkpoints);
    let traj = solver.run(state0, &cps)?;
    Ok((solver, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use approx::assert_relative_eq;

    fn solver_with(
        n: usize,
        outer: f64,
        eps: f64,
        stepper: StepperKind,
        dt_init: f64,
    ) -> Solver {
        let params = ModelParams::new(1.0, 3, eps).unwrap();
        let grid = RadialGrid::build(&GridConfig { n, outer_radius: outer, q: 2.0 }).unwrap();
        let config = SolverConfig {
            dt: DtConfig { init: dt_init, min: 1e-13, max: 0.05 },
            stepper,
            ..Default::default()
        };
        Solver::new(params, grid, config).unwrap()
    }

    #[test]
    fn init_constant_density_gives_cubic_mass() {
        let solver = solver_with(128, 1.0, 0.1, StepperKind::Imex, 1e-4);
        let state = solver.init_state(&|_| 1.0).unwrap();
        for (i, &r) in solver.grid().nodes().iter().enumerate() {
            assert_relative_eq!(state.values[i], r * r * r / 3.0, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn init_zero_density() {
        let solver = solver_with(128, 8.0, 0.1, StepperKind::Imex, 1e-4);
        let state = solver.init_state(&|_| 0.0).unwrap();
        assert!(state.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_steady_profile_matches_quadrature_oracle() {
        let solver = solver_with(512, 8.0, 0.01, StepperKind::Imex, 1e-4);
        let params = solver.params().clone();
        let theta = 1.0;
        let state = solver
            .init_state(&move |r| params.steady_density_unchecked(theta, r))
            .unwrap();
        let expected = solver.params().steady_mass(theta).unwrap() / solver.params().c_d();
        assert_relative_eq!(*state.values.last().unwrap(), expected, max_relative = 1e-8);
    }

    #[test]
    fn density_recovery_on_exact_cubic() {
        let solver = solver_with(128, 1.0, 0.1, StepperKind::Imex, 1e-4);
        let state = solver.init_state(&|_| 1.0).unwrap();
        let g = solver.density_of(&state);
        for (i, &gv) in g.iter().enumerate().skip(1) {
            assert!((gv - 1.0).abs() < 1e-6, "node {i}: g = {gv}");
        }
    }

    #[test]
    fn density_recovery_matches_steady_profile() {
        let solver = solver_with(1024, 8.0, 0.01, StepperKind::Imex, 1e-4);
        let params = solver.params().clone();
        let theta = 1.0;
        let state = solver
            .init_state(&move |r| params.steady_density_unchecked(theta, r))
            .unwrap();
        let g = solver.density_of(&state);
        for i in (4..1024).step_by(61) {
            let r = solver.grid().node(i);
            let expect = solver.params().steady_density(theta, r).unwrap();
            assert_relative_eq!(g[i], expect, max_relative = 5e-4, epsilon = 1e-8);
        }
    }

    #[test]
    fn zero_state_is_stationary() {
        let mut solver = solver_with(128, 8.0, 0.1, StepperKind::Imex, 1e-3);
        let state = solver.init_state(&|_| 0.0).unwrap();
        let out = solver.time_step(&state, 1e-3).unwrap();
        assert!(out.state.values.iter().all(|&v| v.abs() < 1e-300));
    }

    #[test]
    fn steady_state_nearly_stationary() {
        let mut solver = solver_with(512, 8.0, 0.01, StepperKind::Imex, 1e-3);
        let params = solver.params().clone();
        let theta = 1.0;
        let state0 = solver
            .init_state(&move |r| params.steady_density_unchecked(theta, r))
            .unwrap();
        let m_scale = state0.mass_scale;
        let traj = solver.run(state0, &[0.0, 0.05]).unwrap();
        let drift: f64 = traj.states[1]
            .values
            .iter()
            .zip(traj.states[0].values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 2e-5 * m_scale, "steady drift {drift} vs scale {m_scale}");
    }

    #[test]
    fn comparison_preserved_for_ordered_data() {
        // mirrors the comparison property of mild solutions on a small grid
        let mut solver = solver_with(128, 8.0, 0.1, StepperKind::Imex, 1e-3);
        let lo0 = solver.init_state(&|r: f64| 0.3 * (-0.5 * r * r).exp()).unwrap();
        let hi0 = solver.init_state(&|r: f64| 0.5 * (-0.5 * r * r).exp()).unwrap();
        let mut lo = lo0;
        let mut hi = hi0;
        for _ in 0..20 {
            lo = solver.time_step(&lo, 1e-3).unwrap().state;
            hi = solver.time_step(&hi, 1e-3).unwrap().state;
        }
        let tol = 1e-12 * hi.mass_scale;
        for (a, b) in lo.values.iter().zip(hi.values.iter()) {
            assert!(a <= &(b + tol), "ordering violated: {a} > {b}");
        }
    }

    #[test]
    fn discrete_l1_contraction() {
        let mut solver = solver_with(256, 8.0, 0.1, StepperKind::Imex, 1e-3);
        // crossing pair (different widths, same mass scale ballpark)
        let a0 = solver.init_state(&|r: f64| 0.5 * (-0.5 * r * r).exp()).unwrap();
        let b0 = solver.init_state(&|r: f64| 0.25 * (-0.25 * r * r).exp()).unwrap();
        let l1 = |x: &MassState, y: &MassState, s: &Solver| -> f64 {
            let gx = s.density_of(x);
            let gy = s.density_of(y);
            let r = s.grid().nodes();
            let mut acc = 0.0;
            for i in 1..r.len() {
                let wa = (gx[i - 1] - gy[i - 1]).abs() * r[i - 1] * r[i - 1];
                let wb = (gx[i] - gy[i]).abs() * r[i] * r[i];
                acc += 0.5 * (wa + wb) * (r[i] - r[i - 1]);
            }
            acc
        };
        let d0 = l1(&a0, &b0, &solver);
        let mut a = a0;
        let mut b = b0;
        for _ in 0..50 {
            a = solver.time_step(&a, 1e-3).unwrap().state;
            b = solver.time_step(&b, 1e-3).unwrap().state;
        }
        let d1 = l1(&a, &b, &solver);
        assert!(d1 <= d0 * (1.0 + 1e-6), "L1 distance grew: {d0} -> {d1}");
    }

    #[test]
    fn gaussian_run_conserves_mass() {
        let mut solver = solver_with(512, 8.0, 0.05, StepperKind::Imex, 1e-3);
        let state0 = solver.init_state(&|r: f64| 0.8 * (-0.5 * r * r).exp()).unwrap();
        let scale = state0.mass_scale;
        let traj = solver.run(state0, &[0.0, 0.1, 0.25]).unwrap();
        assert!(traj.stats.mass_drift_max <= 1e-6 * scale, "drift {}", traj.stats.mass_drift_max);
    }

    #[test]
    fn flux_on_constant_patch() {
        let solver = solver_with(128, 1.0, 0.1, StepperKind::Imex, 1e-4);
        let c = 0.7;
        let state = solver.init_state(&move |_| c).unwrap();
        let h = solver.params().mobility_at(c, 0.1).unwrap();
        for i in (5..120).step_by(23) {
            let r = solver.grid().node(i);
            let expect = r * r * r * h;
            assert_relative_eq!(solver.mass_flux(&state, i), expect, max_relative = 1e-5);
        }
    }

    #[test]
    fn flux_vanishes_on_steady_state() {
        let solver = solver_with(512, 8.0, 0.01, StepperKind::Imex, 1e-4);
        let params = solver.params().clone();
        let state = solver
            .init_state(&move |r| params.steady_density_unchecked(1.0, r))
            .unwrap();
        // flux scale: r^d h(g); the first nodes carry the largest relative
        // truncation because the two flux terms cancel there
        for i in (16..400).step_by(48) {
            let r = solver.grid().node(i);
            let g = solver.params().steady_density(1.0, r).unwrap();
            let scale = r.powi(3) * solver.params().mobility_unreg(g);
            let flux = solver.mass_flux(&state, i);
            assert!(flux.abs() <= 5e-3 * scale.max(1e-12), "i = {i}: flux = {flux}, scale = {scale}");
        }
    }

    #[test]
    fn flux_consistent_with_time_derivative() {
        let mut solver = solver_with(256, 8.0, 0.1, StepperKind::Imex, 1e-5);
        let state = solver.init_state(&|r: f64| 0.6 * (-0.5 * r * r).exp()).unwrap();
        let dt = 1e-5;
        let out = solver.time_step(&state, dt).unwrap();
        let m_scale = state.mass_scale;
        for i in (10..250).step_by(31) {
            let dm_dt = (out.state.values[i] - state.values[i]) / dt;
            let flux = solver.mass_flux(&state, i);
            assert!(
                (dm_dt - flux).abs() <= 2e-3 * m_scale.max(flux.abs()),
                "i = {i}: dM/dt = {dm_dt}, flux = {flux}"
            );
        }
    }

    #[test]
    fn newton_mode_agrees_with_imex() {
        let state0;
        let imex_final;
        {
            let mut solver = solver_with(256, 8.0, 0.05, StepperKind::Imex, 5e-4);
            state0 = solver.init_state(&|r: f64| 1.2 * (-r * r).exp()).unwrap();
            imex_final = solver.run(state0.clone(), &[0.0, 0.05]).unwrap();
        }
        let mut newton = solver_with(256, 8.0, 0.05, StepperKind::Newton, 5e-4);
        let newton_final = newton.run(state0.clone(), &[0.0, 0.05]).unwrap();
        let scale = state0.mass_scale;
        for (a, b) in imex_final.states[1]
            .values
            .iter()
            .zip(newton_final.states[1].values.iter())
        {
            assert!((a - b).abs() < 1e-4 * scale, "imex {a} vs newton {b}");
        }
    }

    #[test]
    fn invalid_checkpoints_rejected() {
        let mut solver = solver_with(128, 8.0, 0.1, StepperKind::Imex, 1e-3);
        let state = solver.init_state(&|_| 0.0).unwrap();
        assert!(solver.run(state.clone(), &[]).is_err());
        assert!(solver.run(state, &[0.0, 0.2, 0.1]).is_err());
    }

    #[test]
    fn eps_mismatch_rejected() {
        let mut solver = solver_with(128, 8.0, 0.1, StepperKind::Imex, 1e-3);
        let mut state = solver.init_state(&|_| 0.0).unwrap();
        state.eps = 0.2;
        assert!(solver.run(state, &[0.0, 0.1]).is_err());
    }
}

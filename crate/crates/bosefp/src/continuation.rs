//! Continuation in the regularization parameter: eps-sweeps with shared
//! grids and checkpoints, scheme-monotonicity verification, Richardson
//! extrapolation of the eps -> 0 limit, condensate extraction, and the
//! headline experiments (long-time relaxation, transient condensates,
//! subcritical-spike smoothing).

use crate::diagnostics::{Diagnostics, Regime};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::model::ModelParams;
use crate::numerics::quad;
use crate::solver::{recover_density, Scenario, Solver, SolverConfig, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

/// Where the scheme-monotonicity invariant stands after a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub ok: bool,
    /// Worst signed violation `M_eps - M_eps'` (positive = violation), in
    /// mass-scale units.
    pub worst_violation: f64,
    /// (t, r, eps) of the worst violation, when any.
    pub worst_at: Option<(f64, f64, f64)>,
    pub tolerance: f64,
}

/// Condensate estimate at one checkpoint, with the uncertainty band spanned
/// by the two bracketing regime assumptions.
#[derive(Debug, Clone, Serialize)]
pub struct CondensateEstimate {
    pub t: f64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub regime: Regime,
    /// Radius below which the universal profile replaces the grid data.
    pub split_radius: f64,
    /// Fitted amplitude of the `r^{2-d}` correction.
    pub amplitude: f64,
}

/// A family of trajectories at decreasing eps on a shared grid and
/// checkpoint schedule, with the extrapolated limit and condensate series.
pub struct EpsFamily {
    pub eps_values: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    pub checkpoint_times: Vec<f64>,
    /// Extrapolated limit mass function per checkpoint.
    pub limit_mass: Vec<Vec<f64>>,
    pub condensate: Vec<CondensateEstimate>,
    pub monotonicity: MonotonicityReport,
    pub k_star_per_eps: Vec<f64>,
    /// Median empirical order of the eps-convergence, when measurable.
    pub richardson_order: Option<f64>,
    pub grid: RadialGrid,
    pub params: ModelParams,
    /// Total initial mass `m = c_d * m_tilde`.
    pub mass: f64,
}

fn install_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var("BOSEFP_THREADS") {
        if let Ok(n) = s.parse::<usize>() {
            builder = builder.num_threads(n.max(1));
        }
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Run one trajectory per eps over a shared checkpoint schedule and
/// extrapolate the limit. `eps_list` must be strictly decreasing with at
/// least three entries.
pub fn eps_sweep(scenario: &Scenario, eps_list: &[f64], checkpoints: &[f64]) -> Result<EpsFamily> {
    if eps_list.len() < 3 || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Input(
            "eps sweep requires a strictly decreasing list of at least three eps values".into(),
        ));
    }
    if checkpoints.is_empty() || checkpoints[0] != 0.0 {
        return Err(Error::Input("sweep checkpoints must start at t = 0".into()));
    }
    let base_params = ModelParams::new(scenario.gamma, scenario.dim, 0.0)?;
    let grid = RadialGrid::build(&scenario.grid)?;

    let runs: Vec<Result<Trajectory>> = install_pool(|| {
        eps_list
            .par_iter()
            .map(|&eps| {
                let params = base_params.with_eps(eps)?;
                let mut solver =
                    Solver::new(params.clone(), grid.clone(), SolverConfig::from_scenario(scenario))?;
                let g_in = scenario.initial.density(&params)?;
                let state0 = solver.init_state(&g_in)?;
                solver.run(state0, checkpoints)
            })
            .collect()
    });
    let mut trajectories = Vec::with_capacity(runs.len());
    for r in runs {
        trajectories.push(r?);
    }

    let m_tilde = trajectories[0].states[0].mass_scale;
    let mass = m_tilde * base_params.c_d();
    let tol = 1e-6 * m_tilde;

    let monotonicity = check_monotonicity(&grid, eps_list, &trajectories, tol);
    let (limit_mass, richardson_order) =
        extrapolate_limit(eps_list, &trajectories, m_tilde);
    let k_star_per_eps = trajectories.iter().map(|t| t.stats.lipschitz_sup).collect();

    let mut family = EpsFamily {
        eps_values: eps_list.to_vec(),
        trajectories,
        checkpoint_times: checkpoints.to_vec(),
        limit_mass,
        condensate: Vec::new(),
        monotonicity,
        k_star_per_eps,
        richardson_order,
        grid,
        params: base_params,
        mass,
    };
    family.condensate = (0..family.checkpoint_times.len())
        .map(|j| estimate_condensate(&family, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(family)
}

fn check_monotonicity(
    grid: &RadialGrid,
    eps_list: &[f64],
    trajectories: &[Trajectory],
    tol: f64,
) -> MonotonicityReport {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = None;
    for pair in 0..eps_list.len() - 1 {
        let coarse = &trajectories[pair];
        let fine = &trajectories[pair + 1]; // smaller eps
        for (sc, sf) in coarse.states.iter().zip(fine.states.iter()) {
            for (i, (&mc, &mf)) in sc.values.iter().zip(sf.values.iter()).enumerate() {
                let violation = mc - mf; // M_eps should sit below M_eps'
                if violation > worst {
                    worst = violation;
                    worst_at = Some((sc.time, grid.node(i), eps_list[pair]));
                }
            }
        }
    }
    MonotonicityReport { ok: worst <= tol, worst_violation: worst, worst_at, tolerance: tol }
}

/// Extrapolation of the eps -> 0 limit from the three smallest values.
/// Pointwise Aitken (Richardson with the order estimated per node from the
/// successive-difference ratio), guarded by the monotone-limit fallback:
/// wherever the differences do not contract, the supremum over the computed
/// eps (= the smallest-eps value, by scheme monotonicity) is used instead.
fn extrapolate_limit(
    eps_list: &[f64],
    trajectories: &[Trajectory],
    m_tilde: f64,
) -> (Vec<Vec<f64>>, Option<f64>) {
    let n_eps = eps_list.len();
    let (i0, i1, i2) = (n_eps - 1, n_eps - 2, n_eps - 3); // i0: smallest eps
    let eps_ratio = eps_list[i0] / eps_list[i1];
    let n_ck = trajectories[0].states.len();
    let mut orders = Vec::new();
    let mut limit = Vec::with_capacity(n_ck);
    for j in 0..n_ck {
        let m0 = &trajectories[i0].states[j].values;
        let m1 = &trajectories[i1].states[j].values;
        let m2 = &trajectories[i2].states[j].values;
        let floor = 1e-13 * m_tilde;
        let mut vals: Vec<f64> = (0..m0.len())
            .map(|i| {
                let d2 = m0[i] - m1[i]; // newest difference
                let d1 = m1[i] - m2[i];
                if d1 > floor && d2 > floor && d2 < 0.95 * d1 {
                    let rho = d2 / d1;
                    orders.push(rho.ln() / eps_ratio.ln());
                    (m0[i] + d2 * rho / (1.0 - rho)).clamp(m0[i], m_tilde * (1.0 + 1e-9))
                } else {
                    // monotone fallback
                    m0[i]
                }
            })
            .collect();
        // restore monotonicity in r up to extrapolation noise
        for i in 1..vals.len() {
            if vals[i] < vals[i - 1] {
                vals[i] = vals[i - 1];
            }
        }
        limit.push(vals);
    }
    let order = if orders.is_empty() {
        None
    } else {
        orders.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(orders[orders.len() / 2])
    };
    (limit, order)
}

/// Partial mass of the critical profile, `int_0^r g_c rho^{d-1} d rho`
/// (no `c_d` factor), with the origin singularity integrated analytically.
fn critical_profile_partial_mass(params: &ModelParams, r: f64) -> Result<f64> {
    let d = params.dim() as f64;
    let g = params.gamma();
    let p = d - 2.0 / g;
    let delta = r.min(1e-3);
    let head = params.c_gamma() * delta.powf(p) / p
        + quad::integrate(
            |rho| {
                // bounded remainder of g_c minus its leading power law
                let w = 0.5 * g * rho * rho;
                let em1 = w.exp_m1();
                let ratio_m1 = (w - em1) / em1;
                let corr = (ratio_m1.ln_1p() / g).exp_m1();
                params.c_gamma() * rho.powf(-2.0 / g) * corr * rho.powf(d - 1.0)
            },
            0.0,
            delta,
            1e-12,
            1e-12,
        )?;
    let tail = if r > delta {
        quad::integrate(
            |rho| params.steady_density_unchecked(0.0, rho) * rho.powf(d - 1.0),
            delta,
            r,
            0.0,
            1e-12,
        )?
    } else {
        0.0
    };
    Ok(head + tail)
}

/// Condensate estimate at checkpoint index `j`: mass of the limit curve
/// inside the split radius minus the regular-profile mass there, where the
/// profile is the critical density plus the fitted `A r^{2-d}` correction.
fn estimate_condensate(family: &EpsFamily, j: usize) -> Result<CondensateEstimate> {
    let params = &family.params;
    if !params.profile_regime() {
        return Err(Error::Domain(
            "condensate estimation requires the profile regime 2/gamma + 2 - d > 0".into(),
        ));
    }
    let grid = &family.grid;
    let r = grid.nodes();
    let t = family.checkpoint_times[j];
    let m_lim = &family.limit_mass[j];
    let g0 = recover_density(params.dim(), grid, m_lim);
    let d = params.dim() as f64;
    let c_gamma = params.c_gamma();
    let alpha = 2.0 / params.gamma();
    let start = crate::diagnostics::profile_start_index(grid);

    // regime classification at the first refinement-stable node
    let threshold = 0.5 * c_gamma * r[start].powf(-alpha);
    if g0[start] < threshold {
        return Ok(CondensateEstimate {
            t,
            value: 0.0,
            lo: 0.0,
            hi: 0.0,
            regime: Regime::Bounded,
            split_radius: r[start],
            amplitude: 0.0,
        });
    }

    // find a decade [r_lo, 10 r_lo] on which the density tracks g_c within 10%
    let r_cap = 0.5f64.min(0.5 * grid.outer_radius());
    let mut fit: Option<(usize, usize)> = None;
    'outer: for lo in start..grid.n() {
        if r[lo] <= 0.0 || r[lo] * 10.0 > r_cap {
            break;
        }
        let hi_r = 10.0 * r[lo];
        let mut hi = lo;
        for i in lo..grid.n() {
            if r[i] > hi_r {
                break;
            }
            hi = i;
            let gc = params.steady_density_unchecked(0.0, r[i]);
            if (g0[i] / gc - 1.0).abs() > 0.1 {
                continue 'outer;
            }
        }
        if hi > lo + 4 {
            fit = Some((lo, hi));
            break;
        }
    }

    match fit {
        Some((lo, hi)) => {
            // median amplitude over the fitted decade
            let mut amps: Vec<f64> = (lo..=hi)
                .map(|i| {
                    let gc = params.steady_density_unchecked(0.0, r[i]);
                    (g0[i] - gc) * r[i].powf(d - 2.0)
                })
                .collect();
            amps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let amp = amps[amps.len() / 2];
            let amp_lo = amps[amps.len() / 10];
            let amp_hi = amps[amps.len() - 1 - amps.len() / 10];
            let split = r[hi];
            let m_split = interp_mass(grid, m_lim, split);
            let gc_mass = critical_profile_partial_mass(params, split)?;
            let c_d = params.c_d();
            let est = |a: f64| (c_d * (m_split - gc_mass - a * split * split / 2.0)).clamp(0.0, family.mass);
            Ok(CondensateEstimate {
                t,
                value: est(amp),
                lo: est(amp_hi).min(est(amp_lo)),
                hi: est(amp_hi).max(est(amp_lo)),
                regime: Regime::Singular,
                split_radius: split,
                amplitude: amp,
            })
        }
        None => {
            // ambiguous at this resolution: bracket between the bounded
            // assumption (no condensate) and the bare g_c subtraction
            let split = r_cap;
            let m_split = interp_mass(grid, m_lim, split);
            let gc_mass = critical_profile_partial_mass(params, split)?;
            let raw = (params.c_d() * (m_split - gc_mass)).clamp(0.0, family.mass);
            Ok(CondensateEstimate {
                t,
                value: 0.5 * raw,
                lo: 0.0,
                hi: raw,
                regime: Regime::Singular,
                split_radius: split,
                amplitude: 0.0,
            })
        }
    }
}

fn interp_mass(grid: &RadialGrid, m: &[f64], r: f64) -> f64 {
    let nodes = grid.nodes();
    match nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
        Ok(i) => m[i],
        Err(i) => {
            let i = i.clamp(1, nodes.len() - 1);
            let t = (r - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
            m[i - 1] * (1.0 - t) + m[i] * t
        }
    }
}

impl EpsFamily {
    /// Condensate estimate at the checkpoint nearest to `t`.
    pub fn condensate_at(&self, t: f64) -> Result<&CondensateEstimate> {
        if self.condensate.is_empty() {
            return Err(Error::Input("no checkpoints in family".into()));
        }
        let j = self
            .checkpoint_times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
            .map(|(j, _)| j)
            .unwrap();
        Ok(&self.condensate[j])
    }

    /// Extrapolated density at checkpoint index `j`.
    pub fn limit_density(&self, j: usize) -> Vec<f64> {
        recover_density(self.params.dim(), &self.grid, &self.limit_mass[j])
    }

    /// Relative spread of the measured Lipschitz constants between the two
    /// smallest eps values.
    pub fn k_star_spread_last_two(&self) -> f64 {
        let n = self.k_star_per_eps.len();
        let a = self.k_star_per_eps[n - 2];
        let b = self.k_star_per_eps[n - 1];
        (a - b).abs() / a.abs().max(1e-300)
    }

    /// Measured constant of the upper-bound certificate
    /// `g <= g_c + B r^{2-d}` on `(0, r_star)` over all checkpoints of the
    /// extrapolated limit (positive part of the amplitude).
    pub fn upper_bound_constant(&self, r_star: f64) -> f64 {
        let d = self.params.dim() as f64;
        let r = self.grid.nodes();
        let start = crate::diagnostics::profile_start_index(&self.grid);
        let mut b = 0.0f64;
        for j in 0..self.limit_mass.len() {
            let g0 = self.limit_density(j);
            for i in start..self.grid.n() {
                if r[i] > r_star {
                    break;
                }
                let gc = self.params.steady_density_unchecked(0.0, r[i]);
                b = b.max((g0[i] - gc) * r[i].powf(d - 2.0));
            }
        }
        b
    }

    /// Residual of the mass sum rule `a(t) + c_d (regular integral) = m` at
    /// checkpoint `j`, in units of m.
    pub fn sum_rule_residual(&self, j: usize) -> f64 {
        let est = &self.condensate[j];
        let m_lim = &self.limit_mass[j];
        let c_d = self.params.c_d();
        let m_split = interp_mass(&self.grid, m_lim, est.split_radius);
        let outer = m_lim.last().unwrap() - m_split;
        let inner_regular = match est.regime {
            Regime::Bounded => m_split,
            Regime::Singular => m_split - est.value / c_d,
        };
        ((est.value + c_d * (inner_regular + outer)) - self.mass) / self.mass
    }
}

/// Checkpoint schedule for experiments: linear spacing through the early
/// transient, geometric afterwards.
pub fn experiment_checkpoints(linear_until: f64, step: f64, t_final: f64, growth: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut t = step;
    while t < linear_until.min(t_final) {
        out.push(t);
        t += step;
    }
    let mut t = linear_until.min(t_final);
    while t < t_final {
        out.push(t);
        t = (t * growth).min(t_final);
        if t - out.last().unwrap() < 1e-9 {
            break;
        }
    }
    out.push(t_final);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

/// Long-time relaxation report.
#[derive(Debug, Clone, Serialize)]
pub struct LongtimeReport {
    pub times: Vec<f64>,
    pub l1_gap: Vec<f64>,
    pub energy_gap: Vec<f64>,
    pub condensate_gap: Vec<f64>,
    pub h_monotone: bool,
    pub final_l1_gap: f64,
    pub final_condensate_gap: f64,
    pub condensate_target: f64,
}

/// Run an eps-sweep to `t_large` and measure convergence to the
/// free-energy minimizer of the initial mass at every checkpoint.
pub fn longtime_experiment(
    scenario: &Scenario,
    eps_list: &[f64],
    t_large: f64,
) -> Result<(EpsFamily, LongtimeReport)> {
    let mut sc = scenario.clone();
    sc.t_final = t_large;
    let cps = experiment_checkpoints(1.0, scenario.diagnostics_every.min(0.25), t_large, 1.5);
    let family = eps_sweep(&sc, eps_list, &cps)?;

    let params = &family.params;
    let m = family.mass;
    let minimizer = params.minimizer(m)?;
    let cond_target = minimizer.condensate();
    let d = params.dim() as f64;
    let r = family.grid.nodes();
    let n = family.grid.n();

    let mut times = Vec::new();
    let mut l1_gap = Vec::new();
    let mut energy_gap = Vec::new();
    let mut condensate_gap = Vec::new();
    let diag = Diagnostics::new(params, &family.grid)?;
    for j in 0..family.checkpoint_times.len() {
        let g0 = family.limit_density(j);
        // L^1 distance of the regular part to the minimizer density,
        // away from the condensate region for supercritical mass
        let r_floor = if cond_target > 0.0 { 0.1 } else { 0.0 };
        let mut acc = 0.0;
        for i in 1..=n {
            if r[i] < r_floor {
                continue;
            }
            let fm_a = params.steady_density_unchecked(minimizer.theta(), r[i - 1].max(r[1]));
            let fm_b = params.steady_density_unchecked(minimizer.theta(), r[i]);
            let wa = (g0[i - 1].max(0.0) - fm_a).abs()
                * if i == 1 { 0.0 } else { r[i - 1].powf(d - 1.0) };
            let wb = (g0[i].max(0.0) - fm_b).abs() * r[i].powf(d - 1.0);
            acc += 0.5 * (wa + wb) * (r[i] - r[i - 1]);
        }
        let h_state = diag.free_energy_unregularized(&g0)?;
        let h_min = params.minimizer_energy(m)?;
        times.push(family.checkpoint_times[j]);
        l1_gap.push(params.c_d() * acc);
        energy_gap.push((h_state - h_min).abs());
        condensate_gap.push((family.condensate[j].value - cond_target).abs());
    }

    // free-energy monotonicity along every finite-eps trajectory
    let mut h_monotone = true;
    for traj in &family.trajectories {
        let h0 = traj.records[0].free_energy.abs().max(1e-12);
        for w in traj.records.windows(2) {
            if w[1].free_energy > w[0].free_energy + 1e-7 * h0 {
                h_monotone = false;
            }
        }
    }

    let report = LongtimeReport {
        final_l1_gap: *l1_gap.last().unwrap(),
        final_condensate_gap: *condensate_gap.last().unwrap(),
        condensate_target: cond_target,
        times,
        l1_gap,
        energy_gap,
        condensate_gap,
        h_monotone,
    };
    Ok((family, report))
}

/// Transient-condensate experiment: detect the interval where the
/// extrapolated condensate is positive, certify its disappearance and the
/// eventual regularity of the density; also run the subcritical-spike
/// smoothing check.
#[derive(Debug, Clone, Serialize)]
pub struct TransientReport {
    /// Detection threshold on a(t), in mass units.
    pub threshold: f64,
    pub condensate_interval: Option<(f64, f64)>,
    /// Condensate estimate has returned below threshold by the final time.
    pub vanished: bool,
    /// Sup of the limit density at the final checkpoint (away from the
    /// first nodes).
    pub final_sup_density: f64,
    pub final_regime_bounded: bool,
    pub spike_bounded: bool,
    pub spike_sup_at_first_checkpoint: f64,
}

pub fn transient_condensate_experiment(
    scenario: &Scenario,
    eps_list: &[f64],
    threshold_frac: f64,
) -> Result<(EpsFamily, TransientReport)> {
    let params = scenario.params()?;
    let mc = params.critical_mass()?;
    let cps = experiment_checkpoints(
        scenario.t_final.min(1.0),
        scenario.diagnostics_every,
        scenario.t_final,
        1.4,
    );
    let family = eps_sweep(scenario, eps_list, &cps)?;
    if family.mass >= mc {
        return Err(Error::Input(format!(
            "transient-condensate experiment requires subcritical mass (m = {}, m_c = {mc})",
            family.mass
        )));
    }
    let threshold = threshold_frac * family.mass;
    let mut on: Option<f64> = None;
    let mut off: Option<f64> = None;
    for est in &family.condensate {
        if est.value > threshold {
            if on.is_none() {
                on = Some(est.t);
            }
            off = None;
        } else if on.is_some() && off.is_none() {
            off = Some(est.t);
        }
    }
    let interval = on.map(|t_on| (t_on, off.unwrap_or(*family.checkpoint_times.last().unwrap())));
    let vanished = family.condensate.last().map(|e| e.value <= threshold).unwrap_or(true);
    let last = family.limit_mass.len() - 1;
    let g_last = family.limit_density(last);
    let final_sup = g_last[3..].iter().cloned().fold(0.0, f64::max);
    let final_regime_bounded = family.condensate[last].regime == Regime::Bounded;

    // subcritical-spike smoothing: alpha = 0.8 (2/gamma), capped, must give a
    // bounded density at the first checkpoint after t = 0
    let alpha = 0.8 * 2.0 / scenario.gamma;
    let cap = 1e4;
    let mut spike_sc = scenario.clone();
    spike_sc.initial = crate::solver::InitialData::PowerlawSpike {
        l: 1.0,
        alpha,
        cap,
        envelope_width: 1.0,
    };
    spike_sc.t_final = 0.01;
    let eps_small = *eps_list.last().unwrap();
    let spike_params = params.with_eps(eps_small)?;
    let grid = RadialGrid::build(&spike_sc.grid)?;
    let mut solver = Solver::new(spike_params.clone(), grid, SolverConfig::from_scenario(&spike_sc))?;
    let g_in = spike_sc.initial.density(&spike_params)?;
    let state0 = solver.init_state(&g_in)?;
    let traj = solver.run(state0, &[0.0, 0.01])?;
    let g_first = solver.density_of(&traj.states[1]);
    let spike_sup = g_first[3..].iter().cloned().fold(0.0, f64::max);
    let spike_bounded = spike_sup < 0.5 * cap;

    let report = TransientReport {
        threshold,
        condensate_interval: interval,
        vanished,
        final_sup_density: final_sup,
        final_regime_bounded,
        spike_bounded,
        spike_sup_at_first_checkpoint: spike_sup,
    };
    Ok((family, report))
}

/// Check the Lipschitz-in-time property of the condensate series against
/// the measured K*: returns the worst ratio
/// `|a(t) - a(s)| / (c_d K* |t - s|)` over consecutive checkpoints.
pub fn condensate_lipschitz_ratio(family: &EpsFamily) -> f64 {
    let k_star = family
        .k_star_per_eps
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .max(1e-300);
    let c = family.params.c_d() * k_star;
    let mut worst = 0.0f64;
    for w in family.condensate.windows(2) {
        let dt = w[1].t - w[0].t;
        if dt > 0.0 {
            worst = worst.max((w[1].value - w[0].value).abs() / (c * dt));
        }
    }
    worst
}
